"""Vehicular federated self-supervised learning simulator with SAC resource allocation."""

from .config import RunConfig
from .harness import run_baseline, run_test, run_training, slot_to_round

__all__ = ["RunConfig", "run_training", "run_test", "run_baseline", "slot_to_round"]
__version__ = "0.1.0"
