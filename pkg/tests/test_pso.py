import numpy as np
import pytest

from bfssl import pso
from bfssl.errors import ConfigError
from bfssl.sac import ActionBounds

CFG = pso.PsoConfig()


def bowl(target):
    return lambda x: float(np.sum((x - target) ** 2))


def test_config_defaults_and_validation():
    assert (CFG.max_iterations, CFG.inertia, CFG.personal_coeff, CFG.social_coeff) == (100, 0.2, 0.1, 0.1)
    assert (CFG.lower, CFG.upper) == (1e-4, 1.0)
    with pytest.raises(ConfigError):
        pso.PsoConfig(max_iterations=0)
    with pytest.raises(ConfigError):
        pso.PsoConfig(lower=1.0, upper=1.0)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_convex_bowl(seed):
    target = np.array([0.3, 0.7, 0.5, 0.2])
    res = pso.pso_optimize(bowl(target), 4, CFG, np.random.default_rng(seed))
    assert res.value < 1e-3
    assert len(res.trace) == CFG.max_iterations


def test_trace_monotone_and_bounds_respected():
    # optimum outside the box pushes particles against the walls
    res = pso.pso_optimize(bowl(np.array([2.0, -1.0])), 2, CFG, np.random.default_rng(3))
    assert np.all(np.diff(res.trace) <= 0)
    assert res.visited_min >= CFG.lower and res.visited_max <= CFG.upper
    assert res.position[0] > 0.5 and res.position[1] < 0.5


def test_deterministic_under_seed():
    f = bowl(np.array([0.4, 0.6]))
    a = pso.pso_optimize(f, 2, CFG, np.random.default_rng(9))
    b = pso.pso_optimize(f, 2, CFG, np.random.default_rng(9))
    assert np.array_equal(a.trace, b.trace) and np.array_equal(a.position, b.position)


def test_positions_to_action():
    bounds = ActionBounds(0.01, 1.0, 5e7, 4e8)
    p, f = pso.positions_to_action(np.array([1e-4, 1.0, 1.0, 1e-4]), bounds, CFG)
    assert np.allclose(p, [0.01, 1.0]) and np.allclose(f, [4e8, 5e7])
