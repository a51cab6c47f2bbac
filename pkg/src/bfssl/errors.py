"""Exception types shared across the simulator."""


class BfsslError(Exception):
    pass


class ConfigError(BfsslError, ValueError):
    pass


class BoundsError(BfsslError, ValueError):
    pass


class UnreachableLinkError(BfsslError):
    """Transmission rate is zero, so the upload never completes."""


class DegenerateLinkError(BfsslError):
    """SINR is zero; the A/E notation terms are undefined."""


class InfeasibleLinkError(BfsslError):
    """The error-rate power floor exceeds the maximum transmit power."""


class DegenerateInstanceError(BfsslError):
    pass


class ConstraintViolation(BfsslError, ValueError):
    pass


class EmptyRoundError(BfsslError):
    """No usable local model reached the base station this round."""


class ArchitectureMismatch(BfsslError, ValueError):
    pass


class SamplingFault(BfsslError, RuntimeError):
    pass


class NonFiniteOutput(BfsslError, FloatingPointError):
    pass
