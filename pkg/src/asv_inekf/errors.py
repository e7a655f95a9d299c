"""Exception types shared across the package."""


class EstimationError(Exception):
    """Base class for all errors raised by this package."""


class BranchAmbiguityError(EstimationError, ValueError):
    """Logarithm requested at the rotation angle pi, where the axis sign is ambiguous."""


class DegenerateOrientationError(EstimationError, ValueError):
    """Yaw (or an Euler decomposition) is undefined at gimbal lock."""


class UnobservableInnovationError(EstimationError, ArithmeticError):
    """The projected innovation covariance is singular."""


class MeasurementRejected(EstimationError):
    """An update was skipped because the innovation failed the gate."""


class NoHorizonError(EstimationError, ValueError):
    """No usable horizon segment remained after filtering."""


class HorizonOutOfFrameError(EstimationError, ValueError):
    """The geometric horizon does not cross the image."""


class ConfigError(EstimationError, ValueError):
    """Invalid experiment configuration."""


class LogFormatError(EstimationError, ValueError):
    """Malformed replay log."""
