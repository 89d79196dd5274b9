"""Exception types raised across the toolkit."""


class OnionKitError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(OnionKitError, ValueError):
    pass


class ZeroRowSum(OnionKitError, ValueError):
    pass


class RankDeficient(OnionKitError, UserWarning):
    """Warning category: fewer PCA components than requested were returned."""


class NotCentered(OnionKitError, ValueError):
    pass


class DegenerateConfounder(OnionKitError, ValueError):
    """The confounder has no covariance with the remaining data subspace."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ZeroOperator(OnionKitError, ArithmeticError):
    pass


class NonFiniteLoss(OnionKitError, FloatingPointError):
    pass


class ConfigError(OnionKitError, ValueError):
    pass


class DegenerateDesign(OnionKitError, ValueError):
    pass


class EmptyTrainingSet(OnionKitError, ValueError):
    pass


class EmptyClass(OnionKitError, ValueError):
    pass


class SingleClass(OnionKitError, ValueError):
    pass


class TooFewSamples(OnionKitError, ValueError):
    pass


class EmptyCellRequired(OnionKitError, ValueError):
    pass
