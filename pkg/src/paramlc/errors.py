"""Exception hierarchy shared by all paramlc modules."""


class ParamLCError(Exception):
    """Base class for every error raised by this package."""


class NonConvergence(ParamLCError):
    pass


class PoleParameter(ParamLCError, ValueError):
    pass


class InvalidParameters(ParamLCError, ValueError):
    pass


class DegenerateState(ParamLCError):
    pass


class CutoffTooSmall(ParamLCError):
    pass


class BadModeIndex(ParamLCError, IndexError):
    pass


class EigenFailure(ParamLCError):
    pass


class Infeasible(ParamLCError, ValueError):
    pass


class DimensionOverflow(ParamLCError):
    pass


class DegenerateKernel(ParamLCError):
    pass


class BelowThreshold(ParamLCError, ValueError):
    """Raised when an operation needs D > kappa/4 (the limit-cycle phase)."""


class StepUnstable(ParamLCError):
    pass


class StepTooLarge(ParamLCError, ValueError):
    pass


class NotAntisymmetric(ParamLCError, ValueError):
    pass


class ConfigInvalid(ParamLCError, ValueError):
    pass
