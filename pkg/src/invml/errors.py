"""Exception types raised across the package."""


class InvMLError(Exception):
    """Base class for all package errors."""


class ShapeMismatch(InvMLError, ValueError):
    pass


class NonFiniteValue(InvMLError, ValueError):
    pass


class SingularMatrix(InvMLError, ArithmeticError):
    pass


class IllConditioned(InvMLError, ArithmeticError):
    pass


class ZeroMatrix(InvMLError, ValueError):
    pass


class RankDeficient(InvMLError, ArithmeticError):
    pass


class RankDeficientHead(RankDeficient):
    pass


class NoConvergence(InvMLError, ArithmeticError):
    pass


class CycleDetected(InvMLError, RuntimeError):
    pass


class KTooLarge(InvMLError, ValueError):
    pass


class KRangeInvalid(InvMLError, ValueError):
    pass


class MissingLabels(InvMLError, ValueError):
    pass


class DegenerateFold(InvMLError, ValueError):
    pass


class BadMagic(InvMLError, ValueError):
    pass


class TruncatedFile(InvMLError, ValueError):
    pass


class CountMismatch(InvMLError, ValueError):
    pass


class NonFiniteLoss(InvMLError, ArithmeticError):
    def __init__(self, epoch, component):
        super().__init__(f"non-finite loss at epoch {epoch} (component: {component})")
        self.epoch = epoch
        self.component = component


class VersionMismatch(InvMLError, ValueError):
    pass


class ChecksumMismatch(InvMLError, ValueError):
    pass


class DisconnectedPair(InvMLError, ValueError):
    pass


class NoValidWaypoints(InvMLError, ValueError):
    pass


class ConfigError(InvMLError, ValueError):
    pass


class DimMismatch(ShapeMismatch):
    pass
