"""Exception types shared across the package."""


class BpCodesError(Exception):
    """Base class for all package errors."""


class RankDeficient(BpCodesError):
    """A parity-check matrix does not have full row rank over GF(2)."""


class DimensionMismatch(BpCodesError, ValueError):
    pass


class ParseError(BpCodesError, ValueError):
    pass


class InvalidParams(BpCodesError, ValueError):
    pass


class NumericalFailure(BpCodesError, ArithmeticError):
    """NaN or infinity escaped the decoder despite clamping."""


class FilterStarvation(BpCodesError):
    """Syndrome filtering rejected nearly every training frame."""


class NoOverlap(BpCodesError, ValueError):
    """Two BER curves share no common BER range."""
