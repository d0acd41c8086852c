class SalbenchError(Exception):
    """Base class for all package errors."""


class ShapeError(SalbenchError, ValueError):
    """Tensor dimensions violate an operation's precondition."""


class ContractError(SalbenchError, ValueError):
    """Inputs violate a value-level precondition (non-binary mask, empty list, ...)."""


class ConfigError(SalbenchError, ValueError):
    """Invalid network or run configuration."""


class IndexFormatError(SalbenchError, ValueError):
    """Malformed dataset index; the message names the offending row or id."""


class ImageFormatError(SalbenchError, ValueError):
    """Unreadable or unsupported Netpbm file."""


class MissingInputError(SalbenchError, FileNotFoundError):
    """A required input file (index, image, saliency map, weights) is absent."""


class NumericalError(SalbenchError, ArithmeticError):
    """A computation produced NaN or infinity (e.g. a diverged training run)."""
