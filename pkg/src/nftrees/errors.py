"""Exception hierarchy shared across the package."""


class NftreesError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(NftreesError):
    """Operand shapes are incompatible with the requested operation."""


class ContractError(NftreesError):
    """A caller violated an operation's precondition."""


class StructureError(NftreesError):
    """A parent array does not encode a connected, acyclic, single-root tree."""


class CapacityError(NftreesError):
    """An instance is too large for exhaustive enumeration."""


class DataError(NftreesError):
    """A dataset item is malformed (missing labels, bad attribute size, ...)."""


class ParseError(NftreesError):
    """Tree text could not be parsed; carries the byte offset of the failure."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class FormatError(NftreesError):
    """A structured text file (embeddings, checkpoint, CRF dump) is malformed."""


class ConfigError(NftreesError):
    """A configuration value is out of bounds or inconsistent."""


class TrainingError(NftreesError):
    """Optimization cannot proceed (for example a non-finite gradient)."""
