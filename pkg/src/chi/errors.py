"""Exception hierarchy shared across the package."""


class ChiError(Exception):
    """Base class for all errors raised by chi."""


class DatasetError(ChiError):
    """Malformed or unusable input data."""


class SchemaError(ChiError):
    """Schema is inconsistent with itself or with the data."""


class ContractError(ChiError, ValueError):
    """A function was called outside its documented domain."""


class TrainingError(ChiError):
    """Numerical failure while fitting a model."""


class ModelFormatError(ChiError):
    """A persisted model file could not be read."""
