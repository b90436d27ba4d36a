"""Exception hierarchy shared across the package."""


class ContractViolation(ValueError):
    """An operation was called with arguments outside its contract (shapes, lengths, ids)."""


class ConfigurationError(ValueError):
    """A hyperparameter or configuration field is invalid."""


class NonFiniteError(ArithmeticError):
    """A NaN or Inf appeared in a tensor or loss value."""


class UndefinedMetricError(ValueError):
    """A metric is undefined for the given input (e.g. ROC-AUC with one class)."""


class DataError(ValueError):
    """Base class for dataset ingestion failures."""


class SchemaError(DataError):
    def __init__(self, column):
        super().__init__(f"missing column {column!r}")
        self.column = column


class LabelError(DataError):
    def __init__(self, row, value):
        super().__init__(f"row {row}: label {value!r} is not 0 or 1")
        self.row = row
        self.value = value


class CsvParseError(DataError):
    def __init__(self, message, byte_offset):
        super().__init__(f"{message} (near byte offset {byte_offset})")
        self.byte_offset = byte_offset


class ModelFileError(Exception):
    """Base class for model file load failures."""


class BadMagicError(ModelFileError):
    pass


class UnsupportedVersionError(ModelFileError):
    pass


class TruncatedModelError(ModelFileError):
    pass


class ChecksumError(ModelFileError):
    pass
