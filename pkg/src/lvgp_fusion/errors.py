"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class LVGPError(Exception):
    """Base class for all package errors."""


class DataError(LVGPError, ValueError):
    """Bad input data: schema mismatch, unparsable cells, unknown levels."""


class SchemaError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, row: int, column: str, value: str):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"row {row}: cannot parse {value!r} in column {column!r} as a number")


class EmptyDatasetError(DataError):
    pass


class UnknownLevelError(DataError):
    def __init__(self, variable: str, level: str):
        self.variable = variable
        self.level = level
        super().__init__(f"unknown level {level!r} for categorical variable {variable!r}")


class NumericalError(LVGPError, RuntimeError):
    """Linear-algebra or optimization failure."""


class SingularMatrixError(NumericalError):
    pass


class DegeneracyError(NumericalError):
    pass


class UnfittableError(NumericalError):
    pass
