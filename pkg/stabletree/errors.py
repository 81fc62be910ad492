class StabletreeError(Exception):
    pass


class ArityError(StabletreeError):
    pass


class InputValidationError(StabletreeError):
    pass


class UnsupportedPenaltyError(StabletreeError):
    pass


class DatasetError(StabletreeError):
    pass


class DataError(StabletreeError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line


class ModelParseError(StabletreeError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset
