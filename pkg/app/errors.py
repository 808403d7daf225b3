class DrugCombError(Exception):
    """Base class for every error raised by the engine."""

    code = "DrugCombError"


class EmptyNameError(DrugCombError):
    code = "EmptyName"


class InvalidLabelError(DrugCombError):
    code = "InvalidLabel"


class ArityViolationError(DrugCombError):
    code = "ArityViolation"


class EmptyCorpusError(DrugCombError):
    code = "EmptyCorpus"


class EmptyGroupError(DrugCombError):
    code = "EmptyGroup"


class DatasetParseError(DrugCombError):
    code = "ParseError"

    def __init__(self, path: str, line: int, field: str, message: str):
        self.path = path
        self.line = line
        self.field = field
        super().__init__(f"{path}:{line}: field '{field}': {message}")


class DuplicateIdError(DrugCombError):
    code = "DuplicateId"


class IdMismatchError(DrugCombError):
    code = "IdMismatch"

    def __init__(self, missing_in_predictions: list[str], missing_in_gold: list[str]):
        self.missing_in_predictions = missing_in_predictions
        self.missing_in_gold = missing_in_gold
        super().__init__(
            f"ids missing in predictions: {missing_in_predictions}; "
            f"ids missing in gold: {missing_in_gold}"
        )


class BackendError(DrugCombError):
    code = "BackendError"


class ReviewParseError(DrugCombError):
    code = "ReviewParseError"


class SchemaViolationError(DrugCombError):
    code = "SchemaViolation"
