"""Exception hierarchy.

Errors split into two families so the CLI can map them onto exit codes:
``ValidationError`` (bad input or config, exit 1) and ``NumericError``
(a computation that could not complete, exit 2).
"""


class ConsensusError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 2


class ValidationError(ConsensusError, ValueError):
    exit_code = 1


class NumericError(ConsensusError, ArithmeticError):
    exit_code = 2


# dataset
class EmptyFile(ValidationError):
    pass


class MissingHeader(ValidationError):
    pass


class RaggedRow(ValidationError):
    pass


class NonNumericCell(ValidationError):
    def __init__(self, row: int, col: int, value: str):
        self.row, self.col, self.value = row, col, value
        super().__init__(f"non-numeric or non-finite cell {value!r} at row {row}, column {col}")


class DuplicateSampleId(ValidationError):
    pass


class InvalidSpec(ValidationError):
    pass


# shared shape checks
class LengthMismatch(ValidationError):
    pass


class DimMismatch(ValidationError):
    pass


class KTooLarge(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


# lle / spectral
class SingularLocalGram(NumericError):
    pass


class EigenFailure(NumericError):
    pass


class IsolatedNode(ValidationError):
    pass


# metrics
class SingleCluster(ValidationError):
    pass


class TooFewSamples(ValidationError):
    pass


# ensemble / consensus
class EmptyEnsemble(NumericError):
    pass


class EmptyPartitionSet(ValidationError):
    pass


class AllCandidatesDegenerate(NumericError):
    pass


# pipeline
class ConfigInvalid(ValidationError):
    pass


class StageError(ConsensusError):
    """Wraps an error raised inside a pipeline stage, keeping its exit code."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 2)
        super().__init__(f"stage '{stage}' failed: {cause}")
