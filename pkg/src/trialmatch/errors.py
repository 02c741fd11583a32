"""Exception types shared across the engine."""


class TrialMatchError(Exception):
    """Base class for engine errors."""


class CorpusParseError(TrialMatchError):
    """A record file line failed to parse or validate."""

    def __init__(self, path: str, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class ConflictError(TrialMatchError):
    """Duplicate primary key."""


class TransportError(TrialMatchError):
    """Network failure talking to a remote service."""


class TrialNotFoundError(TrialMatchError):
    """Registry has no trial with the requested id."""


class ExtractionError(TrialMatchError):
    """Space-list response stayed unparseable after retry."""

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text


class DecisionParseError(TrialMatchError):
    """No decision token found in a check response after retry."""

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text


class SummarizationError(TrialMatchError):
    """Summarization produced an unusable response."""


class OrganVocabularyError(TrialMatchError):
    """Organ response is outside the closed vocabulary."""

    def __init__(self, raw_text: str):
        super().__init__(f"organ response not in vocabulary: {raw_text!r}")
        self.raw_text = raw_text


class EmptyRecordError(TrialMatchError):
    """Condensing retained nothing; caller decides what to do."""


class CheckerError(TrialMatchError):
    """Pair checker failed mid-match; .partial holds unchecked candidates."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial if partial is not None else []


class ContractViolationError(TrialMatchError):
    """A provider or index item broke its declared contract."""


class LeakageError(TrialMatchError):
    """A training artifact references a patient outside the training split."""


class UndefinedMetricError(TrialMatchError):
    """Metric is undefined for the given inputs (e.g. single-class AUROC)."""


class IndexNotLoadedError(TrialMatchError):
    """Service asked to match before an index snapshot was loaded."""
