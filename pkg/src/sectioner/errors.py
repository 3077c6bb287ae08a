"""Exception and warning types shared across the toolkit."""


class SectionerError(Exception):
    """Base class for every error this package raises deliberately."""


class MalformedHeader(SectionerError):
    """PE header rejected; ``check`` names the test that failed."""

    def __init__(self, check: str):
        super().__init__(f"malformed PE header: {check}")
        self.check = check


class TooManySections(SectionerError):
    """NumberOfSections above the loader cap; hostile input."""

    def __init__(self, count: int, cap: int):
        super().__init__(f"section count {count} exceeds loader cap {cap}")
        self.count = count
        self.cap = cap


class EmptySection(SectionerError):
    """A zero-length byte sequence cannot be imaged."""


class ShapeMismatch(SectionerError):
    """Input tensor shape incompatible with the network."""


class NumericalInstability(SectionerError):
    """NaN or Inf detected where finite values are required."""


class OobUnavailable(SectionerError):
    """Out-of-bag importance requested from a model without OOB sets."""


class DimensionMismatch(SectionerError):
    """Score vector length does not match the fitted model."""


class ConflictingLabel(SectionerError):
    """Same file content listed under both labels."""

    def __init__(self, sha256: str):
        super().__init__(f"conflicting labels for sha256 {sha256}")
        self.sha256 = sha256


class EmptySplit(SectionerError):
    """A split (or sub-split) received zero files."""


class MissingBundle(SectionerError):
    """A per-section model bundle required for fusion is absent."""

    def __init__(self, section: str, detail: str = "bundle not found"):
        super().__init__(f"section {section}: {detail}")
        self.section = section


class IntegrityError(SectionerError):
    """A persisted artifact fails its integrity check."""

    def __init__(self, artifact: str, detail: str):
        super().__init__(f"{artifact}: {detail}")
        self.artifact = artifact


class StageError(SectionerError):
    """Pipeline stage failure, tagged with the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


class DegenerateLabels(UserWarning):
    """A split contains a single class; training proceeds anyway."""


class UnreadableFileWarning(UserWarning):
    """A corpus file could not be read and was skipped."""
