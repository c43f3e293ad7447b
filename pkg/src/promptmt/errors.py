"""Exception types shared across the package."""


class PromptMtError(Exception):
    """Base class for all package-specific errors."""


class PoolParseError(PromptMtError):
    """A pool/corpus file failed to parse; carries the 1-based line number."""

    def __init__(self, path, line_no: int, reason: str):
        self.path = str(path)
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"{self.path}:{line_no}: {reason}")


class EmptyPoolError(PromptMtError):
    """A pool file contained no records."""


class ConfigError(PromptMtError):
    """Invalid or incomplete configuration (missing language names, bad fields)."""


class TransportError(PromptMtError):
    """Backend unreachable after retrying; carries the attempt count."""

    def __init__(self, message: str, attempts: int):
        self.attempts = attempts
        super().__init__(f"{message} (after {attempts} attempts)")


class ContextOverflowError(PromptMtError):
    """Text exceeds the backend's context window."""


class ProtocolError(PromptMtError):
    """A backend or scorer violated its wire contract (bad shape, dimension drift)."""


class DegradedScorerError(PromptMtError):
    """Scorer sidecar unavailable; dependent features must be marked missing."""


class MockMissError(PromptMtError):
    """A strict mock received an input absent from its response table."""


class UndefinedSimilarityError(PromptMtError):
    """Cosine similarity is undefined because a vector has zero norm."""


class UndefinedCorrelationError(PromptMtError):
    """Rank correlation is undefined because one variable has zero rank variance."""


class SelectionError(PromptMtError):
    """Demonstration selection cannot satisfy its size or coverage requirements."""


class AugmentationError(PromptMtError):
    """Pseudo-parallel construction ran out of usable monolingual examples."""

    def __init__(self, message: str, dropped: int):
        self.dropped = dropped
        super().__init__(f"{message} ({dropped} generations dropped)")
