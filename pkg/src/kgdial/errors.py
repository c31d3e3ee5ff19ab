"""Exception types shared across the toolkit."""


class KgdError(Exception):
    """Base class for all toolkit errors."""


class ParseError(KgdError):
    pass


class EmptyStore(KgdError):
    pass


class LengthMismatch(KgdError):
    pass


class DanglingReference(KgdError):
    pass


class ExhaustedPools(KgdError):
    """Raised when no category can supply another negative (indicates a bug while n > k)."""


class DivergedError(KgdError):
    pass


class SingleClassError(KgdError):
    pass


class NoPositives(KgdError):
    pass


class VocabMismatch(KgdError):
    pass


class NotKnowledgeSeeking(KgdError):
    pass


class NoTemplates(KgdError):
    pass


class EmptyReference(KgdError):
    pass
