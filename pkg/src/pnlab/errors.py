"""Exceptions raised by the message-passing kernels."""


class MessageError(ValueError):
    """Base class for malformed or inconsistent messages."""

    code = "MESSAGE_ERROR"


class NegativePrecisionError(MessageError):
    code = "NEGATIVE_PRECISION"


class SingularBeliefError(MessageError):
    code = "SINGULAR_BELIEF"

    def __init__(self, msg, index=None):
        super().__init__(msg if index is None else f"{msg} (index {index})")
        self.index = index


class DegeneratePriorError(MessageError):
    code = "DEGENERATE_PRIOR"


class AllVacuousError(MessageError):
    """Raised when a phase belief has no informative message at some index."""

    code = "ALL_VACUOUS"

    def __init__(self, index):
        super().__init__(f"all messages vacuous at index {index}")
        self.index = index
