"""Exception hierarchy.

Everything raised on purpose by the library derives from :class:`CmcfolError`,
which lets the command line map library failures to exit code 1 and leave
usage errors to exit code 2.
"""


class CmcfolError(Exception):
    """Base class for all library errors."""


class ParseError(CmcfolError, ValueError):
    """Syntax error in an expression, with the byte offset of the failure."""

    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = tuple(expected)
        detail = f"{message} at offset {offset}"
        if self.expected:
            detail += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(detail)


class DomainError(CmcfolError, ValueError):
    """A point lies outside the real domain of an expression or a chart."""


class NotPositiveDefiniteError(CmcfolError, ValueError):
    pass


class DegenerateSliceError(CmcfolError, ValueError):
    """|df|_g fell below the slice threshold, so f is not a slice function there."""


class FlowLineError(CmcfolError, RuntimeError):
    pass


class SeriesError(CmcfolError, ValueError):
    """Domain or order violation in truncated power-series arithmetic."""


class NotAsymptoticallyHyperbolicError(CmcfolError, ValueError):
    pass


class PreconditionError(CmcfolError, ValueError):
    pass
