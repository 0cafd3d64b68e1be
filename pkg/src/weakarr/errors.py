"""Exception hierarchy shared across the solver."""

from __future__ import annotations


class WeakarrError(Exception):
    """Base class for all errors raised by this package."""


class SortError(WeakarrError):
    """Ill-sorted term construction; the message names the offending position."""


class ParseError(WeakarrError):
    """Syntax error in an SMT-LIB input, carrying a source position."""

    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class UnsupportedError(WeakarrError):
    """Input uses a construct outside the supported fragment."""


class PreconditionError(WeakarrError):
    """An operation was called outside its contract."""


class OracleLimitError(WeakarrError):
    """A brute-force oracle query exceeds the size caps it is sound for."""


class InternalSolverError(WeakarrError):
    """The solver detected an inconsistency in its own state; never masked."""
