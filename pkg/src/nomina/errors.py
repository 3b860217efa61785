"""Exception hierarchy.

Input problems (malformed files, duplicate keys) derive from ``InputError``
and map to CLI exit code 2; configuration problems derive from
``ConfigError`` and map to exit code 3.
"""

from __future__ import annotations


class NominaError(Exception):
    """Base class for all engine errors."""


class InputError(NominaError):
    def __init__(self, message: str, source: str | None = None, line: int | None = None):
        self.source = source
        self.line = line
        where = ""
        if source is not None:
            where = f"{source}:{line}: " if line is not None else f"{source}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(f"{where}{message}")


class FormatError(InputError):
    pass


class MissingField(FormatError):
    pass


class DuplicatePubId(FormatError):
    pass


class DuplicateIdentityYear(FormatError):
    pass


class ConflictingRule(FormatError):
    pass


class ConfigError(NominaError):
    pass


class DomainError(ConfigError, ValueError):
    """Parameters outside the domain of a formula."""


class MissingSnapshot(NominaError):
    def __init__(self, year: int):
        self.year = year
        super().__init__(f"registry has no snapshot for year {year}")


class NormalizationError(NominaError, ValueError):
    pass


class EmptyToken(NormalizationError):
    pass


class NoInitials(NormalizationError):
    pass


class StatusTransitionError(NominaError, RuntimeError):
    pass
