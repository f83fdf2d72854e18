"""Exception hierarchy shared by all locfit modules."""


class LocfitError(Exception):
    """Base class for all locfit errors."""


class ParseError(LocfitError):
    """A data file line could not be parsed (message names the line)."""


class SchemaError(LocfitError):
    """A file or artifact violates its declared layout."""


class ChecksumError(SchemaError):
    """A persisted blob does not match its recorded digest."""


class DomainError(LocfitError, ValueError):
    """An argument lies outside the operation's domain."""


class NumericError(LocfitError, ArithmeticError):
    """A computation produced non-finite values."""


class ConfigError(LocfitError):
    """Configuration values are inconsistent or out of range."""
