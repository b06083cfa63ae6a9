"""Exception hierarchy shared across the toolkit."""


class KcpmError(Exception):
    """Base class for all toolkit errors."""


class ParseError(KcpmError):
    """Malformed input data (XML, CSV, TSV). Carries position info in the message."""


class ConfigError(KcpmError):
    """Invalid configuration: bad mapping, out-of-range threshold, unknown key."""


class DataError(KcpmError):
    """Input data violates an operation's precondition (empty log, unknown activity, ...)."""
