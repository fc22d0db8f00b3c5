"""Exception hierarchy shared by all modules.

Everything derives from :class:`BertrandLabError` so the CLI can map domain
failures to exit code 1 with a single ``except`` clause.
"""


class BertrandLabError(Exception):
    pass


class DomainError(BertrandLabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class InvalidIntervalError(DomainError):
    pass


class InvalidFunctionError(DomainError):
    pass


class InvalidSurfaceError(DomainError):
    pass


class PreconditionError(BertrandLabError, ValueError):
    pass


class UnboundedOrbitError(BertrandLabError):
    """No turning point exists on one side of the seed before the boundary."""


class NoDomainError(DomainError):
    """The sublevel set ``{V < E}`` is empty."""


class ConfigError(BertrandLabError):
    """Malformed run configuration (CLI exit code 2)."""
