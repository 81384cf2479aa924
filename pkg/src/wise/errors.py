"""Exception hierarchy. The CLI maps these onto exit codes."""


class WiseError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(WiseError):
    """Invalid profile, scenario or resource specification.

    ``path`` names the offending field (``resources[2].range``) when known.
    """

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class ScenarioError(ConfigError):
    """A simulator scenario that cannot be generated consistently."""


class DataError(WiseError):
    """Malformed or out-of-range input data.

    ``line`` is the 1-based line (or record index) where the problem was found.
    """

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source is not None and line is not None:
            where = f"{source}:{line}: "
        elif line is not None:
            where = f"line {line}: "
        elif source is not None:
            where = f"{source}: "
        super().__init__(where + message)


class ScoringError(WiseError):
    """Readings that cannot be scored against the resolved specs."""


class ValidationSetupError(WiseError):
    """Validation inputs that make the comparison meaningless."""
