class DimensionError(ValueError):
    """Array sizes are inconsistent with the system configuration."""


class ConfigError(ValueError):
    """Invalid parameter combination in a configuration object or file."""


class ScenarioParseError(ConfigError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}".strip() if where else message)
