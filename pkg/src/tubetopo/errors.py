"""Exception types shared across modules; the CLI maps them to exit codes."""


class ConfigError(ValueError):
    """Bad configuration or flag value."""


class DataError(ValueError):
    """Input data violates a schema or invariant."""

    def __init__(self, message: str, *, line: int | None = None, path: str | None = None):
        self.reason = message
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class MaskFormatError(DataError):
    """Image is not a usable 8-bit grayscale mask."""


class TemplateError(ValueError):
    """Prompt template refers to an unknown placeholder."""
