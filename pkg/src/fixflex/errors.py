class FixflexError(Exception):
    pass


class ParseError(FixflexError):
    """Malformed input row. Message carries file name and line number."""

    def __init__(self, path, line, msg):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {msg}")


class ValidationError(FixflexError):
    pass


class ConfigError(FixflexError):
    pass


class NoViableModeError(FixflexError):
    pass
