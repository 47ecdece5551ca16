"""Exception types raised across pamkit."""


class PamError(Exception):
    """Base class for all pamkit errors."""


class ParseError(PamError, ValueError):
    def __init__(self, message: str, path=None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class VocabularyError(PamError, LookupError):
    """A name is missing from a fixed (reused) vocabulary."""

    def __init__(self, token: str, kind: str = "token"):
        super().__init__(f"unknown {kind} {token!r}")
        self.token = token

    def __str__(self) -> str:  # LookupError would repr() the message
        return self.args[0]


class ConsistencyError(PamError, ValueError):
    pass


class MappingError(PamError, ValueError):
    pass


class ResourceError(PamError, MemoryError):
    pass


class StratificationError(PamError, ValueError):
    pass


class NormalizationError(PamError, ValueError):
    pass
