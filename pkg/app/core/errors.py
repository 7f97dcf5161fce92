from __future__ import annotations


class SemError(Exception):
    """Base class for every error raised by the framework."""


class EmptyEpisode(SemError, ValueError):
    pass


class NotReady(SemError, RuntimeError):
    """The replay buffer holds fewer episodes than the requested batch."""


class InvalidAction(SemError, ValueError):
    pass


class EpisodeOver(SemError, RuntimeError):
    pass


class OracleInfeasible(SemError, RuntimeError):
    pass


class ShapeError(SemError, ValueError):
    pass


class CacheError(SemError, RuntimeError):
    """A backward pass was given a cache that does not match the parameters."""


class NumericsError(SemError, RuntimeError):
    pass


class ConfigError(SemError, ValueError):
    def __init__(self, message: str, field: str | None = None, line: int | None = None) -> None:
        self.message = message
        self.field = field
        self.line = line
        where = ""
        if field:
            where += f"{field}: "
        if line is not None:
            where = f"line {line}: " + where
        super().__init__(where + message)
