"""
Exception hierarchy shared by every qzk-lab module.
"""

from __future__ import annotations

from typing import Any


class QzkError(RuntimeError):
    pass


class DimensionError(QzkError):
    pass


class ImpossibleBranch(QzkError):
    pass


class PostprocessError(QzkError):
    pass


class NonTermination(QzkError):
    pass


class InvalidEffect(QzkError):
    pass


class BudgetExceeded(QzkError):
    pass


class BasisNotOrthonormal(QzkError):
    pass


class ConfigError(QzkError):
    pass


class FormatError(QzkError):
    pass


class FrameError(FormatError):
    pass


class ProtocolError(QzkError):
    def __init__(self, message: str, round_index: int | None = None) -> None:
        self.round_index = round_index
        prefix = f"round {round_index}: " if round_index is not None else ""
        super().__init__(f"{prefix}{message}")


class SessionAborted(QzkError):
    def __init__(self, message: str, partial: Any = None) -> None:
        # partial is the Transcript collected before the failure
        self.partial = partial
        super().__init__(message)


class IterationBudgetExceeded(QzkError):
    def __init__(self, message: str, iterations: int = 0) -> None:
        self.iterations = iterations
        super().__init__(message)


class ModeError(QzkError):
    pass


class StatError(QzkError):
    pass
