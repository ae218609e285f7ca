from __future__ import annotations

from .syntax import NOPOS, Pos


class RewardLangError(Exception):
    pass


class ParseError(RewardLangError):
    """Syntax or static-validation failure at a 1-based line/column."""

    def __init__(self, message: str, pos: Pos, expected: tuple[str, ...] = ()):
        self.message = message
        self.pos = pos
        self.expected = tuple(expected)
        detail = f"; expected {', '.join(self.expected)}" if self.expected else ""
        super().__init__(f"{pos.line}:{pos.col}: {message}{detail}")

    @property
    def line(self) -> int:
        return self.pos.line

    @property
    def col(self) -> int:
        return self.pos.col


class WrongEntrypoint(ParseError):
    pass


class EvalError(RewardLangError):
    """Runtime failure; ``pos`` is the AST node being evaluated."""

    def __init__(self, message: str, pos: Pos = NOPOS):
        self.message = message
        self.pos = pos
        super().__init__(f"{pos.line}:{pos.col}: {message}" if pos != NOPOS else message)

    def at(self, pos: Pos) -> "EvalError":
        if self.pos == NOPOS:
            self.pos = pos
            self.args = (f"{pos.line}:{pos.col}: {self.message}",)
        return self


class FuelExhausted(EvalError):
    pass


class RuntimeTypeError(EvalError):
    pass


class MissingStoreKey(EvalError):
    pass


class DivisionByZero(EvalError):
    pass


class RangeError(EvalError):
    pass


class MissingReturn(EvalError):
    pass


class UnboundVariable(EvalError):
    pass


class DegenerateGeometry(EvalError):
    pass
