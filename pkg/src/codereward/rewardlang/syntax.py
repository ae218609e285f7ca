"""Abstract syntax for reward programs.

Node positions are carried for diagnostics but excluded from equality, so
two programs compare equal iff their structure and literals match.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Union


@dataclass(frozen=True)
class Pos:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


NOPOS = Pos(0, 0)


class Kind(str, enum.Enum):
    IDENTIFY = "identify"
    CHECK = "check"
    REWARD = "reward"


@dataclass(frozen=True)
class Node:
    pos: Pos = field(default=NOPOS, compare=False, repr=False, kw_only=True)


# -- expressions -------------------------------------------------------------

@dataclass(frozen=True)
class Int(Node):
    value: int


@dataclass(frozen=True)
class Real(Node):
    value: float


@dataclass(frozen=True)
class Str(Node):
    value: str


@dataclass(frozen=True)
class Bool(Node):
    value: bool


@dataclass(frozen=True)
class Var(Node):
    name: str


@dataclass(frozen=True)
class Call(Node):
    name: str
    args: tuple = ()


@dataclass(frozen=True)
class Recall(Node):
    key: str


@dataclass(frozen=True)
class Unary(Node):
    op: str  # "-" or "not"
    operand: "Expr"


@dataclass(frozen=True)
class Binary(Node):
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Int, Real, Str, Bool, Var, Call, Recall, Unary, Binary]


# -- statements --------------------------------------------------------------

@dataclass(frozen=True)
class Let(Node):
    name: str
    value: Expr


@dataclass(frozen=True)
class Store(Node):
    key: str
    value: Expr


@dataclass(frozen=True)
class If(Node):
    cond: Expr
    then: tuple
    orelse: tuple | None = None


@dataclass(frozen=True)
class Return(Node):
    value: Expr


Stmt = Union[Let, Store, If, Return]


@dataclass(frozen=True)
class FuncDef(Node):
    name: str
    body: tuple


@dataclass(frozen=True)
class Program:
    kind: Kind
    functions: tuple[FuncDef, ...]
    source: str = field(default="", compare=False, repr=False)

    @property
    def entry(self) -> FuncDef:
        return self.function(self.kind.value)

    def function(self, name: str) -> FuncDef:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)


# operator precedence, loosest first; shared by parser and formatter
PREC_OR, PREC_AND, PREC_NOT, PREC_CMP, PREC_ADD, PREC_MUL, PREC_NEG, PREC_ATOM = range(1, 9)

BINARY_PREC = {
    "or": PREC_OR, "and": PREC_AND,
    "<": PREC_CMP, "<=": PREC_CMP, ">": PREC_CMP, ">=": PREC_CMP, "==": PREC_CMP, "!=": PREC_CMP,
    "+": PREC_ADD, "-": PREC_ADD, "*": PREC_MUL, "/": PREC_MUL,
}


def precedence(e: Expr) -> int:
    if isinstance(e, Binary):
        return BINARY_PREC[e.op]
    if isinstance(e, Unary):
        return PREC_NOT if e.op == "not" else PREC_NEG
    return PREC_ATOM
