"""Fuel-limited tree-walking evaluator.

Every evaluated node costs one unit of fuel; builtins add a surcharge
proportional to the pixels or vertices they touch. Programs cannot loop
or recurse, and the fuel bound also caps call-graph fan-out.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

from ..imaging import Frame
from .builtins import REGISTRY, recall
from .errors import (
    DivisionByZero, EvalError, FuelExhausted, MissingReturn, RangeError,
    RuntimeTypeError, UnboundVariable,
)
from .syntax import (
    Binary, Bool, Call, Expr, If, Int, Kind, Let, Pos, Program, Real, Recall,
    Return, Store, Str, Unary, Var,
)
from .values import Detection, type_name

DEFAULT_FUEL = 1_000_000
INT_LIMIT = 2 ** 63


@dataclass
class EvalContext:
    frame: Frame
    initial: Frame
    store: dict[str, Any] = field(default_factory=dict)
    fuel: int = DEFAULT_FUEL


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _checked(v, pos: Pos):
    if isinstance(v, int):
        if abs(v) >= INT_LIMIT:
            raise RangeError("integer overflow", pos)
    elif not math.isfinite(v):
        raise RangeError("non-finite real", pos)
    return v


class _Interpreter:
    def __init__(self, program: Program, ctx: EvalContext):
        self.funcs = {f.name: f for f in program.functions}
        self.ctx = ctx

    def charge(self, n: int, pos: Pos) -> None:
        if self.ctx.fuel < n:
            self.ctx.fuel = 0
            raise FuelExhausted("fuel exhausted", pos)
        self.ctx.fuel -= n

    def call_user(self, name: str, pos: Pos):
        f = self.funcs[name]
        scope: dict[str, Any] = {}
        done, value = self.block(f.body, scope)
        if not done:
            raise MissingReturn(f"{name}() ended without return", pos)
        return value

    def block(self, body, scope) -> tuple[bool, Any]:
        for s in body:
            self.charge(1, s.pos)
            if isinstance(s, Let):
                scope[s.name] = self.expr(s.value, scope)
            elif isinstance(s, Store):
                self.ctx.store[s.key] = self.expr(s.value, scope)
            elif isinstance(s, Return):
                return True, self.expr(s.value, scope)
            elif isinstance(s, If):
                cond = self.expr(s.cond, scope)
                if not isinstance(cond, bool):
                    raise RuntimeTypeError(f"if condition must be bool, got {type_name(cond)}", s.cond.pos)
                branch = s.then if cond else (s.orelse or ())
                done, value = self.block(branch, scope)
                if done:
                    return True, value
        return False, None

    def expr(self, e: Expr, scope):
        self.charge(1, e.pos)
        if isinstance(e, (Int, Real, Str, Bool)):
            return e.value
        if isinstance(e, Var):
            try:
                return scope[e.name]
            except KeyError:
                raise UnboundVariable(f"variable {e.name!r} is not defined", e.pos) from None
        if isinstance(e, Recall):
            try:
                return recall(self.ctx, e.key)
            except EvalError as err:
                raise err.at(e.pos)
        if isinstance(e, Call):
            if e.name in self.funcs:
                return self.call_user(e.name, e.pos)
            b = REGISTRY[e.name]
            args = tuple(self.expr(a, scope) for a in e.args)
            try:
                self.charge(b.cost(args), e.pos)
                out = b.fn(self.ctx, *args)
            except EvalError as err:
                raise err.at(e.pos)
            return _checked(out, e.pos) if _is_num(out) else out
        if isinstance(e, Unary):
            v = self.expr(e.operand, scope)
            if e.op == "not":
                if not isinstance(v, bool):
                    raise RuntimeTypeError(f"'not' needs bool, got {type_name(v)}", e.pos)
                return not v
            if not _is_num(v):
                raise RuntimeTypeError(f"'-' needs a number, got {type_name(v)}", e.pos)
            return -v
        if isinstance(e, Binary):
            return self.binary(e, scope)
        raise TypeError(f"unknown node {e!r}")

    def binary(self, e: Binary, scope):
        op = e.op
        if op in ("and", "or"):
            left = self.expr(e.left, scope)
            if not isinstance(left, bool):
                raise RuntimeTypeError(f"'{op}' needs bool, got {type_name(left)}", e.left.pos)
            if (op == "and" and not left) or (op == "or" and left):
                return left
            right = self.expr(e.right, scope)
            if not isinstance(right, bool):
                raise RuntimeTypeError(f"'{op}' needs bool, got {type_name(right)}", e.right.pos)
            return right
        a = self.expr(e.left, scope)
        b = self.expr(e.right, scope)
        if op in ("==", "!="):
            if _is_num(a) and _is_num(b):
                eq = a == b
            elif type_name(a) == type_name(b):
                eq = a == b
            else:
                raise RuntimeTypeError(f"cannot compare {type_name(a)} with {type_name(b)}", e.pos)
            return eq if op == "==" else not eq
        if not (_is_num(a) and _is_num(b)):
            raise RuntimeTypeError(f"'{op}' needs numbers, got {type_name(a)} and {type_name(b)}", e.pos)
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        if op == ">=":
            return a >= b
        if op == "+":
            return _checked(a + b, e.pos)
        if op == "-":
            return _checked(a - b, e.pos)
        if op == "*":
            return _checked(a * b, e.pos)
        if op == "/":
            if b == 0:
                raise DivisionByZero("division by zero", e.pos)
            return _checked(a / b, e.pos)
        raise TypeError(f"unknown operator {op}")


def evaluate(program: Program, ctx: EvalContext):
    """Run the entry function and check its result against the program kind."""
    interp = _Interpreter(program, ctx)
    entry = program.entry
    value = interp.call_user(entry.name, entry.pos)
    if program.kind is Kind.IDENTIFY and not isinstance(value, Detection):
        raise RuntimeTypeError(f"identify() must return a detection, got {type_name(value)}", entry.pos)
    if program.kind is Kind.CHECK and not isinstance(value, bool):
        raise RuntimeTypeError(f"check() must return bool, got {type_name(value)}", entry.pos)
    if program.kind is Kind.REWARD:
        if not _is_num(value):
            raise RuntimeTypeError(f"reward() must return a number, got {type_name(value)}", entry.pos)
        value = float(value)
    return value


def _require(program: Program, kind: Kind) -> None:
    if program.kind is not kind:
        raise RuntimeTypeError(f"expected a {kind.value} program, got {program.kind.value}")


def eval_identify(program: Program, ctx: EvalContext) -> Detection:
    _require(program, Kind.IDENTIFY)
    return evaluate(program, ctx)


def eval_check(program: Program, ctx: EvalContext) -> bool:
    _require(program, Kind.CHECK)
    return evaluate(program, ctx)


def eval_reward(program: Program, ctx: EvalContext) -> float:
    _require(program, Kind.REWARD)
    return evaluate(program, ctx)


@dataclass(frozen=True)
class _Memo:
    value: Any
    error: EvalError | None
    store_after: tuple
    fuel_used: int


class CachedEvaluator:
    """Memoizes evaluations on (program, frame, initial frame, store contents).

    Results, store writes, fuel consumption and errors all replay exactly,
    because evaluation is a pure function of those inputs.
    """

    def __init__(self, maxsize: int = 200_000):
        self.maxsize = maxsize
        self._memo: dict[tuple, _Memo] = {}
        self._programs: dict[int, Program] = {}
        self.hits = 0
        self.misses = 0

    def evaluate(self, program: Program, ctx: EvalContext):
        self._programs.setdefault(id(program), program)
        key = (id(program), ctx.frame.digest, ctx.initial.digest, tuple(sorted(ctx.store.items())))
        memo = self._memo.get(key)
        if memo is not None and memo.fuel_used <= ctx.fuel:
            self.hits += 1
            ctx.store.clear()
            ctx.store.update(memo.store_after)
            ctx.fuel -= memo.fuel_used
            if memo.error is not None:
                raise type(memo.error)(memo.error.message, memo.error.pos)
            return memo.value
        self.misses += 1
        start = ctx.fuel
        try:
            value, error = evaluate(program, ctx), None
        except EvalError as err:
            value, error = None, err
        if len(self._memo) >= self.maxsize:
            self._memo.clear()
        if not isinstance(error, FuelExhausted):
            self._memo[key] = _Memo(value, error, tuple(ctx.store.items()), start - ctx.fuel)
        if error is not None:
            raise error
        return value
