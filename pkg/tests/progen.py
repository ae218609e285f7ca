"""Random reward-program ASTs for round-trip and sandbox fuzzing."""
from __future__ import annotations

import numpy as np

from codereward.rewardlang import REGISTRY, Kind, Program
from codereward.rewardlang.syntax import (
    Binary, Bool, Call, FuncDef, If, Int, Let, Real, Recall, Return, Store, Str, Unary, Var,
)

# weighted towards colours a DoorKey frame actually contains
COLORS = ("red", "green", "yellow", "grey", "red", "yellow", "black", "purple")
KEYS = ("a", "b", "d0")
VARS = ("x", "y", "z")
OPS = ("+", "-", "*", "/", "<", "<=", ">", ">=", "==", "!=", "and", "or")
BUILTINS = sorted(REGISTRY)

# result type -> builtins producing it, with argument types
TYPED = {
    "img": [("frame", ()), ("initial", ())],
    "mask": [("mask", ("img", "color"))],
    "cs": [("contours", ("mask",)), ("contours", ("mask",)), ("contours", ("mask",)), ("filter_area", ("cs", "num", "num")),
           ("filter_vertices", ("cs", "num", "num", "num")), ("hull", ("cs",)), ("approx", ("cs", "num"))],
    "c": [("largest", ("cs",)), ("nth", ("cs", "idx")), ("hull", ("c",)), ("approx", ("c", "num"))],
    "num": [("area", ("c",)), ("perimeter", ("c",)), ("vertices", ("c",)), ("count", ("cs",)),
            ("count", ("mask",)), ("dist", ("pt", "pt")), ("x", ("pt",)), ("y", ("pt",)),
            ("width", ("rect",)), ("height", ("c",)), ("abs", ("num",)), ("min", ("num", "num")),
            ("max", ("num", "num")), ("clamp", ("num", "num", "num")), ("sqrt", ("num",))],
    "pt": [("centroid", ("c",)), ("point", ("num", "num")), ("corner", ("rect", "idx")),
           ("nth", ("det", "idx"))],
    "rect": [("bbox", ("c",))],
    "bool": [("contains", ("c", "pt")), ("contains", ("rect", "pt")), ("found", ("det",)),
             ("has", ("key",))],
    "det": [("detection", ("cs",)), ("detection", ("c",)), ("detection", ("pt",))],
}
RETURNS = {Kind.IDENTIFY: "det", Kind.CHECK: "bool", Kind.REWARD: "num"}


class ProgramGen:
    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)

    def pick(self, xs):
        return xs[int(self.rng.integers(len(xs)))]

    def typed(self, want: str, depth: int):
        """A well-typed expression; runtime errors can still come from values."""
        if want == "color":
            return Str(self.pick(COLORS))
        if want == "key":
            return Str(self.pick(KEYS))
        if want == "idx":
            return Int(int(self.rng.integers(0, 3)))
        if want == "num" and (depth <= 0 or self.rng.random() < 0.3):
            if self.rng.random() < 0.5:
                return Int(int(self.rng.integers(0, 50)))
            return Real(float(np.round(self.rng.uniform(0, 10), 3)))
        if want == "bool" and self.rng.random() < 0.3:
            a, b = self.typed("num", depth - 1), self.typed("num", depth - 1)
            return Binary(self.pick(("<", "<=", ">", ">=", "==", "!=")), a, b)
        if want == "num" and self.rng.random() < 0.2:
            op = self.pick(("+", "-", "*", "/"))
            return Binary(op, self.typed("num", depth - 1), self.typed("num", depth - 1))
        options = TYPED[want]
        if depth <= 0:
            options = [o for o in options if all(t in ("img", "color", "key", "num") for t in o[1])] or options
        name, args = self.pick(options)
        return Call(name, tuple(self.typed(t, depth - 1) for t in args))

    def expr(self, depth: int, helpers: tuple[str, ...] = ()):
        if self.rng.random() < 0.7:
            return self.typed(self.pick(list(TYPED)), min(depth, 2))
        r = self.rng.random()
        if depth <= 0 or r < 0.25:
            leaf = int(self.rng.integers(6))
            if leaf == 0:
                return Int(int(self.rng.integers(0, 50)))
            if leaf == 1:
                return Real(float(np.round(self.rng.uniform(0, 10), 3)))
            if leaf == 2:
                return Str(self.pick(COLORS))
            if leaf == 3:
                return Bool(bool(self.rng.integers(2)))
            if leaf == 4:
                return Var(self.pick(VARS))
            return Recall(self.pick(KEYS))
        if r < 0.6:
            if helpers and self.rng.random() < 0.1:
                return Call(self.pick(helpers))
            b = REGISTRY[self.pick(BUILTINS)]
            n = int(self.rng.integers(b.min_args, b.max_args + 1))
            return Call(b.name, tuple(self.expr(depth - 1, helpers) for _ in range(n)))
        if r < 0.7:
            return Unary(self.pick(("-", "not")), self.expr(depth - 1, helpers))
        return Binary(self.pick(OPS), self.expr(depth - 1, helpers), self.expr(depth - 1, helpers))

    def stmts(self, depth: int, helpers: tuple[str, ...], n: int, bind: bool = False,
               ret: str | None = None) -> tuple:
        out = []
        if bind:
            # bind most variables up front so evaluation gets past name lookup
            out += [Let(v, self.expr(1, helpers)) for v in VARS if self.rng.random() < 0.8]
        for _ in range(n):
            r = self.rng.random()
            if r < 0.35:
                out.append(Let(self.pick(VARS), self.expr(depth, helpers)))
            elif r < 0.55:
                out.append(Store(self.pick(KEYS), self.expr(depth, helpers)))
            elif r < 0.8 and depth > 0:
                then = self.stmts(depth - 1, helpers, int(self.rng.integers(1, 3)))
                orelse = None
                if self.rng.random() < 0.5:
                    orelse = self.stmts(depth - 1, helpers, int(self.rng.integers(1, 3)))
                out.append(If(self.expr(depth, helpers), then, orelse))
            else:
                out.append(Return(self.expr(depth, helpers)))
        out.append(Return(self.typed(ret, 3) if ret else self.expr(depth, helpers)))
        return tuple(out)

    def program(self, depth: int = 2) -> Program:
        kind = self.pick(list(Kind))
        n_helpers = int(self.rng.integers(0, 3))
        funcs = []
        for i in range(n_helpers):
            # helpers may only call earlier helpers, so the call graph stays acyclic
            earlier = tuple(f"h{j}" for j in range(i))
            funcs.append(FuncDef(f"h{i}", self.stmts(depth - 1, earlier, int(self.rng.integers(0, 3)), bind=True)))
        helpers = tuple(f.name for f in funcs)
        funcs.append(FuncDef(kind.value, self.stmts(depth, helpers, int(self.rng.integers(0, 4)), bind=True,
                                                      ret=RETURNS[kind])))
        return Program(kind, tuple(funcs))
