"""Lexer, recursive-descent parser and static validation for reward programs.

Grammar (``#`` starts a comment that runs to end of line)::

    program  := func+
    func     := "fn" IDENT "(" ")" block
    block    := "{" stmt* "}"
    stmt     := "let" IDENT "=" expr ";"
              | "store" STRING "=" expr ";"
              | "if" expr block ("else" (block | if_stmt))?
              | "return" expr ";"
    expr     := or
    or       := and ("or" and)*
    and      := not ("and" not)*
    not      := "not" not | cmp
    cmp      := add (("<" | "<=" | ">" | ">=" | "==" | "!=") add)?
    add      := mul (("+" | "-") mul)*
    mul      := neg (("*" | "/") neg)*
    neg      := "-" neg | atom
    atom     := INT | REAL | STRING | "true" | "false" | IDENT
              | IDENT "(" (expr ("," expr)*)? ")"
              | "recall" "(" STRING ")" | "(" expr ")"
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .builtins import REGISTRY
from .errors import ParseError, WrongEntrypoint
from .syntax import (
    Binary, Bool, Call, Expr, FuncDef, If, Int, Kind, Let, Pos, Program, Real,
    Recall, Return, Stmt, Store, Str, Unary, Var,
)

KEYWORDS = {"fn", "let", "store", "if", "else", "return", "true", "false", "and", "or", "not", "recall"}

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<real>\d+\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>")
  | (?P<op><=|>=|==|!=|[-+*/<>=(){};,])
""", re.VERBOSE)

_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}


@dataclass(frozen=True)
class Token:
    kind: str  # INT REAL STRING IDENT KEYWORD OP EOF
    text: str
    value: object
    pos: Pos


def tokenize(source: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(source)
    while i < n:
        m = _TOKEN.match(source, i)
        if not m:
            raise ParseError(f"unexpected character {source[i]!r}", Pos(line, col))
        kind = m.lastgroup
        text = m.group()
        pos = Pos(line, col)
        if kind == "nl":
            i, line, col = m.end(), line + 1, 1
            continue
        if kind == "string":
            j = i + 1
            chars = []
            while True:
                if j >= n or source[j] == "\n":
                    raise ParseError("unterminated string", pos, ('"',))
                ch = source[j]
                if ch == '"':
                    break
                if ch == "\\":
                    if j + 1 >= n or source[j + 1] not in _ESCAPES:
                        raise ParseError("bad escape in string", Pos(line, col + (j - i)))
                    chars.append(_ESCAPES[source[j + 1]])
                    j += 2
                    continue
                chars.append(ch)
                j += 1
            toks.append(Token("STRING", source[i:j + 1], "".join(chars), pos))
            col += j + 1 - i
            i = j + 1
            continue
        i = m.end()
        col += len(text)
        if kind in ("ws", "comment"):
            continue
        if kind == "int":
            toks.append(Token("INT", text, int(text), pos))
        elif kind == "real":
            v = float(text)
            if not math.isfinite(v):
                raise ParseError("real literal out of range", pos)
            toks.append(Token("REAL", text, v, pos))
        elif kind == "ident":
            toks.append(Token("KEYWORD" if text in KEYWORDS else "IDENT", text, text, pos))
        else:
            toks.append(Token("OP", text, text, pos))
    toks.append(Token("EOF", "", None, Pos(line, col)))
    return toks


_CMP = ("<", "<=", ">", ">=", "==", "!=")


class _Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def _is(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("OP", "KEYWORD") and t.text == text

    def _fail(self, expected: tuple[str, ...]):
        t = self.tok
        what = "end of input" if t.kind == "EOF" else repr(t.text)
        raise ParseError(f"unexpected {what}", t.pos, expected)

    def expect(self, text: str) -> Token:
        if not self._is(text):
            self._fail((repr(text),))
        t = self.tok
        self.i += 1
        return t

    def expect_kind(self, kind: str, label: str) -> Token:
        if self.tok.kind != kind:
            self._fail((label,))
        t = self.tok
        self.i += 1
        return t

    # -- declarations ---------------------------------------------------

    def program(self) -> list[FuncDef]:
        funcs = [self.func()]
        while self.tok.kind != "EOF":
            funcs.append(self.func())
        return funcs

    def func(self) -> FuncDef:
        start = self.expect("fn").pos
        name = self.expect_kind("IDENT", "function name").text
        self.expect("(")
        self.expect(")")
        return FuncDef(name, self.block(), pos=start)

    def block(self) -> tuple:
        self.expect("{")
        body = []
        while not self._is("}"):
            if self.tok.kind == "EOF":
                self._fail(("'}'",))
            body.append(self.stmt())
        self.expect("}")
        return tuple(body)

    def stmt(self) -> Stmt:
        t = self.tok
        if self._is("let"):
            self.i += 1
            name = self.expect_kind("IDENT", "variable name").text
            self.expect("=")
            value = self.expr()
            self.expect(";")
            return Let(name, value, pos=t.pos)
        if self._is("store"):
            self.i += 1
            key = self.expect_kind("STRING", "store key string").value
            self.expect("=")
            value = self.expr()
            self.expect(";")
            return Store(key, value, pos=t.pos)
        if self._is("if"):
            return self.if_stmt()
        if self._is("return"):
            self.i += 1
            value = self.expr()
            self.expect(";")
            return Return(value, pos=t.pos)
        self._fail(("'let'", "'store'", "'if'", "'return'", "'}'"))

    def if_stmt(self) -> If:
        start = self.expect("if").pos
        cond = self.expr()
        then = self.block()
        orelse = None
        if self._is("else"):
            self.i += 1
            orelse = (self.if_stmt(),) if self._is("if") else self.block()
        return If(cond, then, orelse, pos=start)

    # -- expressions ----------------------------------------------------

    def expr(self) -> Expr:
        return self.or_expr()

    def or_expr(self) -> Expr:
        left = self.and_expr()
        while self._is("or"):
            t = self.tok
            self.i += 1
            left = Binary("or", left, self.and_expr(), pos=t.pos)
        return left

    def and_expr(self) -> Expr:
        left = self.not_expr()
        while self._is("and"):
            t = self.tok
            self.i += 1
            left = Binary("and", left, self.not_expr(), pos=t.pos)
        return left

    def not_expr(self) -> Expr:
        if self._is("not"):
            t = self.tok
            self.i += 1
            return Unary("not", self.not_expr(), pos=t.pos)
        return self.cmp_expr()

    def cmp_expr(self) -> Expr:
        left = self.add_expr()
        if self.tok.kind == "OP" and self.tok.text in _CMP:
            t = self.tok
            self.i += 1
            left = Binary(t.text, left, self.add_expr(), pos=t.pos)
            if self.tok.kind == "OP" and self.tok.text in _CMP:
                raise ParseError("comparisons do not chain; add parentheses", self.tok.pos)
        return left

    def add_expr(self) -> Expr:
        left = self.mul_expr()
        while self.tok.kind == "OP" and self.tok.text in ("+", "-"):
            t = self.tok
            self.i += 1
            left = Binary(t.text, left, self.mul_expr(), pos=t.pos)
        return left

    def mul_expr(self) -> Expr:
        left = self.neg_expr()
        while self.tok.kind == "OP" and self.tok.text in ("*", "/"):
            t = self.tok
            self.i += 1
            left = Binary(t.text, left, self.neg_expr(), pos=t.pos)
        return left

    def neg_expr(self) -> Expr:
        if self._is("-"):
            t = self.tok
            self.i += 1
            return Unary("-", self.neg_expr(), pos=t.pos)
        return self.atom()

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "INT":
            self.i += 1
            return Int(t.value, pos=t.pos)
        if t.kind == "REAL":
            self.i += 1
            return Real(t.value, pos=t.pos)
        if t.kind == "STRING":
            self.i += 1
            return Str(t.value, pos=t.pos)
        if self._is("true") or self._is("false"):
            self.i += 1
            return Bool(t.text == "true", pos=t.pos)
        if self._is("recall"):
            self.i += 1
            self.expect("(")
            key = self.expect_kind("STRING", "store key string").value
            self.expect(")")
            return Recall(key, pos=t.pos)
        if self._is("("):
            self.i += 1
            inner = self.expr()
            self.expect(")")
            return inner
        if t.kind == "IDENT":
            self.i += 1
            if not self._is("("):
                return Var(t.text, pos=t.pos)
            self.i += 1
            args = []
            if not self._is(")"):
                args.append(self.expr())
                while self._is(","):
                    self.i += 1
                    args.append(self.expr())
            self.expect(")")
            return Call(t.text, tuple(args), pos=t.pos)
        self._fail(("number", "string", "'true'", "'false'", "identifier", "'recall'", "'('", "'-'", "'not'"))


# -- static validation ---------------------------------------------------------

def _walk_calls(node, out: list[Call]) -> None:
    if isinstance(node, Call):
        out.append(node)
        for a in node.args:
            _walk_calls(a, out)
    elif isinstance(node, Unary):
        _walk_calls(node.operand, out)
    elif isinstance(node, Binary):
        _walk_calls(node.left, out)
        _walk_calls(node.right, out)
    elif isinstance(node, (Let, Store, Return)):
        _walk_calls(node.value, out)
    elif isinstance(node, If):
        _walk_calls(node.cond, out)
        for s in node.then + (node.orelse or ()):
            _walk_calls(s, out)


def _validate(funcs: list[FuncDef]) -> None:
    names: dict[str, FuncDef] = {}
    for f in funcs:
        if f.name in names:
            raise ParseError(f"function {f.name!r} defined twice", f.pos)
        if f.name in REGISTRY:
            raise ParseError(f"function {f.name!r} shadows a builtin", f.pos)
        names[f.name] = f
    graph: dict[str, list[str]] = {}
    for f in funcs:
        calls: list[Call] = []
        for s in f.body:
            _walk_calls(s, calls)
        graph[f.name] = []
        for c in calls:
            if c.name in names:
                if c.args:
                    raise ParseError(f"{c.name}() takes no arguments", c.pos)
                graph[f.name].append(c.name)
            elif c.name in REGISTRY:
                b = REGISTRY[c.name]
                if not b.min_args <= len(c.args) <= b.max_args:
                    want = str(b.min_args) if b.min_args == b.max_args else f"{b.min_args}-{b.max_args}"
                    raise ParseError(f"{c.name}() takes {want} arguments, got {len(c.args)}", c.pos)
            else:
                raise ParseError(f"unknown function {c.name!r}", c.pos)
    # reject recursion (direct or mutual): the call graph must be acyclic
    state: dict[str, int] = {}

    def visit(name: str) -> None:
        state[name] = 1
        for callee in graph[name]:
            if state.get(callee) == 1:
                raise ParseError(f"recursive call to {callee!r}", names[callee].pos)
            if callee not in state:
                visit(callee)
        state[name] = 2

    for f in funcs:
        if f.name not in state:
            visit(f.name)


def _entry_kind(funcs: list[FuncDef], kind: Kind | str | None, end: Pos) -> Kind:
    present = [k for k in Kind if any(f.name == k.value for f in funcs)]
    if kind is not None:
        kind = Kind(kind)
        if kind not in present:
            raise WrongEntrypoint(f"missing entry function {kind.value}()", end, (f"fn {kind.value}()",))
        others = [k for k in present if k is not kind]
        if others:
            raise WrongEntrypoint(f"{others[0].value}() is an entry name; a {kind.value} program "
                                  "may not define it", end)
        return kind
    if len(present) != 1:
        raise WrongEntrypoint("program must define exactly one of identify(), check(), reward()",
                              end, tuple(f"fn {k.value}()" for k in Kind))
    return present[0]


def parse(source: str, kind: Kind | str | None = None) -> Program:
    """Parse and validate; ``kind`` defaults to the entry function present."""
    p = _Parser(source)
    funcs = p.program()
    _validate(funcs)
    k = _entry_kind(funcs, kind, p.toks[-1].pos)
    return Program(k, tuple(funcs), source)
