"""Canonical pretty-printer; ``parse(format(p)) == p`` for every program."""
from __future__ import annotations

from .syntax import (
    BINARY_PREC, PREC_CMP, PREC_NEG, PREC_NOT, Binary, Bool, Call, Expr, If, Int, Let,
    Program, Real, Recall, Return, Store, Str, Unary, Var, precedence,
)

INDENT = "    "


def quote(s: str) -> str:
    out = s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
    return f'"{out}"'


def format_expr(e: Expr) -> str:
    if isinstance(e, Int):
        return str(e.value)
    if isinstance(e, Real):
        return repr(e.value)  # "1e+20" lexes as a real too
    if isinstance(e, Str):
        return quote(e.value)
    if isinstance(e, Bool):
        return "true" if e.value else "false"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Recall):
        return f"recall({quote(e.key)})"
    if isinstance(e, Call):
        return f"{e.name}({', '.join(format_expr(a) for a in e.args)})"
    if isinstance(e, Unary):
        inner = format_expr(e.operand)
        if e.op == "not":
            if precedence(e.operand) < PREC_NOT:
                inner = f"({inner})"
            return f"not {inner}"
        if precedence(e.operand) < PREC_NEG:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, Binary):
        p = BINARY_PREC[e.op]
        left, right = format_expr(e.left), format_expr(e.right)
        lp, rp = precedence(e.left), precedence(e.right)
        # left-associative: equal precedence needs parens only on the right;
        # comparisons do not chain, so they need them on both sides
        if lp < p or (p == PREC_CMP and lp == p):
            left = f"({left})"
        if rp <= p:
            right = f"({right})"
        return f"{left} {e.op} {right}"
    raise TypeError(f"not an expression: {e!r}")


def _stmts(body, depth: int, out: list[str]) -> None:
    pad = INDENT * depth
    for s in body:
        if isinstance(s, Let):
            out.append(f"{pad}let {s.name} = {format_expr(s.value)};")
        elif isinstance(s, Store):
            out.append(f"{pad}store {quote(s.key)} = {format_expr(s.value)};")
        elif isinstance(s, Return):
            out.append(f"{pad}return {format_expr(s.value)};")
        elif isinstance(s, If):
            _if(s, depth, out, pad)
        else:
            raise TypeError(f"not a statement: {s!r}")


def _if(s: If, depth: int, out: list[str], prefix: str) -> None:
    pad = INDENT * depth
    out.append(f"{prefix}if {format_expr(s.cond)} {{")
    _stmts(s.then, depth + 1, out)
    if s.orelse is None:
        out.append(f"{pad}}}")
    elif len(s.orelse) == 1 and isinstance(s.orelse[0], If):
        # "else if" chains; the parser builds the same nested node
        out.append(f"{pad}}} else ")
        nested: list[str] = []
        _if(s.orelse[0], depth, nested, "")
        out[-1] += nested[0]
        out.extend(nested[1:])
    else:
        out.append(f"{pad}}} else {{")
        _stmts(s.orelse, depth + 1, out)
        out.append(f"{pad}}}")


def format_program(p: Program) -> str:
    chunks = []
    for f in p.functions:
        lines = [f"fn {f.name}() {{"]
        _stmts(f.body, 1, lines)
        lines.append("}")
        chunks.append("\n".join(lines))
    return "\n\n".join(chunks) + "\n"
