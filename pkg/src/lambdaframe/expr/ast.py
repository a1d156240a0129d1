from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union


@dataclass(frozen=True)
class Num:
    value: float
    pos: tuple[int, int] | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Col:
    name: str
    pos: tuple[int, int] | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Unary:
    op: str  # "-" or "!"
    operand: "Expr"
    pos: tuple[int, int] | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    pos: tuple[int, int] | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Expr", ...]
    pos: tuple[int, int] | None = field(default=None, compare=False, repr=False)


Expr = Union[Num, Col, Unary, Binary, Call]

ARITH_OPS = ("+", "-", "*", "/", "%")
COMPARE_OPS = ("<", "<=", ">", ">=", "==", "!=")
LOGIC_OPS = ("&&", "||")


def format_expr(e: Expr) -> str:
    """Render ``e`` so that parsing the result gives back an equal tree.

    Binary nodes are fully parenthesized; that keeps the printer independent of
    precedence and associativity.
    """
    if isinstance(e, Num):
        r = repr(float(e.value))
        if r in ("inf", "nan"):
            raise ValueError(f"literal {r} has no source form")
        return r
    if isinstance(e, Col):
        return e.name
    if isinstance(e, Unary):
        return f"{e.op}{_atom(e.operand)}"
    if isinstance(e, Binary):
        return f"({format_expr(e.left)} {e.op} {format_expr(e.right)})"
    if isinstance(e, Call):
        return f"{e.name}({', '.join(format_expr(a) for a in e.args)})"
    raise TypeError(f"not an expression node: {e!r}")


def _atom(e: Expr) -> str:
    s = format_expr(e)
    if isinstance(e, (Unary,)) or (isinstance(e, Num) and s.startswith("-")):
        return f"({s})"
    return s


def columns_of(e: Expr) -> set[str]:
    if isinstance(e, Col):
        return {e.name}
    if isinstance(e, Unary):
        return columns_of(e.operand)
    if isinstance(e, Binary):
        return columns_of(e.left) | columns_of(e.right)
    if isinstance(e, Call):
        out: set[str] = set()
        for a in e.args:
            out |= columns_of(a)
        return out
    return set()
