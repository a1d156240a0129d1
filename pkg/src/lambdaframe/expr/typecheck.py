from __future__ import annotations

from typing import Iterable, Mapping

from .ast import ARITH_OPS, COMPARE_OPS, LOGIC_OPS, Binary, Call, Col, Expr, Num, Unary
from .graph import ROOT, ComputationGraph, Define, Filter, Histo1D, HelperFunction, Mean, Sum

NUM = "num"
BOOL = "bool"

BUILTIN_ARITY = {
    "sqrt": 1,
    "abs": 1,
    "min": 2,
    "max": 2,
    "pow": 2,
    "exp": 1,
    "log": 1,
    "sin": 1,
    "cos": 1,
}


class TypeCheckError(Exception):
    """Reported to clients with error kind ``TypeError``."""

    def __init__(self, node_id: int | None, message: str):
        self.node_id = node_id
        self.message = message
        where = f"node {node_id}: " if node_id is not None else ""
        super().__init__(where + message)


def helper_table(helpers: Iterable[HelperFunction]) -> dict[str, HelperFunction]:
    table: dict[str, HelperFunction] = {}
    for h in helpers:
        if h.name in table:
            raise TypeCheckError(None, f"helper {h.name!r} defined more than once")
        if h.name in BUILTIN_ARITY:
            raise TypeCheckError(None, f"helper {h.name!r} shadows a builtin")
        if len(set(h.params)) != len(h.params):
            raise TypeCheckError(None, f"helper {h.name!r} repeats a parameter name")
        table[h.name] = h
    return table


def helper_types(table: Mapping[str, HelperFunction]) -> dict[str, str]:
    """Result type of every helper. Bodies may use only their params and builtins."""
    out = {}
    for h in table.values():
        scope = {p: NUM for p in h.params}
        try:
            out[h.name] = infer(h.body, scope, {})
        except TypeCheckError as e:
            raise TypeCheckError(None, f"in helper {h.name!r}: {e.message}") from None
    return out


def infer(
    e: Expr,
    scope: Mapping[str, str],
    helpers: Mapping[str, str],
    arities: Mapping[str, int] | None = None,
) -> str:
    """Type of ``e`` given column types in ``scope`` and helper result types."""
    if isinstance(e, Num):
        return NUM
    if isinstance(e, Col):
        if e.name not in scope:
            raise TypeCheckError(None, f"unknown column {e.name!r}")
        return scope[e.name]
    if isinstance(e, Unary):
        t = infer(e.operand, scope, helpers, arities)
        want = NUM if e.op == "-" else BOOL
        if t != want:
            raise TypeCheckError(None, f"operator {e.op!r} needs a {want} operand")
        return want
    if isinstance(e, Binary):
        lt = infer(e.left, scope, helpers, arities)
        rt = infer(e.right, scope, helpers, arities)
        if e.op in ARITH_OPS:
            if lt != NUM or rt != NUM:
                raise TypeCheckError(None, f"operator {e.op!r} needs numeric operands")
            return NUM
        if e.op in COMPARE_OPS:
            if e.op in ("==", "!=") and lt == rt:
                return BOOL
            if lt != NUM or rt != NUM:
                raise TypeCheckError(None, f"operator {e.op!r} needs numeric operands")
            return BOOL
        if e.op in LOGIC_OPS:
            if lt != BOOL or rt != BOOL:
                raise TypeCheckError(None, f"operator {e.op!r} needs boolean operands")
            return BOOL
        raise TypeCheckError(None, f"unknown operator {e.op!r}")
    if isinstance(e, Call):
        arg_types = [infer(a, scope, helpers, arities) for a in e.args]
        if e.name in BUILTIN_ARITY:
            arity = BUILTIN_ARITY[e.name]
            result = NUM
        elif e.name in helpers:
            arity = (arities or {}).get(e.name, len(e.args))
            result = helpers[e.name]
        else:
            raise TypeCheckError(None, f"unknown function {e.name!r}")
        if len(e.args) != arity:
            raise TypeCheckError(None, f"{e.name}() takes {arity} arguments, got {len(e.args)}")
        if any(t != NUM for t in arg_types):
            raise TypeCheckError(None, f"{e.name}() needs numeric arguments")
        return result
    raise TypeCheckError(None, f"not an expression: {e!r}")


def typecheck(
    g: ComputationGraph,
    columns: Iterable[str],
    extra_helpers: Iterable[HelperFunction] = (),
) -> None:
    """Raise TypeCheckError for the first ill-typed node; return None if the graph is sound.

    ``columns`` is the dataset's column list (a DatasetDescriptor is accepted too).
    """
    if hasattr(columns, "columns"):
        columns = columns.columns  # type: ignore[attr-defined]
    base = {c: NUM for c in columns}
    table = helper_table(list(extra_helpers) + list(g.helpers))
    htypes = helper_types(table)
    arities = {name: len(h.params) for name, h in table.items()}

    if not g.actions:
        raise TypeCheckError(None, "graph has no action nodes")

    by_id = {n.id: n for n in g.nodes}
    scopes: dict[int, dict[str, str]] = {ROOT: dict(base)}
    for n in g.nodes:
        if n.parent not in scopes:
            raise TypeCheckError(n.id, f"parent {n.parent} is not defined before this node")
        if n.parent != ROOT and by_id[n.parent].is_action:
            raise TypeCheckError(n.id, f"parent {n.parent} is an action and cannot have children")
        scope = scopes[n.parent]
        k = n.kind
        try:
            if isinstance(k, Define):
                if k.name in scope:
                    raise TypeCheckError(n.id, f"column {k.name!r} already defined on this path")
                if infer(k.expr, scope, htypes, arities) != NUM:
                    raise TypeCheckError(n.id, "define body must be numeric")
                scopes[n.id] = {**scope, k.name: NUM}
            elif isinstance(k, Filter):
                if infer(k.expr, scope, htypes, arities) != BOOL:
                    raise TypeCheckError(n.id, "boolean required in filter")
                scopes[n.id] = scope
            elif isinstance(k, (Sum, Mean, Histo1D)):
                if k.column not in scope:
                    raise TypeCheckError(n.id, f"unknown column {k.column!r}")
                if isinstance(k, Histo1D):
                    if k.nbins < 1:
                        raise TypeCheckError(n.id, "histogram needs nbins >= 1")
                    if not k.lo < k.hi:
                        raise TypeCheckError(n.id, "histogram needs lo < hi")
        except TypeCheckError as e:
            if e.node_id is None:
                raise TypeCheckError(n.id, e.message) from None
            raise
