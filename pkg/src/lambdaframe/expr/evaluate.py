"""Tree-walking evaluator. Works on scalars and, column-at-a-time, on numpy arrays."""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .ast import Binary, Call, Col, Expr, Num, Unary
from .graph import HelperFunction


class EvalError(ArithmeticError):
    pass


_BUILTINS: dict[str, Callable] = {
    "sqrt": np.sqrt,
    "abs": np.abs,
    "min": np.minimum,
    "max": np.maximum,
    "pow": np.power,
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
}

_BINARY: dict[str, Callable] = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.true_divide,
    "%": np.fmod,
    "<": np.less,
    "<=": np.less_equal,
    ">": np.greater,
    ">=": np.greater_equal,
    "==": np.equal,
    "!=": np.not_equal,
    "&&": np.logical_and,
    "||": np.logical_or,
}


class Evaluator:
    """Evaluate expressions against a column lookup.

    With ``strict`` set, an operation that turns non-NaN inputs into NaN raises
    EvalError; otherwise NaN propagates as IEEE arithmetic dictates.
    """

    def __init__(self, helpers: Mapping[str, HelperFunction] | None = None, strict: bool = False):
        self.helpers = dict(helpers or {})
        self.strict = strict

    def eval(self, e: Expr, lookup: Callable[[str], object]):
        with np.errstate(all="ignore"):
            return self._eval(e, lookup)

    def _eval(self, e: Expr, lookup):
        if isinstance(e, Num):
            return np.float64(e.value)
        if isinstance(e, Col):
            return lookup(e.name)
        if isinstance(e, Unary):
            v = self._eval(e.operand, lookup)
            return np.negative(v) if e.op == "-" else np.logical_not(v)
        if isinstance(e, Binary):
            a = self._eval(e.left, lookup)
            b = self._eval(e.right, lookup)
            out = _BINARY[e.op](a, b)
            if self.strict and e.op in ("/", "%"):
                self._check(e.op, out, a, b)
            return out
        if isinstance(e, Call):
            args = [self._eval(a, lookup) for a in e.args]
            fn = _BUILTINS.get(e.name)
            if fn is not None:
                out = fn(*args)
                if self.strict:
                    self._check(e.name, out, *args)
                return out
            h = self.helpers.get(e.name)
            if h is None:
                raise EvalError(f"unknown function {e.name!r}")
            bound = dict(zip(h.params, args))
            return self._eval(h.body, bound.__getitem__)
        raise EvalError(f"cannot evaluate {e!r}")

    @staticmethod
    def _check(name, out, *inputs):
        if np.any(np.isnan(out)) and not any(np.any(np.isnan(np.asarray(x, dtype=float))) for x in inputs):
            raise EvalError(f"domain error in {name}")


def eval_expr(
    e: Expr,
    row: Mapping[str, float],
    helpers: Mapping[str, HelperFunction] | None = None,
    strict: bool = False,
) -> float | bool:
    """Evaluate ``e`` for a single row of float bindings."""

    def lookup(name):
        try:
            return np.float64(row[name])
        except KeyError:
            raise EvalError(f"unbound column {name!r}") from None

    out = Evaluator(helpers, strict).eval(e, lookup)
    if isinstance(out, (bool, np.bool_)):
        return bool(out)
    return float(out)
