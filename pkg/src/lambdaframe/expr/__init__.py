"""Expression language and computation graphs. The executor lives in ``expr.executor``."""

from .ast import Binary, Call, Col, Expr, Num, Unary, format_expr
from .evaluate import EvalError, Evaluator, eval_expr
from .graph import (
    ROOT,
    ComputationGraph,
    Count,
    Define,
    Filter,
    GraphNode,
    HelperFunction,
    Histo1D,
    Mean,
    Sum,
    format_graph,
    parse_graph,
    parse_helpers,
)
from .parser import ParseError, parse_expr
from .typecheck import TypeCheckError, typecheck

__all__ = [
    "Binary", "Call", "Col", "Expr", "Num", "Unary", "format_expr",
    "EvalError", "Evaluator", "eval_expr",
    "ROOT", "ComputationGraph", "Count", "Define", "Filter", "GraphNode", "HelperFunction",
    "Histo1D", "Mean", "Sum", "format_graph", "parse_graph", "parse_helpers",
    "ParseError", "parse_expr",
    "TypeCheckError", "typecheck",
]
