"""Whitelisted arithmetic expressions in one variable ``x``.

Used to read user-defined exponents ``F(x)`` from family files without
``eval``.  The compiled callable works on floats, numpy arrays and Taylor
jets.
"""

from __future__ import annotations

import ast
import math
import operator
from typing import Callable

from . import jets

FUNCTIONS = {
    "exp": jets.exp,
    "log": jets.log,
    "log1p": jets.log1p,
    "sqrt": jets.sqrt,
    "pow": jets.power,
}
CONSTANTS = {"pi": math.pi, "e": math.e}
_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}


class ExpressionError(ValueError):
    pass


def _build(node, var: str):
    if isinstance(node, ast.Expression):
        return _build(node.body, var)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        value = float(node.value)
        return lambda x: value
    if isinstance(node, ast.Name):
        if node.id == var:
            return lambda x: x
        if node.id in CONSTANTS:
            value = CONSTANTS[node.id]
            return lambda x: value
        raise ExpressionError(f"unknown name {node.id!r}")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        lhs, rhs = _build(node.left, var), _build(node.right, var)
        return lambda x: op(lhs(x), rhs(x))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        op = _UNOPS[type(node.op)]
        arg = _build(node.operand, var)
        return lambda x: op(arg(x))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        fn = FUNCTIONS.get(node.func.id)
        if fn is None:
            raise ExpressionError(f"unknown function {node.func.id!r}")
        args = [_build(a, var) for a in node.args]
        expected = 2 if node.func.id == "pow" else 1
        if len(args) != expected:
            raise ExpressionError(f"{node.func.id} takes {expected} argument(s)")
        return lambda x: fn(*(a(x) for a in args))
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)[:60]}")


def compile_expression(text: str, var: str = "x") -> Callable:
    """Compile e.g. ``"2*log(1 + x/3)"`` or ``"x^2"`` (``^`` is a power)."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("expression must be a non-empty string")
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    return _build(tree, var)
