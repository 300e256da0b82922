"""Minimal arithmetic expression grammar used for user-supplied metric entries.

Supported: numbers, ``pi``, ``e``, coordinates ``x1 .. xd``, the binary operators
``+ - * / ^`` (``**`` also accepted), unary minus, and the functions
``sin cos tan exp log sqrt sinh cosh tanh``.  Expressions are compiled from the
Python AST; nothing is passed to ``eval``.
"""
from __future__ import annotations

import ast
import math
import operator
import re
from typing import Callable

import numpy as np

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
}
_CONSTS = {"pi": math.pi, "e": math.e}
_COORD = re.compile(r"^x([1-9][0-9]*)$")


class ExpressionError(ValueError):
    pass


def compile_expr(text: str, dim: int) -> Callable[[np.ndarray], float]:
    """Compile ``text`` into a function of a coordinate vector of length ``dim``."""
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression {text!r}: {exc.msg}") from None
    return _build(tree.body, dim, text)


def _build(node, dim, text):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        value = float(node.value)
        return lambda x: value
    if isinstance(node, ast.Name):
        if node.id in _CONSTS:
            value = _CONSTS[node.id]
            return lambda x: value
        m = _COORD.match(node.id)
        if m:
            idx = int(m.group(1)) - 1
            if idx >= dim:
                raise ExpressionError(f"{node.id} out of range for dimension {dim} in {text!r}")
            return lambda x: x[idx]
        raise ExpressionError(f"unknown name {node.id!r} in {text!r}")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        left, right = _build(node.left, dim, text), _build(node.right, dim, text)
        return lambda x: op(left(x), right(x))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _build(node.operand, dim, text)
        if isinstance(node.op, ast.USub):
            return lambda x: -inner(x)
        return inner
    if (
        isinstance(node, ast.Call)
        and isinstance(node.func, ast.Name)
        and node.func.id in _FUNCS
        and len(node.args) == 1
        and not node.keywords
    ):
        fn = _FUNCS[node.func.id]
        arg = _build(node.args[0], dim, text)
        return lambda x: fn(arg(x))
    raise ExpressionError(f"unsupported construct {ast.dump(node)[:40]}... in {text!r}")
