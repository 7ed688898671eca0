"""Tiny arithmetic expression language for config files.

Supports + - * / ^ (power), unary minus, the functions sin, cos, exp, abs,
min, max, the constants pi and e, and the coordinate variables x (interval),
x/y (square) or r (disc).  Evaluation is vectorized over nodal coordinates
and never touches Python builtins, so config files cannot execute code.
"""

from __future__ import annotations

import ast

import numpy as np

_FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "abs": np.abs,
    "min": np.minimum,
    "max": np.maximum,
}

_CONSTANTS = {"pi": np.pi, "e": np.e, "inf": np.inf}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


class ExpressionError(ValueError):
    """Raised for syntax errors, unknown names or malformed calls."""


def _eval(node, env):
    if isinstance(node, ast.Expression):
        return _eval(node.body, env)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, (int, float)):
            return float(node.value)
        raise ExpressionError(f"non-numeric literal {node.value!r}")
    if isinstance(node, ast.Name):
        if node.id in env:
            return env[node.id]
        if node.id in _CONSTANTS:
            return _CONSTANTS[node.id]
        raise ExpressionError(f"unknown name {node.id!r}")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval(node.left, env),
                                      _eval(node.right, env))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval(node.operand, env)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
            raise ExpressionError("only sin/cos/exp/abs/min/max calls allowed")
        if node.keywords:
            raise ExpressionError("keyword arguments are not supported")
        args = [_eval(a, env) for a in node.args]
        fn = _FUNCTIONS[node.func.id]
        if node.func.id in ("min", "max"):
            if len(args) != 2:
                raise ExpressionError(f"{node.func.id} takes exactly 2 arguments")
            return fn(*args)
        if len(args) != 1:
            raise ExpressionError(f"{node.func.id} takes exactly 1 argument")
        return fn(args[0])
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)}")


def evaluate(expr: str, **variables):
    """Evaluate ``expr`` with the given coordinate arrays/scalars."""
    text = expr.replace("^", "**")
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {expr!r}: {exc}") from exc
    return _eval(tree, variables)
