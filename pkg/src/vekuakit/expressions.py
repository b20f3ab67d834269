"""Whitelisted pointwise expressions for config-driven potentials.

Strings are parsed with :mod:`ast` and evaluated by walking the tree; only
numbers, the coordinates ``x1..xn``, ``r2`` (= |x|^2), ``diam``, the four
arithmetic operators, constant powers, ``exp`` and ``gaussian`` are
accepted.  Nothing is passed to ``eval``.

``gaussian(c1, ..., cn, s)`` is ``exp(-|x - c|^2 / (2 s^2))``.
"""
from __future__ import annotations

import ast
import re
from typing import Mapping

import numpy as np

from .clifford import blade_index
from .domain import Field, GridDomain


class ExpressionError(ValueError):
    """An expression uses something outside the whitelist."""


_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
}


def _eval(node: ast.AST, env: Mapping[str, np.ndarray], x: np.ndarray) -> np.ndarray:
    if isinstance(node, ast.Expression):
        return _eval(node.body, env, x)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return np.full(x.shape[0], float(node.value))
    if isinstance(node, ast.Name):
        if node.id not in env:
            raise ExpressionError(f"unknown name {node.id!r}")
        return env[node.id]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval(node.operand, env, x)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Pow):
            exponent = _constant(node.right)
            return _eval(node.left, env, x) ** exponent
        op = _BINOPS.get(type(node.op))
        if op is None:
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
        return op(_eval(node.left, env, x), _eval(node.right, env, x))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        name = node.func.id
        if name == "exp" and len(node.args) == 1:
            return np.exp(_eval(node.args[0], env, x))
        if name == "gaussian":
            n = x.shape[1]
            if len(node.args) != n + 1:
                raise ExpressionError(f"gaussian takes {n} center coordinates and a width")
            c = np.array([_constant(a) for a in node.args[:n]])
            s = _constant(node.args[n])
            if s <= 0:
                raise ExpressionError("gaussian width must be positive")
            return np.exp(-((x - c) ** 2).sum(axis=1) / (2.0 * s * s))
        raise ExpressionError(f"function {name!r} not allowed")
    raise ExpressionError(f"syntax {type(node).__name__} not allowed")


def _constant(node: ast.AST) -> float:
    """A literal number, possibly negated."""
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        return -_constant(node.operand)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return float(node.value)
    raise ExpressionError("exponents and gaussian parameters must be numeric literals")


def evaluate(text: str, grid: GridDomain) -> np.ndarray:
    """Evaluate a scalar expression at every grid point."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    x = grid.points
    env = {f"x{i + 1}": x[:, i] for i in range(grid.n)}
    env["r2"] = (x ** 2).sum(axis=1)
    env["diam"] = np.full(grid.size, grid.diam)
    with np.errstate(all="ignore"):
        out = np.asarray(_eval(tree, env, x), dtype=float)
    bad = ~np.isfinite(out)
    if bad.any():
        p = grid.points[int(np.flatnonzero(bad)[0])]
        raise ExpressionError(f"{text!r} is not finite at {p.tolist()}")
    return out


_BLADE = re.compile(r"^(1|e[1-9]+)$")


def field_from_spec(spec: str | float | Mapping[str, str | float], grid: GridDomain) -> Field:
    """A Field from a scalar expression or a ``{blade: expression}`` mapping.

    Blade keys are ``"1"`` or ``"e1"``, ``"e12"``, ... (generators in
    increasing order).
    """
    if isinstance(spec, (int, float)):
        return Field.scalar(grid, float(spec))
    if isinstance(spec, str):
        return Field.scalar(grid, evaluate(spec, grid))
    values = np.zeros((grid.size, grid.blades))
    for key, expr in spec.items():
        key = str(key)
        if not _BLADE.match(key):
            raise ExpressionError(f"bad blade key {key!r}")
        labels = [] if key == "1" else [int(c) for c in key[1:]]
        if labels != sorted(labels) or any(i > grid.n for i in labels):
            raise ExpressionError(f"blade {key!r} is not canonical for n={grid.n}")
        mask = blade_index(labels)
        values[:, mask] += float(expr) if isinstance(expr, (int, float)) else evaluate(expr, grid)
    return Field(grid, values)
