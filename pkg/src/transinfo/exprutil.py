"""Tiny arithmetic-expression evaluator for diffusion coefficient strings.

Accepts a single identifier ``x``, the constants pi and e, the functions
exp, log, pow, abs, sqrt, sin, cos, and the usual arithmetic operators.
Parsed once with the ast module against a whitelist; anything else is a
ConfigParse error, never an eval of untrusted code.
"""

from __future__ import annotations

import ast
import math

from .errors import ConfigParse

_ALLOWED_CALLS = {
    "exp": math.exp, "log": math.log, "pow": pow, "abs": abs,
    "sqrt": math.sqrt, "sin": math.sin, "cos": math.cos,
}
_ALLOWED_NAMES = {"x", "pi", "e"}
_ALLOWED_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load,
    ast.Constant, ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub,
    ast.UAdd, ast.Mod,
)


def compile_expression(text: str):
    """Compile an expression string into a float -> float callable."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ConfigParse(f"cannot parse expression {text!r}: {exc}") from exc
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ConfigParse(f"disallowed syntax {type(node).__name__!r} in {text!r}")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _ALLOWED_CALLS:
                raise ConfigParse(f"disallowed function call in {text!r}")
        if isinstance(node, ast.Name) and node.id not in _ALLOWED_NAMES \
                and node.id not in _ALLOWED_CALLS:
            raise ConfigParse(f"unknown identifier {node.id!r} in {text!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ConfigParse(f"non-numeric constant in {text!r}")
    code = compile(tree, "<expression>", "eval")
    env = dict(_ALLOWED_CALLS, pi=math.pi, e=math.e)

    def fn(x: float) -> float:
        return float(eval(code, {"__builtins__": {}}, dict(env, x=float(x))))

    return fn
