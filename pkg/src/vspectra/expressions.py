"""Tiny expression language for coefficient functions.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' integer)?
    base   := number | 'x' | 'i' | 'exp(' expr ')' | 'sin(' expr ')'
            | 'cos(' expr ')' | 'H(' expr ')' | '(' expr ')'

A leading sign on a term is accepted, and kernels may use a second
variable ``t``.  ``H`` is the right-continuous unit step.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
import sympy as sp

# step arguments within this distance of 0 count as 0 (right limit)
STEP_TOL = 1e-12


class ExpressionError(ValueError):
    """Malformed expression or singular evaluation."""


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>exp|sin|cos|H|x|t|i)|(?P<op>[-+*/^()]))"
)


@dataclass(frozen=True)
class Node:
    op: str
    args: tuple = ()
    value: complex | int | None = None


def _tokenize(text: str):
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExpressionError(f"unexpected character at {pos} in {text!r}")
        kind = m.lastgroup
        out.append((kind, m.group(kind)))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, text: str, variables: tuple[str, ...]):
        self.text = text
        self.toks = _tokenize(text)
        self.pos = 0
        self.variables = variables

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else (None, None)

    def take(self, expected=None):
        tok = self.peek()
        if tok[0] is None or (expected is not None and tok[1] != expected):
            raise ExpressionError(
                f"expected {expected or 'a token'} in {self.text!r}"
            )
        self.pos += 1
        return tok

    def parse(self) -> Node:
        if not self.toks:
            raise ExpressionError("empty expression")
        node = self.expr()
        if self.pos != len(self.toks):
            raise ExpressionError(f"trailing input in {self.text!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = Node(op, (node, self.term()))
        return node

    def term(self) -> Node:
        if self.peek()[1] in ("+", "-"):
            sign = self.take()[1]
            inner = self.term()
            return inner if sign == "+" else Node("neg", (inner,))
        node = self.factor()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = Node(op, (node, self.factor()))
        return node

    def factor(self) -> Node:
        node = self.base()
        if self.peek()[1] == "^":
            self.take()
            sign = 1
            if self.peek()[1] == "-":
                self.take()
                sign = -1
            kind, tok = self.take()
            if kind != "num" or not tok.isdigit():
                raise ExpressionError(f"exponent must be an integer in {self.text!r}")
            node = Node("^", (node,), sign * int(tok))
        return node

    def base(self) -> Node:
        kind, tok = self.take()
        if kind == "num":
            return Node("const", value=complex(float(tok)))
        if kind == "name":
            if tok == "i":
                return Node("const", value=1j)
            if tok in ("x", "t"):
                if tok not in self.variables:
                    raise ExpressionError(f"variable {tok!r} not allowed here")
                return Node("var", value=tok)
            self.take("(")
            arg = self.expr()
            self.take(")")
            return Node(tok, (arg,))
        if tok == "(":
            node = self.expr()
            self.take(")")
            return node
        raise ExpressionError(f"unexpected {tok!r} in {self.text!r}")


def _eval(node: Node, env: dict) -> np.ndarray:
    op = node.op
    if op == "const":
        return node.value
    if op == "var":
        return env[node.value]
    if op == "neg":
        return -_eval(node.args[0], env)
    if op in ("+", "-", "*", "/"):
        a = _eval(node.args[0], env)
        b = _eval(node.args[1], env)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if np.any(np.abs(b) == 0):
            raise ExpressionError("division by zero")
        return a / b
    if op == "^":
        a = _eval(node.args[0], env)
        if node.value < 0 and np.any(np.abs(a) == 0):
            raise ExpressionError("division by zero")
        return np.asarray(a, dtype=complex) ** node.value
    a = _eval(node.args[0], env)
    if op == "exp":
        return np.exp(a)
    if op == "sin":
        return np.sin(a)
    if op == "cos":
        return np.cos(a)
    if op == "H":
        a = np.asarray(a, dtype=complex)
        return np.where(a.real >= -STEP_TOL, 1.0 + 0j, 0.0 + 0j)
    raise AssertionError(op)


_SYM = {"x": sp.Symbol("x", real=True), "t": sp.Symbol("t", real=True)}


def _sympy(node: Node):
    op = node.op
    if op == "const":
        v = complex(node.value)
        re_, im_ = sp.nsimplify(v.real, rational=True), sp.nsimplify(v.imag, rational=True)
        return re_ + sp.I * im_
    if op == "var":
        return _SYM[node.value]
    if op == "neg":
        return -_sympy(node.args[0])
    if op in ("+", "-", "*", "/"):
        a, b = (_sympy(n) for n in node.args)
        return {"+": a + b, "-": a - b, "*": a * b, "/": a / b}[op]
    if op == "^":
        return _sympy(node.args[0]) ** node.value
    a = _sympy(node.args[0])
    return {"exp": sp.exp, "sin": sp.sin, "cos": sp.cos, "H": sp.Heaviside}[op](a)


def _walk(node: Node):
    yield node
    for a in node.args:
        yield from _walk(a)


class Expression:
    """Parsed expression, evaluable on numpy arrays and convertible to sympy."""

    def __init__(self, text: str, variables: tuple[str, ...] = ("x",)):
        self.text = text
        self.variables = variables
        self.tree = _Parser(text, variables).parse()

    def __repr__(self):
        return f"Expression({self.text!r})"

    def __call__(self, x, t=None) -> np.ndarray:
        env = {"x": np.asarray(x, dtype=float)}
        if t is not None:
            env["t"] = np.asarray(t, dtype=float)
        shape = np.broadcast(*env.values()).shape
        out = _eval(self.tree, env)
        return np.broadcast_to(np.asarray(out, dtype=complex), shape).copy()

    def to_sympy(self):
        return _sympy(self.tree)

    @property
    def has_step(self) -> bool:
        return any(n.op == "H" for n in _walk(self.tree))

    def step_arguments(self):
        return [Expression._from_tree(n.args[0], self) for n in _walk(self.tree) if n.op == "H"]

    @classmethod
    def _from_tree(cls, tree: Node, parent: "Expression") -> "Expression":
        obj = cls.__new__(cls)
        obj.text = "<sub-expression>"
        obj.variables = parent.variables
        obj.tree = tree
        return obj


def parse(text: str, variables: tuple[str, ...] = ("x",)) -> Expression:
    return Expression(text, variables)
