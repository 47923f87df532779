"""Smooth scalar expressions: parsing, evaluation, and forward-mode derivatives.

The grammar (whitespace insignificant, ``^`` right-associative)::

    expr   := term (("+"|"-") term)*
    term   := factor (("*"|"/") factor)*
    factor := unary ("^" factor)?
    unary  := "-" unary | atom
    atom   := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")"

Only smooth primitives are admitted; ``abs``, ``floor`` and friends are
rejected at parse time.  Derivatives are exact to roundoff: values, gradients
and Hessians are propagated together through the syntax tree (second-order
forward mode), vectorized over a batch of evaluation points.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    NonSmoothFunctionError,
    ParseError,
    UnknownIdentifierError,
)

SMOOTH_FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh", "tanh")

# Recognized but rejected: the analysis requires globally smooth constraints.
NON_SMOOTH_NAMES = ("abs", "floor", "ceil", "round", "sign", "min", "max", "mod", "heaviside")

_IDENT_RE = re.compile(r"[A-Za-z_]\w*")
_NUMBER_RE = re.compile(r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")


# ---------------------------------------------------------------------------
# Syntax tree


@dataclass(frozen=True)
class Num:
    value: float

    def src(self) -> str:
        return repr(self.value)


@dataclass(frozen=True)
class Var:
    index: int
    name: str

    def src(self) -> str:
        return self.name


@dataclass(frozen=True)
class Neg:
    child: "Node"

    def src(self) -> str:
        return f"(-{self.child.src()})"


@dataclass(frozen=True)
class Add:
    left: "Node"
    right: "Node"

    def src(self) -> str:
        return f"({self.left.src()} + {self.right.src()})"


@dataclass(frozen=True)
class Sub:
    left: "Node"
    right: "Node"

    def src(self) -> str:
        return f"({self.left.src()} - {self.right.src()})"


@dataclass(frozen=True)
class Mul:
    left: "Node"
    right: "Node"

    def src(self) -> str:
        return f"({self.left.src()} * {self.right.src()})"


@dataclass(frozen=True)
class Div:
    left: "Node"
    right: "Node"

    def src(self) -> str:
        return f"({self.left.src()} / {self.right.src()})"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: "Node"
    int_exponent: int | None = field(init=False, default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "int_exponent", _constant_int(self.exponent))

    def src(self) -> str:
        return f"({self.base.src()} ^ {self.exponent.src()})"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"

    def src(self) -> str:
        return f"{self.func}({self.arg.src()})"


Node = Num | Var | Neg | Add | Sub | Mul | Div | Pow | Call


def _constant_value(node: Node) -> float | None:
    """Fold a variable-free subtree to its float value, else None.

    Used only to pick derivative rules (e.g. exact integer powers); the tree
    itself is never rewritten.  Folds that leave the domain return None and
    the general evaluation rule reports the error.
    """
    try:
        if isinstance(node, Num):
            return node.value
        if isinstance(node, Neg):
            v = _constant_value(node.child)
            return None if v is None else -v
        if isinstance(node, (Add, Sub, Mul, Div, Pow)):
            left = _constant_value(node.left if not isinstance(node, Pow) else node.base)
            right = _constant_value(node.right if not isinstance(node, Pow) else node.exponent)
            if left is None or right is None:
                return None
            if isinstance(node, Add):
                return left + right
            if isinstance(node, Sub):
                return left - right
            if isinstance(node, Mul):
                return left * right
            if isinstance(node, Div):
                return left / right
            return float(left**right)
        if isinstance(node, Call):
            v = _constant_value(node.arg)
            return None if v is None else float(getattr(math, node.func)(v))
    except (ValueError, ZeroDivisionError, OverflowError, TypeError):
        return None
    return None


def _constant_int(node: Node) -> int | None:
    value = _constant_value(node)
    if value is not None and float(value).is_integer():
        return int(value)
    return None


# ---------------------------------------------------------------------------
# Tokenizer

_ONE_CHAR = {
    "+": "+",
    "-": "-",
    "−": "-",  # unicode minus accepted as an alias
    "*": "*",
    "/": "/",
    "^": "^",
    "(": "(",
    ")": ")",
}


@dataclass(frozen=True)
class _Token:
    kind: str  # "num", "ident", one of + - * / ^ ( ), or "end"
    text: str
    pos: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    i, size = 0, len(source)
    while i < size:
        ch = source[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _ONE_CHAR:
            tokens.append(_Token(_ONE_CHAR[ch], _ONE_CHAR[ch], i))
            i += 1
            continue
        m = _NUMBER_RE.match(source, i)
        if m:
            tokens.append(_Token("num", m.group(), i))
            i = m.end()
            continue
        m = _IDENT_RE.match(source, i)
        if m:
            tokens.append(_Token("ident", m.group(), i))
            i = m.end()
            continue
        raise ParseError(f"unexpected character {ch!r}", i)
    tokens.append(_Token("end", "", size))
    return tokens


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, tokens: list[_Token], variables: dict[str, int]):
        self.tokens = tokens
        self.variables = variables
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError(f"expected '{kind}', found {tok.text!r}", tok.pos)
        return self.advance()

    def expr(self) -> Node:
        node = self.term()
        while self.peek().kind in ("+", "-"):
            op = self.advance().kind
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek().kind in ("*", "/"):
            op = self.advance().kind
            rhs = self.factor()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def factor(self) -> Node:
        base = self.unary()
        if self.peek().kind == "^":
            self.advance()
            return Pow(base, self.factor())
        return base

    def unary(self) -> Node:
        if self.peek().kind == "-":
            self.advance()
            return Neg(self.unary())
        return self.atom()

    def atom(self) -> Node:
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "ident":
            self.advance()
            if self.peek().kind == "(":
                if tok.text in NON_SMOOTH_NAMES:
                    raise NonSmoothFunctionError(tok.text, tok.pos)
                if tok.text not in SMOOTH_FUNCTIONS:
                    raise UnknownIdentifierError(tok.text, tok.pos)
                self.advance()
                arg = self.expr()
                self.expect(")")
                return Call(tok.text, arg)
            if tok.text in self.variables:
                return Var(self.variables[tok.text], tok.text)
            raise UnknownIdentifierError(tok.text, tok.pos)
        raise ParseError(f"unexpected token {tok.text!r}" if tok.text else "unexpected end of input", tok.pos)


# ---------------------------------------------------------------------------
# Forward-mode evaluation
#
# A "triple" is (value, gradient, hessian) with shapes (K,), (K, n), (K, n, n);
# gradient/hessian are None below the requested derivative order.  All rules
# preserve exact (bitwise) Hessian symmetry.


class _Ctx:
    __slots__ = ("points", "K", "n", "order", "check")

    def __init__(self, points: np.ndarray, order: int, check: bool):
        self.points = points
        self.K, self.n = points.shape
        self.order = order
        self.check = check


def _t_const(value: float, ctx: _Ctx):
    v = np.full(ctx.K, value)
    g = np.zeros((ctx.K, ctx.n)) if ctx.order >= 1 else None
    h = np.zeros((ctx.K, ctx.n, ctx.n)) if ctx.order >= 2 else None
    return v, g, h


def _t_neg(t):
    v, g, h = t
    return -v, None if g is None else -g, None if h is None else -h


def _t_add(t1, t2):
    v1, g1, h1 = t1
    v2, g2, h2 = t2
    return (
        v1 + v2,
        None if g1 is None else g1 + g2,
        None if h1 is None else h1 + h2,
    )


def _t_sub(t1, t2):
    v1, g1, h1 = t1
    v2, g2, h2 = t2
    return (
        v1 - v2,
        None if g1 is None else g1 - g2,
        None if h1 is None else h1 - h2,
    )


def _t_mul(t1, t2):
    v1, g1, h1 = t1
    v2, g2, h2 = t2
    v = v1 * v2
    g = h = None
    if g1 is not None:
        g = g1 * v2[:, None] + v1[:, None] * g2
    if h1 is not None:
        cross = g1[:, :, None] * g2[:, None, :]
        # Summing the cross term with its transpose first keeps the result
        # bitwise symmetric (entrywise commutative additions only).
        h = h1 * v2[:, None, None] + v1[:, None, None] * h2 + (cross + cross.transpose(0, 2, 1))
    return v, g, h


def _t_div(t1, t2, node, ctx: _Ctx):
    v1, g1, h1 = t1
    v2, g2, h2 = t2
    if ctx.check and np.any(v2 == 0.0):
        raise DomainError("division by zero", node.right.src())
    v = v1 / v2
    g = h = None
    if g1 is not None:
        g = (g1 - v[:, None] * g2) / v2[:, None]
    if h1 is not None:
        cross = g[:, :, None] * g2[:, None, :]
        h = (h1 - (cross + cross.transpose(0, 2, 1)) - v[:, None, None] * h2) / v2[:, None, None]
    return v, g, h


def _t_chain(val, d1, d2, t):
    """Compose scalar function values/derivatives with an inner triple."""
    _, g1, h1 = t
    g = h = None
    if g1 is not None:
        g = d1[:, None] * g1
    if h1 is not None:
        h = d1[:, None, None] * h1 + d2[:, None, None] * (g1[:, :, None] * g1[:, None, :])
    return val, g, h


def _t_pow_int(t, k: int, node, ctx: _Ctx):
    v1, g1, h1 = t
    if k == 0:
        return _t_const(1.0, ctx)
    if k == 1:
        return t
    if k < 0 and ctx.check and np.any(v1 == 0.0):
        raise DomainError("zero raised to a negative power", node.src())
    val = np.power(v1, k)
    d1 = k * np.power(v1, k - 1)
    d2 = (k * (k - 1)) * np.power(v1, k - 2)
    return _t_chain(val, d1, d2, t)


def _t_pow_const(t, c: float, node, ctx: _Ctx):
    v1 = t[0]
    if ctx.check and np.any(v1 <= 0.0):
        raise DomainError("non-integer power of a nonpositive base", node.src())
    val = np.power(v1, c)
    d1 = c * np.power(v1, c - 1.0)
    d2 = (c * (c - 1.0)) * np.power(v1, c - 2.0)
    return _t_chain(val, d1, d2, t)


def _t_func(name: str, t, node, ctx: _Ctx):
    v1 = t[0]
    if name == "sin":
        val = np.sin(v1)
        return _t_chain(val, np.cos(v1), -val, t)
    if name == "cos":
        val = np.cos(v1)
        return _t_chain(val, -np.sin(v1), -val, t)
    if name == "tan":
        val = np.tan(v1)
        d1 = 1.0 + val * val
        return _t_chain(val, d1, 2.0 * val * d1, t)
    if name == "exp":
        val = np.exp(v1)
        return _t_chain(val, val, val, t)
    if name == "log":
        if ctx.check and np.any(v1 <= 0.0):
            raise DomainError("log of a nonpositive value", node.src())
        d1 = 1.0 / v1
        return _t_chain(np.log(v1), d1, -d1 / v1, t)
    if name == "sqrt":
        if ctx.check and np.any(v1 < 0.0):
            raise DomainError("sqrt of a negative value", node.src())
        if ctx.check and ctx.order >= 1 and np.any(v1 == 0.0):
            raise DomainError("derivative of sqrt at zero", node.src())
        val = np.sqrt(v1)
        d1 = 0.5 / val
        return _t_chain(val, d1, -0.5 * d1 / v1, t)
    if name == "sinh":
        val = np.sinh(v1)
        return _t_chain(val, np.cosh(v1), val, t)
    if name == "cosh":
        val = np.cosh(v1)
        return _t_chain(val, np.sinh(v1), val, t)
    if name == "tanh":
        val = np.tanh(v1)
        d1 = 1.0 - val * val
        return _t_chain(val, d1, -2.0 * val * d1, t)
    raise AssertionError(f"unhandled function {name}")


def _forward(node: Node, ctx: _Ctx):
    if isinstance(node, Num):
        return _t_const(node.value, ctx)
    if isinstance(node, Var):
        v = ctx.points[:, node.index].copy()
        g = h = None
        if ctx.order >= 1:
            g = np.zeros((ctx.K, ctx.n))
            g[:, node.index] = 1.0
        if ctx.order >= 2:
            h = np.zeros((ctx.K, ctx.n, ctx.n))
        return v, g, h
    if isinstance(node, Neg):
        return _t_neg(_forward(node.child, ctx))
    if isinstance(node, Add):
        return _t_add(_forward(node.left, ctx), _forward(node.right, ctx))
    if isinstance(node, Sub):
        return _t_sub(_forward(node.left, ctx), _forward(node.right, ctx))
    if isinstance(node, Mul):
        return _t_mul(_forward(node.left, ctx), _forward(node.right, ctx))
    if isinstance(node, Div):
        return _t_div(_forward(node.left, ctx), _forward(node.right, ctx), node, ctx)
    if isinstance(node, Pow):
        t1 = _forward(node.base, ctx)
        if node.int_exponent is not None:
            return _t_pow_int(t1, node.int_exponent, node, ctx)
        exp_const = _constant_value(node.exponent)
        if exp_const is not None:
            return _t_pow_const(t1, exp_const, node, ctx)
        # Variable exponent: base^e = exp(e * log(base)).
        if ctx.check and np.any(t1[0] <= 0.0):
            raise DomainError("non-integer power of a nonpositive base", node.src())
        t2 = _forward(node.exponent, ctx)
        tlog = _t_func("log", t1, node, ctx)
        return _t_func("exp", _t_mul(tlog, t2), node, ctx)
    if isinstance(node, Call):
        return _t_func(node.func, _forward(node.arg, ctx), node, ctx)
    raise AssertionError(f"unhandled node {node!r}")


# ---------------------------------------------------------------------------
# Public interface


@dataclass(frozen=True)
class Expression:
    """An immutable parsed expression over an ordered variable list.

    Evaluation and differentiation are pure; instances are safe to share
    across threads.
    """

    root: Node
    variables: tuple[str, ...]

    @property
    def n(self) -> int:
        return len(self.variables)

    def __str__(self) -> str:
        return self.root.src()

    def forward(self, points: np.ndarray, order: int = 0, check: bool = True):
        """Evaluate a batch of points, returning (values, gradients, hessians).

        ``points`` has shape (K, n).  Entries above ``order`` are None.  With
        ``check=False`` domain violations yield non-finite entries instead of
        raising, which lets batched solvers discard bad points cheaply.
        """
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.n:
            raise ValueError(f"expected points of shape (K, {self.n}), got {pts.shape}")
        ctx = _Ctx(pts, order, check)
        with np.errstate(all="ignore"):
            return _forward(self.root, ctx)

    def _single(self, p: np.ndarray, order: int):
        p = np.asarray(p, dtype=float)
        if p.shape != (self.n,):
            raise ValueError(f"expected a point of length {self.n}, got shape {p.shape}")
        v, g, h = self.forward(p[None, :], order=order)
        parts = [v, g, h][: order + 1]
        for part in parts:
            if not np.all(np.isfinite(part)):
                raise DomainError("non-finite result", self.root.src())
        return v, g, h

    def evaluate(self, p) -> float:
        """Value of the expression at a point of length n."""
        v, _, _ = self._single(p, order=0)
        return float(v[0])

    def gradient(self, p) -> np.ndarray:
        """Exact-to-roundoff gradient at a point, shape (n,)."""
        _, g, _ = self._single(p, order=1)
        return g[0]

    def hessian(self, p) -> np.ndarray:
        """Symmetric matrix of second partials at a point, shape (n, n)."""
        _, _, h = self._single(p, order=2)
        return h[0]


def _validate_variables(variables) -> tuple[str, ...]:
    names = tuple(variables)
    seen = set()
    for name in names:
        if not _IDENT_RE.fullmatch(name):
            raise ValueError(f"invalid variable name {name!r}")
        if name in SMOOTH_FUNCTIONS or name in NON_SMOOTH_NAMES:
            raise ValueError(f"variable name {name!r} collides with a function name")
        if name in seen:
            raise ValueError(f"duplicate variable name {name!r}")
        seen.add(name)
    return names


def parse(source: str, variables) -> Expression:
    """Parse ``source`` over the ordered variable list into an Expression."""
    names = _validate_variables(variables)
    if not source or not source.strip():
        raise ParseError("empty expression", 0)
    parser = _Parser(_tokenize(source), {name: i for i, name in enumerate(names)})
    root = parser.expr()
    trailing = parser.peek()
    if trailing.kind != "end":
        raise ParseError(f"unexpected trailing input {trailing.text!r}", trailing.pos)
    return Expression(root, names)
