"""Closed-form coefficient expressions and the structural checks on a, eps, sigma.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' integer)*
    atom   := number | 'x' | 'y' | 'pi' | func '(' expr ')' | '(' expr ')'
    func   := 'sin' | 'cos' | 'exp'

``^`` binds tighter than unary minus, so ``-x^2`` reads as ``-(x^2)``.
Exponents must be integer literals, optionally signed or parenthesised.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

AXIS_NAMES = ("x", "y")
FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}


class ExprError(ValueError):
    """Base class for expression failures."""


class ParseError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class EvalError(ExprError):
    pass


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    axis: int


@dataclass(frozen=True)
class Pi:
    pass


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Const, Var, Pi, Neg, BinOp, Pow, Call]


# ---------------------------------------------------------------------------
# Parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


@dataclass
class _Token:
    kind: str
    text: str
    offset: int


def _tokenize(src: str) -> list[_Token]:
    tokens = []
    pos = 0
    raw = src.encode("utf-8")
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(src, pos)
        if m is None or m.end() == pos:
            stripped = len(src[pos:]) - len(src[pos:].lstrip())
            bad = pos + stripped
            raise ParseError(f"unexpected character {src[bad]!r}", len(src[:bad].encode("utf-8")))
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append(_Token(kind, m.group(kind), len(src[:start].encode("utf-8"))))
        pos = m.end()
    tokens.append(_Token("end", "", len(raw)))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.tokens = _tokenize(src)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> None:
        if self.tok.text != text:
            found = self.tok.text or "end of input"
            raise ParseError(f"expected {text!r}, found {found!r}", self.tok.offset)
        self.advance()

    def parse(self) -> Expr:
        node = self.expr()
        if self.tok.kind != "end":
            raise ParseError(f"unexpected token {self.tok.text!r}", self.tok.offset)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.tok.text in ("+", "-"):
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.tok.text in ("*", "/"):
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        if self.tok.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        node = self.atom()
        while self.tok.text == "^":
            self.advance()
            node = Pow(node, self.exponent())
        return node

    def exponent(self) -> int:
        start = self.tok
        depth = 0
        while self.tok.text == "(":
            self.advance()
            depth += 1
        sign = 1
        if self.tok.text in ("+", "-"):
            sign = -1 if self.advance().text == "-" else 1
        t = self.tok
        if t.kind != "num":
            raise ParseError("exponent must be an integer literal", start.offset)
        if not re.fullmatch(r"\d+", t.text):
            raise ParseError(f"non-integer exponent {t.text!r}", t.offset)
        self.advance()
        for _ in range(depth):
            self.expect(")")
        return sign * int(t.text)

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Const(float(t.text))
        if t.kind == "name":
            self.advance()
            if t.text in AXIS_NAMES:
                return Var(AXIS_NAMES.index(t.text))
            if t.text == "pi":
                return Pi()
            if t.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(t.text, arg)
            raise ParseError(f"unknown identifier {t.text!r}", t.offset)
        if t.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        found = t.text or "end of input"
        raise ParseError(f"unexpected {found!r}", t.offset)


def parse(src: str) -> Expr:
    """Parse ``src`` into an expression tree."""
    return _Parser(src).parse()


def as_expr(value: Union[str, float, int, Expr]) -> Expr:
    if isinstance(value, str):
        return parse(value)
    if isinstance(value, (int, float)):
        return Const(float(value))
    return value


# ---------------------------------------------------------------------------
# Printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_string(node: Expr) -> str:
    """Render an expression that parses back to an equivalent tree."""
    return _fmt(node, 0)


def _fmt(node: Expr, ctx: int) -> str:
    # ctx: 0 top, 1 additive, 2 multiplicative, 3 unary, 4 power base
    if isinstance(node, Const):
        s = repr(node.value)
        if s in ("inf", "nan", "-inf"):
            raise ExprError(f"cannot print non-finite constant {s}")
        return f"({s})" if node.value < 0 else s
    if isinstance(node, Var):
        return AXIS_NAMES[node.axis]
    if isinstance(node, Pi):
        return "pi"
    if isinstance(node, Call):
        return f"{node.func}({_fmt(node.arg, 0)})"
    if isinstance(node, Pow):
        exp = str(node.exponent) if node.exponent >= 0 else f"({node.exponent})"
        return f"{_fmt(node.base, 4)}^{exp}"
    if isinstance(node, Neg):
        s = "-" + _fmt(node.operand, 3)
        return f"({s})" if ctx >= 3 else s
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        # left-associative: the right operand needs parens at equal precedence
        s = f"{_fmt(node.left, p)} {node.op} {_fmt(node.right, p + 1)}"
        return f"({s})" if ctx > p else s
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# Evaluation


def variables(node: Expr) -> set[int]:
    """Axis indices referenced by ``node``."""
    if isinstance(node, Var):
        return {node.axis}
    if isinstance(node, Neg):
        return variables(node.operand)
    if isinstance(node, Call):
        return variables(node.arg)
    if isinstance(node, Pow):
        return variables(node.base)
    if isinstance(node, BinOp):
        return variables(node.left) | variables(node.right)
    return set()


def evaluate(node: Expr, point: Sequence[float]) -> float:
    """Evaluate at a single point with coordinates ``point``."""
    coords = [np.asarray(float(c)) for c in point]
    return float(evaluate_array(node, coords))


def evaluate_array(node: Expr, coords: Sequence[np.ndarray]) -> np.ndarray:
    """Vectorised evaluation; ``coords[i]`` holds the i-th coordinate of every point.

    Raises EvalError on division by zero or when the expression uses an axis
    beyond ``len(coords)``.
    """
    used = variables(node)
    if used and max(used) >= len(coords):
        raise EvalError(
            f"expression uses axis {AXIS_NAMES[max(used)]!r} but the domain has dimension {len(coords)}"
        )
    coords = [np.asarray(c, dtype=float) for c in coords]
    shape = np.broadcast_shapes(*(c.shape for c in coords)) if coords else ()
    with np.errstate(all="ignore"):
        out = _eval(node, coords)
    return np.broadcast_to(out, shape).astype(float, copy=True)


def _eval(node: Expr, coords):
    if isinstance(node, Const):
        return np.float64(node.value)
    if isinstance(node, Var):
        return coords[node.axis]
    if isinstance(node, Pi):
        return np.float64(math.pi)
    if isinstance(node, Neg):
        return -_eval(node.operand, coords)
    if isinstance(node, Call):
        return FUNCTIONS[node.func](_eval(node.arg, coords))
    if isinstance(node, Pow):
        base = _eval(node.base, coords)
        if node.exponent < 0:
            if np.any(base == 0):
                raise EvalError("division by zero (negative power of zero)")
            return 1.0 / base ** (-node.exponent)
        return base**node.exponent
    if isinstance(node, BinOp):
        a = _eval(node.left, coords)
        b = _eval(node.right, coords)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if np.any(b == 0):
            raise EvalError("division by zero")
        return a / b
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# Coefficients


@dataclass(frozen=True)
class CoeffSet:
    """Diagonal conductivity ``a``, permittivity ``eps`` and conductivity ``sigma``.

    ``a`` holds one expression per axis; a scalar coefficient repeats the same
    expression. ``lam`` is the declared ellipticity constant (>= 1).
    """

    a: tuple
    eps: Expr
    sigma: Expr
    lam: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(as_expr(e) for e in self.a))
        object.__setattr__(self, "eps", as_expr(self.eps))
        object.__setattr__(self, "sigma", as_expr(self.sigma))
        if not self.lam >= 1.0:
            raise ValueError(f"lambda must be >= 1, got {self.lam}")
        if len(self.a) not in (1, 2):
            raise ValueError("a must have one entry per axis (d = 1 or 2)")

    @classmethod
    def from_strings(cls, a, eps="1", sigma="0", lam=2.0, dim=None) -> "CoeffSet":
        if isinstance(a, str):
            a = [a] * (dim or 1)
        return cls(tuple(parse(s) for s in a), parse(eps), parse(sigma), float(lam))

    @property
    def dim(self) -> int:
        return len(self.a)

    @property
    def lossless(self) -> bool:
        return isinstance(self.sigma, Const) and self.sigma.value == 0.0


@dataclass
class ValidationReport:
    passed: bool
    checked_points: int = 0
    violation: dict | None = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checked_points": self.checked_points, "violation": self.violation}


def _sample_sets(grid):
    """Nodes plus the flux half-nodes along every axis, as coordinate tuples."""
    nodes = grid.coords()
    sets = [("node", nodes)]
    for ax in range(grid.dim):
        sets.append((f"half-node axis {AXIS_NAMES[ax]}", grid.half_node_coords(ax)))
    return sets


def validate_coefficients(coeffs: CoeffSet, grid) -> ValidationReport:
    """Check lam^-1 <= a_jj, eps <= lam and 0 <= sigma <= lam at nodes and half-nodes.

    Only the points the discrete operator reads are sampled; refining the grid
    tightens the check. A failed evaluation (e.g. a pole) is reported as a
    violation, never raised.
    """
    if coeffs.dim != grid.dim:
        return ValidationReport(False, 0, {"bound": "dimension", "message":
                                           f"a has {coeffs.dim} entries for a {grid.dim}-D grid"})
    lam = coeffs.lam
    checks = [(f"a[{AXIS_NAMES[j]}]", e, 1.0 / lam, lam) for j, e in enumerate(coeffs.a)]
    checks.append(("eps", coeffs.eps, 1.0 / lam, lam))
    checks.append(("sigma", coeffs.sigma, 0.0, lam))
    count = 0
    for where, pts in _sample_sets(grid):
        for name, expr, lo, hi in checks:
            try:
                vals = evaluate_array(expr, pts)
            except EvalError as exc:
                return ValidationReport(False, count, {"coefficient": name, "bound": "evaluable",
                                                       "where": where, "message": str(exc)})
            count += vals.size
            bad = ~np.isfinite(vals) | (vals < lo) | (vals > hi)
            if np.any(bad):
                i = int(np.flatnonzero(bad.ravel())[0])
                v = float(vals.ravel()[i])
                if not np.isfinite(v):
                    bound = "finite"
                elif v < lo:
                    bound = f"{'lambda^-1' if lo > 0 else '0'} <= {name}"
                else:
                    bound = f"{name} <= lambda"
                point = [float(np.ravel(c)[i]) for c in pts]
                return ValidationReport(False, count, {"coefficient": name, "bound": bound,
                                                       "where": where, "point": point, "value": v})
    return ValidationReport(True, count)
