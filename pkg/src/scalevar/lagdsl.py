"""Small expression language for Lagrangians, potentials, wavefunctions and
symmetry generators: parsing, complex evaluation, exact symbolic
differentiation.

Grammar (whitespace-insensitive, 1-based columns in error messages):

    expr   := term  (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?        right-associative, constant exponent
    atom   := NUMBER | "i" | IDENT | IDENT "(" expr ")" | "(" expr ")"

Variables are t, q1..qd and v1..vd with d declared at parse time; "i" is the
imaginary unit; every other identifier must be a declared parameter or one of
the functions sin, cos, exp, ln, sqrt, abs2, conj.  Exponents must fold to a
real constant.  Evaluation uses complex arithmetic with principal branches
for ln and sqrt; abs2(z) = z*conj(z) evaluates real.  Differentiation through
abs2 and conj is only defined along the real variable t and is rejected for
the complex-valued q and v variables.  Construction applies constant folding
and the 0/1 identities, nothing more.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import ExpressionError, NumericalError, ScaleVarError, ValidationError

__all__ = [
    "Const",
    "Var",
    "Neg",
    "BinOp",
    "Pow",
    "Call",
    "Expr",
    "Bindings",
    "FUNCTIONS",
    "parse",
    "evaluate",
    "diff",
    "format_expr",
    "free_variables",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "power",
    "func",
    "ScalarField",
]

FUNCTIONS = ("sin", "cos", "exp", "ln", "sqrt", "abs2", "conj")

_VAR_RE = re.compile(r"^([qv])([0-9]+)$")
_NUM_RE = re.compile(r"(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Const:
    value: complex


@dataclass(frozen=True)
class Var:
    kind: str  # "t", "q", "v" or "param"
    index: int  # 1-based for q/v, 0 otherwise
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of "+-*/"
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: float


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expr"


Expr = Union[Const, Var, Neg, BinOp, Pow, Call]


def free_variables(e: Expr) -> set:
    """Names of all variables and parameters referenced by e."""
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Neg):
        return free_variables(e.arg)
    if isinstance(e, BinOp):
        return free_variables(e.left) | free_variables(e.right)
    if isinstance(e, Pow):
        return free_variables(e.base)
    if isinstance(e, Call):
        return free_variables(e.arg)
    return set()


# ---------------------------------------------------------------------------
# Folding constructors (constant folding plus 0/1 identities, no more)


def _is_const(e, value=None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is_const(a, 0):
        return b
    if _is_const(b, 0):
        return a
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is_const(b, 0):
        return a
    if _is_const(a, 0):
        return neg(b)
    return BinOp("-", a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if isinstance(b, Const):
        a, b = b, a  # canonical constant on the left
    if isinstance(a, Const):
        if a.value == 0:
            return Const(0)
        if a.value == 1:
            return b
        if isinstance(b, BinOp) and b.op == "*" and isinstance(b.left, Const):
            return mul(Const(a.value * b.left.value), b.right)
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0:
        return Const(a.value / b.value)
    if _is_const(b, 1):
        return a
    return BinOp("/", a, b)


def power(base: Expr, exponent: float) -> Expr:
    exponent = float(exponent)
    if exponent == 0.0:
        return Const(1)
    if exponent == 1.0:
        return base
    if isinstance(base, Const):
        try:
            return Const(_eval_pow(base.value, exponent))
        except ScaleVarError:
            pass
    return Pow(base, exponent)


def func(fn: str, arg: Expr) -> Expr:
    if fn not in FUNCTIONS:
        raise ValidationError(f"unknown function {fn!r}")
    if isinstance(arg, Const):
        try:
            return Const(complex(_apply_fn(fn, arg.value)))
        except ScaleVarError:
            pass
    return Call(fn, arg)


# ---------------------------------------------------------------------------
# Parsing


@dataclass(frozen=True)
class _Token:
    kind: str  # "num", "ident", "op", "end"
    text: str
    column: int  # 1-based


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        ch = text[pos]
        if ch.isspace():
            pos += 1
            continue
        m = _NUM_RE.match(text, pos)
        if m:
            tokens.append(_Token("num", m.group(), pos + 1))
            pos = m.end()
            continue
        m = _IDENT_RE.match(text, pos)
        if m:
            tokens.append(_Token("ident", m.group(), pos + 1))
            pos = m.end()
            continue
        if ch in "+-*/^()":
            tokens.append(_Token("op", ch, pos + 1))
            pos += 1
            continue
        raise ExpressionError(f"unexpected character {ch!r}", pos + 1)
    tokens.append(_Token("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, tokens, dim, params):
        self.tokens = tokens
        self.pos = 0
        self.dim = dim
        self.params = params

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def take(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str) -> _Token:
        tok = self.peek()
        if tok.kind == "op" and tok.text == op:
            return self.take()
        raise ExpressionError(f"expected {op!r}, found {tok.text or 'end of input'!r}", tok.column)

    def expr(self) -> Expr:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.take().text
            rhs = self.term()
            node = add(node, rhs) if op == "+" else sub(node, rhs)
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.take().text
            rhs = self.unary()
            node = mul(node, rhs) if op == "*" else div(node, rhs)
        return node

    def unary(self) -> Expr:
        if self.peek().kind == "op" and self.peek().text == "-":
            self.take()
            return neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            caret = self.take()
            exp_node = self.unary()
            if not isinstance(exp_node, Const) or exp_node.value.imag != 0:
                raise ExpressionError("exponent must fold to a real constant", caret.column)
            return power(base, exp_node.value.real)
        return base

    def atom(self) -> Expr:
        tok = self.take()
        if tok.kind == "num":
            return Const(float(tok.text))
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        if tok.kind == "ident":
            name = tok.text
            if name in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return func(name, arg)
            return self.resolve(name, tok.column)
        raise ExpressionError(f"unexpected token {tok.text or 'end of input'!r}", tok.column)

    def resolve(self, name: str, column: int) -> Expr:
        if name == "t":
            return Var("t", 0, "t")
        if name == "i":
            return Const(1j)
        m = _VAR_RE.match(name)
        if m:
            idx = int(m.group(2))
            if not 1 <= idx <= self.dim:
                raise ExpressionError(
                    f"index out of range: {name} exceeds declared dimension {self.dim}", column
                )
            return Var(m.group(1), idx, f"{m.group(1)}{idx}")
        if name in self.params:
            return Var("param", 0, name)
        raise ExpressionError(f"unknown identifier {name!r}", column)


def parse(text: str, dim: int = 1, param_names=()) -> Expr:
    """Parse an expression over t, q1..qd, v1..vd and the named parameters."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("empty expression")
    params = set(param_names)
    for name in params:
        if name in ("t", "i") or name in FUNCTIONS or _VAR_RE.match(name):
            raise ValidationError(f"parameter name {name!r} shadows a reserved identifier")
    parser = _Parser(_tokenize(text), int(dim), params)
    node = parser.expr()
    trailing = parser.peek()
    if trailing.kind != "end":
        raise ExpressionError(f"unexpected token {trailing.text!r}", trailing.column)
    return node


# ---------------------------------------------------------------------------
# Evaluation


@dataclass(frozen=True)
class Bindings:
    """Values for one evaluation: time, position/velocity components, parameters.

    Components may be scalars or equally shaped numpy arrays; arrays broadcast
    through the whole expression.
    """

    t: object = 0.0
    q: tuple = ()
    v: tuple = ()
    params: dict = field(default_factory=dict)


def _coerce(x):
    if isinstance(x, np.ndarray):
        return x.astype(np.complex128, copy=False)
    return complex(x)


def _ipow(z, n: int):
    if n < 0:
        if np.any(z == 0):
            raise NumericalError("zero base raised to a negative power")
        return 1.0 / _ipow(z, -n)
    try:
        return z**n
    except ZeroDivisionError:  # pragma: no cover - guarded above
        raise NumericalError("zero base raised to a negative power") from None


def _eval_pow(z, c: float):
    if float(c).is_integer():
        return _ipow(z, int(c))
    return np.power(_coerce(z), c)


def _apply_fn(fn: str, z):
    if fn == "sin":
        return np.sin(z)
    if fn == "cos":
        return np.cos(z)
    if fn == "exp":
        return np.exp(z)
    if fn == "ln":
        if np.any(z == 0):
            raise NumericalError("ln(0)")
        return np.log(z)
    if fn == "sqrt":
        return np.sqrt(z)
    if fn == "abs2":
        return (z * np.conjugate(z)).real
    if fn == "conj":
        return np.conjugate(z)
    raise ValidationError(f"unknown function {fn!r}")  # pragma: no cover


def evaluate(e: Expr, b: Bindings):
    """Evaluate to a complex scalar, or an array when bindings carry arrays."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        if e.kind == "t":
            return _coerce(b.t)
        if e.kind == "param":
            if e.name not in b.params:
                raise ValidationError(f"unbound parameter {e.name!r}")
            return _coerce(b.params[e.name])
        seq = b.q if e.kind == "q" else b.v
        if len(seq) < e.index:
            raise ValidationError(
                f"binding supplies {len(seq)} {e.kind} components, {e.name} needs {e.index}"
            )
        return _coerce(seq[e.index - 1])
    if isinstance(e, Neg):
        return -evaluate(e.arg, b)
    if isinstance(e, BinOp):
        lhs = evaluate(e.left, b)
        rhs = evaluate(e.right, b)
        if e.op == "+":
            return lhs + rhs
        if e.op == "-":
            return lhs - rhs
        if e.op == "*":
            return lhs * rhs
        if np.any(rhs == 0):
            raise NumericalError("division by zero")
        return lhs / rhs
    if isinstance(e, Pow):
        return _eval_pow(evaluate(e.base, b), e.exponent)
    return _apply_fn(e.fn, evaluate(e.arg, b))


# ---------------------------------------------------------------------------
# Differentiation


def _parse_var(var: str):
    if var == "t":
        return "t", 0
    m = _VAR_RE.match(var)
    if m:
        return m.group(1), int(m.group(2))
    raise ValidationError(f"cannot differentiate with respect to {var!r}")


def diff(e: Expr, var: str) -> Expr:
    """Exact partial derivative with respect to "t", "qK" or "vK", folded."""
    kind, index = _parse_var(var)
    return _diff(e, kind, index)


def _diff(e: Expr, kind: str, index: int) -> Expr:
    if isinstance(e, Const):
        return Const(0)
    if isinstance(e, Var):
        return Const(1) if (e.kind == kind and e.index == index) else Const(0)
    if isinstance(e, Neg):
        return neg(_diff(e.arg, kind, index))
    if isinstance(e, BinOp):
        da = _diff(e.left, kind, index)
        db = _diff(e.right, kind, index)
        if e.op == "+":
            return add(da, db)
        if e.op == "-":
            return sub(da, db)
        if e.op == "*":
            return add(mul(da, e.right), mul(e.left, db))
        return div(sub(mul(da, e.right), mul(e.left, db)), power(e.right, 2.0))
    if isinstance(e, Pow):
        du = _diff(e.base, kind, index)
        return mul(mul(Const(e.exponent), power(e.base, e.exponent - 1.0)), du)
    u = e.arg
    du = _diff(u, kind, index)
    if e.fn == "sin":
        return mul(func("cos", u), du)
    if e.fn == "cos":
        return neg(mul(func("sin", u), du))
    if e.fn == "exp":
        return mul(e, du)
    if e.fn == "ln":
        return div(du, u)
    if e.fn == "sqrt":
        return div(du, mul(Const(2), func("sqrt", u)))
    # abs2 and conj are real-differentiable only; t is the one real variable
    if kind != "t":
        raise ExpressionError(
            f"cannot differentiate {e.fn} with respect to the complex variable {kind}{index}"
        )
    if e.fn == "conj":
        return func("conj", du)
    return add(mul(u, func("conj", du)), mul(func("conj", u), du))


# ---------------------------------------------------------------------------
# Printing


_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _fmt_float(x: float) -> str:
    return repr(float(x))


def _fmt_const(v: complex):
    re_, im = v.real, v.imag
    if im == 0:
        s = _fmt_float(re_)
        return s, (_PREC_NEG if s.startswith("-") else _PREC_ATOM)
    if re_ == 0:
        if im == 1:
            return "i", _PREC_ATOM
        if im == -1:
            return "-i", _PREC_NEG
        s = f"{_fmt_float(im)}*i"
        return s, (_PREC_NEG if s.startswith("-") else _PREC_MUL)
    sign = "-" if im < 0 else "+"
    tail = "i" if abs(im) == 1 else f"{_fmt_float(abs(im))}*i"
    return f"({_fmt_float(re_)}{sign}{tail})", _PREC_ATOM


def _wrap(child: Expr, min_prec: int) -> str:
    s, prec = _fmt(child)
    return f"({s})" if prec < min_prec else s


def _fmt(e: Expr):
    if isinstance(e, Const):
        return _fmt_const(e.value)
    if isinstance(e, Var):
        return e.name, _PREC_ATOM
    if isinstance(e, Neg):
        return "-" + _wrap(e.arg, _PREC_NEG), _PREC_NEG
    if isinstance(e, BinOp):
        if e.op in "+-":
            lvl = _PREC_ADD
        else:
            lvl = _PREC_MUL
        return _wrap(e.left, lvl) + e.op + _wrap(e.right, lvl + 1), lvl
    if isinstance(e, Pow):
        return f"{_wrap(e.base, _PREC_ATOM)}^{_fmt_float(e.exponent)}", _PREC_POW
    return f"{e.fn}({_fmt(e.arg)[0]})", _PREC_ATOM


def format_expr(e: Expr) -> str:
    """Render an AST to text; reparsing yields a structurally identical AST."""
    return _fmt(e)[0]


# ---------------------------------------------------------------------------
# Scalar fields (value, time derivative, gradient, Hessian)


class ScalarField:
    """Twice-differentiable scalar function of (t, q1..qd) with symbolic partials.

    Velocity variables are rejected; the Hessian is the full matrix of second
    q-derivatives, precomputed symbolically.
    """

    def __init__(self, expr: Expr, dim: int, params=None):
        self.params = dict(params or {})
        self.dim = int(dim)
        names = free_variables(expr)
        if any(name.startswith("v") and _VAR_RE.match(name) for name in names):
            raise ValidationError("scalar fields may not reference velocity variables")
        self.expr = expr
        self.expr_t = diff(expr, "t")
        self.expr_grad = tuple(diff(expr, f"q{k + 1}") for k in range(self.dim))
        self.expr_hess = tuple(
            tuple(diff(g, f"q{j + 1}") for j in range(self.dim)) for g in self.expr_grad
        )

    @classmethod
    def from_text(cls, text: str, dim: int = 1, params=None) -> "ScalarField":
        params = dict(params or {})
        return cls(parse(text, dim, param_names=tuple(params)), dim, params)

    def _bind(self, t, q) -> Bindings:
        return Bindings(t=t, q=tuple(q), v=(), params=self.params)

    def value(self, t, q):
        return evaluate(self.expr, self._bind(t, q))

    def time_derivative(self, t, q):
        return evaluate(self.expr_t, self._bind(t, q))

    def gradient(self, t, q) -> np.ndarray:
        b = self._bind(t, q)
        return np.array([evaluate(g, b) for g in self.expr_grad], dtype=np.complex128)

    def hessian(self, t, q) -> np.ndarray:
        b = self._bind(t, q)
        return np.array(
            [[evaluate(hkj, b) for hkj in row] for row in self.expr_hess], dtype=np.complex128
        )
