"""Small expression language for weights and potentials.

Grammar (EBNF)::

    expr      = term { ("+" | "-") term } ;
    term      = unary { ("*" | "/") unary } ;
    unary     = ("-" | "+") unary | power ;
    power     = atom [ ("^" | "**") unary ] ;
    atom      = number | "x" | "e" | "pi"
              | func "(" expr ")"
              | "piecewise" "(" expr { "," number "," expr } ")"
              | "(" expr ")" ;
    func      = "abs" | "sgn" | "log" | "log1p" | "exp" | "sqrt" ;

``piecewise(f0, b1, f1, b2, f2)`` evaluates ``f0`` for ``x < b1``, ``f1`` for
``b1 < x < b2`` and ``f2`` for ``x > b2``.  Breakpoints must be strictly
increasing.  Evaluation is vectorised over numpy arrays; singular points
evaluate to ``inf``/``nan`` rather than raising.  ``log1p`` exists so that
antiderivatives can be written without cancellation near their zeros.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Expr",
    "ParseError",
    "parse",
    "const",
    "var",
]


class ParseError(ValueError):
    """Syntax error in an expression, with the offending character offset."""

    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        pointer = f"\n  {text}\n  {' ' * position}^" if text else ""
        super().__init__(f"{message} at position {position}{pointer}")


_FUNCS = {
    "abs": np.abs,
    "sgn": np.sign,
    "log": np.log,
    "log1p": np.log1p,
    "exp": np.exp,
    "sqrt": np.sqrt,
}

_BINOPS = {"+", "-", "*", "/", "^"}


@dataclass(frozen=True)
class Expr:
    """Immutable expression tree node.

    ``kind`` is one of ``const``, ``x``, ``neg``, ``+``, ``-``, ``*``, ``/``,
    ``^``, a function name from ``abs/sgn/log/log1p/exp/sqrt``, or ``piecewise``.
    For ``piecewise`` the children are ``(arg, f0, f1, ...)`` and
    ``breaks`` holds the breakpoints in terms of ``arg``.
    """

    kind: str
    children: tuple["Expr", ...] = ()
    value: float = 0.0
    breaks: tuple[float, ...] = field(default=())

    # -- evaluation -------------------------------------------------------
    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            out = self._eval(x)
        if np.shape(out) != x.shape:
            out = np.broadcast_to(out, x.shape).copy()
        return out

    def _eval(self, x):
        k = self.kind
        if k == "const":
            return np.full_like(x, self.value)
        if k == "x":
            return x
        if k == "neg":
            return -self.children[0]._eval(x)
        if k in _BINOPS:
            lhs = self.children[0]._eval(x)
            rhs = self.children[1]._eval(x)
            if k == "+":
                return lhs + rhs
            if k == "-":
                return lhs - rhs
            if k == "*":
                return lhs * rhs
            if k == "/":
                return lhs / rhs
            return np.power(lhs, rhs)
        if k in _FUNCS:
            return _FUNCS[k](self.children[0]._eval(x))
        if k == "piecewise":
            arg = self.children[0]._eval(x)
            idx = np.searchsorted(np.asarray(self.breaks), arg, side="right")
            out = np.empty_like(x)
            for i, branch in enumerate(self.children[1:]):
                mask = idx == i
                if np.any(mask):
                    out[mask] = branch._eval(x[mask])
            return out
        raise ValueError(f"unknown node kind {k!r}")

    # -- structure --------------------------------------------------------
    def substitute(self, scale: float, shift: float) -> "Expr":
        """Return the expression with ``x`` replaced by ``scale*x + shift``."""
        if self.kind == "x":
            inner: Expr = Expr("x")
            if scale != 1.0:
                inner = Expr("*", (const(scale), inner))
            if shift != 0.0:
                inner = Expr("+", (inner, const(shift)))
            return inner
        if self.kind == "const":
            return self
        return Expr(
            self.kind,
            tuple(c.substitute(scale, shift) for c in self.children),
            self.value,
            self.breaks,
        )

    def affine(self) -> tuple[float, float] | None:
        """``(alpha, beta)`` when the node equals ``alpha*x + beta``, else None."""
        k = self.kind
        if k == "const":
            return 0.0, self.value
        if k == "x":
            return 1.0, 0.0
        if k == "neg":
            inner = self.children[0].affine()
            return None if inner is None else (-inner[0], -inner[1])
        if k in ("+", "-", "*", "/"):
            lhs, rhs = self.children[0].affine(), self.children[1].affine()
            if lhs is None or rhs is None:
                return None
            if k == "+":
                return lhs[0] + rhs[0], lhs[1] + rhs[1]
            if k == "-":
                return lhs[0] - rhs[0], lhs[1] - rhs[1]
            if k == "*":
                if lhs[0] == 0.0:
                    return lhs[1] * rhs[0], lhs[1] * rhs[1]
                if rhs[0] == 0.0:
                    return rhs[1] * lhs[0], rhs[1] * lhs[1]
                return None
            if rhs[0] == 0.0 and rhs[1] != 0.0:
                return lhs[0] / rhs[1], lhs[1] / rhs[1]
        return None

    def fold_affine(self) -> "Expr":
        """Collapse affine subtrees to ``alpha*x + beta``.

        After a shift ``x -> x0 - s`` this turns ``x0 - (x0 - s)`` into ``s``
        exactly, so the expression stays accurate for ``s`` below ulp(x0).
        """
        coef = self.affine()
        if coef is not None and self.kind not in ("const", "x"):
            alpha, beta = coef
            if alpha == 0.0:
                return const(beta)
            node: Expr = Expr("x") if alpha == 1.0 else Expr("*", (const(alpha), Expr("x")))
            return node if beta == 0.0 else Expr("+", (node, const(beta)))
        if not self.children:
            return self
        return Expr(self.kind, tuple(c.fold_affine() for c in self.children), self.value, self.breaks)

    def breakpoints(self) -> list[float]:
        """Breakpoints of every ``piecewise`` node, as x-locations."""
        pts: set[float] = set()
        self._collect_breaks(pts)
        return sorted(pts)

    def _collect_breaks(self, pts: set[float]) -> None:
        if self.kind == "piecewise":
            arg = self.children[0]
            # piecewise arguments are affine in x by construction
            a0 = float(arg(np.array([0.0]))[0])
            a1 = float(arg(np.array([1.0]))[0])
            slope = a1 - a0
            if slope == 0.0:
                raise ValueError("piecewise argument does not depend on x")
            for b in self.breaks:
                pts.add((b - a0) / slope)
        for c in self.children:
            c._collect_breaks(pts)

    def __str__(self) -> str:
        return _render(self)

    # convenience algebra used by the weight transforms
    def __add__(self, other):
        return Expr("+", (self, _wrap(other)))

    def __radd__(self, other):
        return Expr("+", (_wrap(other), self))

    def __sub__(self, other):
        return Expr("-", (self, _wrap(other)))

    def __rsub__(self, other):
        return Expr("-", (_wrap(other), self))

    def __mul__(self, other):
        return Expr("*", (self, _wrap(other)))

    def __rmul__(self, other):
        return Expr("*", (_wrap(other), self))

    def __truediv__(self, other):
        return Expr("/", (self, _wrap(other)))

    def __neg__(self):
        return Expr("neg", (self,))


def const(value: float) -> Expr:
    return Expr("const", value=float(value))


def var() -> Expr:
    return Expr("x")


def piecewise(branches: list[Expr], breaks: list[float], arg: Expr | None = None) -> Expr:
    if len(branches) != len(breaks) + 1:
        raise ValueError("piecewise needs one more branch than breakpoints")
    if any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])):
        raise ValueError("piecewise breakpoints must be strictly increasing")
    return Expr("piecewise", (arg or var(), *branches), breaks=tuple(float(b) for b in breaks))


def _wrap(obj) -> Expr:
    return obj if isinstance(obj, Expr) else const(obj)


def _render(e: Expr) -> str:
    k = e.kind
    if k == "const":
        v = e.value
        if v == math.e:
            return "e"
        if v == math.pi:
            return "pi"
        return repr(v) if v >= 0 else f"({v!r})"
    if k == "x":
        return "x"
    if k == "neg":
        return f"(-{_render(e.children[0])})"
    if k in _BINOPS:
        return f"({_render(e.children[0])}{k}{_render(e.children[1])})"
    if k in _FUNCS:
        return f"{k}({_render(e.children[0])})"
    if k == "piecewise":
        arg = e.children[0]
        parts = [_render(e.children[1])]
        for b, br in zip(e.breaks, e.children[2:]):
            parts += [repr(b), _render(br)]
        body = ", ".join(parts)
        if arg.kind == "x":
            return f"piecewise({body})"
        # fold a non-trivial argument back into x-breakpoints
        return _render_shifted_piecewise(e)
    raise ValueError(k)


def _render_shifted_piecewise(e: Expr) -> str:
    arg = e.children[0]
    a0 = float(arg(np.array([0.0]))[0])
    slope = float(arg(np.array([1.0]))[0]) - a0
    xb = [(b - a0) / slope for b in e.breaks]
    branches = [_render(c) for c in e.children[1:]]
    if slope < 0:
        xb = xb[::-1]
        branches = branches[::-1]
    parts = [branches[0]]
    for b, br in zip(xb, branches[1:]):
        parts += [repr(b), br]
    return f"piecewise({', '.join(parts)})"


# -- parser ---------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>\*\*|[-+*/^(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[start]!r}", start, text)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        tok = self.take()
        if tok[1] != value:
            raise ParseError(f"expected {value!r}, got {tok[1] or 'end of input'!r}", tok[2], self.text)
        return tok

    def parse(self) -> Expr:
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected token {tok[1]!r}", tok[2], self.text)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = Expr(op, (node, self.term()))
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = Expr(op, (node, self.unary()))
        return node

    def unary(self) -> Expr:
        if self.peek()[1] == "-":
            self.take()
            return Expr("neg", (self.unary(),))
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[1] in ("^", "**"):
            self.take()
            return Expr("^", (base, self.unary()))
        return base

    def number(self) -> float:
        sign = 1.0
        while self.peek()[1] in ("-", "+"):
            if self.take()[1] == "-":
                sign = -sign
        tok = self.take()
        if tok[0] != "num":
            raise ParseError("expected a numeric breakpoint", tok[2], self.text)
        return sign * float(tok[1])

    def atom(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return const(float(val))
        if kind == "name":
            if val == "x":
                return var()
            if val == "e":
                return const(math.e)
            if val == "pi":
                return const(math.pi)
            if val in _FUNCS:
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                return Expr(val, (inner,))
            if val == "piecewise":
                self.expect("(")
                branches = [self.expr()]
                breaks = []
                while self.peek()[1] == ",":
                    self.take()
                    bpos = self.peek()[2]
                    breaks.append(self.number())
                    if len(breaks) > 1 and breaks[-1] <= breaks[-2]:
                        raise ParseError("piecewise breakpoints must increase", bpos, self.text)
                    self.expect(",")
                    branches.append(self.expr())
                self.expect(")")
                if not breaks:
                    raise ParseError("piecewise needs at least one breakpoint", pos, self.text)
                return piecewise(branches, breaks)
            raise ParseError(f"unknown name {val!r}", pos, self.text)
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ParseError(f"unexpected token {val or 'end of input'!r}", pos, self.text)


def parse(text: str) -> Expr:
    """Parse ``text`` into an :class:`Expr`."""
    return _Parser(text).parse()
