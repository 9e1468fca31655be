"""Plain-text grammar shared by forms, operators and CLI element input.

Terms look like ``3/2*x1^2*x2*xi1^xi3``: rational (or Gaussian-rational in
parentheses) coefficient, ``*``-separated even generators with integer
powers, odd generators joined by ``^``.  Operator text extends the same
grammar with ``d<name>`` derivative tokens (``dx1``, ``dy``, ``dxi1``) and
transversal generators ``b1..``; the parser composes factors left to
right, so non-normal input like ``dx*x`` means the operator product.

Printing is canonical and parsing the printed form returns the identical
element, bit-exact.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .algebra import Algebra, Elt
from .scalars import GaussRat, format_scalar

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:/\d+)?)|(?P<name>[A-Za-z][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*^()@;]))"
)


def tokenize(text):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise GrammarError(f"cannot tokenize {text[pos:]!r}")
        if m.lastgroup == "num":
            out.append(("num", m.group("num")))
        elif m.lastgroup == "name":
            out.append(("name", m.group("name")))
        else:
            out.append((m.group("op"), m.group("op")))
        pos = m.end()
    out.append(("end", ""))
    return out


class GrammarError(ValueError):
    pass


class Parser:
    """Recursive-descent parser over an atom environment.

    ``atoms`` maps generator names to values; ``hooks`` supplies the ring
    operations of the target type (forms multiply, operators compose).
    """

    def __init__(self, atoms, hooks):
        self.atoms = atoms
        self.hooks = hooks

    def parse(self, text):
        self.toks = tokenize(text)
        self.k = 0
        v = self._expr()
        if self._peek()[0] != "end":
            raise GrammarError(f"trailing input at {self._peek()[1]!r}")
        return v

    def _peek(self):
        return self.toks[self.k]

    def _next(self):
        t = self.toks[self.k]
        self.k += 1
        return t

    def _expr(self):
        sign = 1
        while self._peek()[0] in ("+", "-"):
            if self._next()[0] == "-":
                sign = -sign
        v = self._term()
        if sign < 0:
            v = self.hooks["neg"](v)
        while self._peek()[0] in ("+", "-"):
            op = self._next()[0]
            t = self._term()
            if op == "-":
                t = self.hooks["neg"](t)
            v = self.hooks["add"](v, t)
        return v

    def _term(self):
        v = self._factor()
        while self._peek()[0] == "*":
            self._next()
            v = self.hooks["mul"](v, self._factor())
        return v

    def _factor(self):
        v = self._primary()
        while self._peek()[0] == "^":
            self._next()
            kind, val = self._peek()
            if kind == "num":
                self._next()
                if "/" in val:
                    raise GrammarError("fractional exponent")
                v = self.hooks["pow"](v, int(val))
            else:
                v = self.hooks["mul"](v, self._primary())
        return v

    def _primary(self):
        kind, val = self._next()
        if kind == "num":
            return self.hooks["scalar"](Fraction(val))
        if kind == "name":
            if val not in self.atoms:
                raise GrammarError(f"unknown generator {val!r}")
            return self.atoms[val]
        if kind == "(":
            v = self._expr()
            if self._next()[0] != ")":
                raise GrammarError("missing )")
            return v
        if kind == "-":
            return self.hooks["neg"](self._primary())
        if kind == "+":
            return self._primary()
        raise GrammarError(f"unexpected token {val!r}")


# -- forms ------------------------------------------------------------


def form_atoms(alg: Algebra, complex_typed=False):
    atoms = {}
    for i, nm in enumerate(alg.even_names):
        atoms[nm] = alg.even_gen(i)
    for a, nm in enumerate(alg.odd_names):
        atoms[nm] = alg.odd_gen(a)
    if complex_typed:
        atoms["i"] = alg.scalar(GaussRat(0, 1))
    return atoms


def form_hooks(alg: Algebra):
    return {
        "add": lambda a, b: a + b,
        "neg": lambda a: -a,
        "mul": lambda a, b: a * b,
        "pow": lambda a, k: a**k,
        "scalar": lambda c: alg.scalar(c),
    }


def parse_form(text, alg: Algebra, complex_typed=False) -> Elt:
    return Parser(form_atoms(alg, complex_typed), form_hooks(alg)).parse(text)


def _term_string(alg: Algebra, key, coeff):
    mask, exps = key
    pieces = []
    for i, e in enumerate(exps):
        if e == 1:
            pieces.append(alg.even_names[i])
        elif e:
            pieces.append(f"{alg.even_names[i]}^{e}")
    odd = [alg.odd_names[a] for a in range(alg.n_odd) if mask >> a & 1]
    if odd:
        pieces.append("^".join(odd))
    cs = format_scalar(coeff)
    if not pieces:
        return cs
    if cs == "1":
        return "*".join(pieces)
    if cs == "-1":
        return "-" + "*".join(pieces)
    return cs + "*" + "*".join(pieces)


def format_elt(e: Elt) -> str:
    if not e.terms:
        return "0"
    parts = []
    for key in e.sorted_keys():
        s = _term_string(e.alg, key, e.terms[key])
        if not parts:
            parts.append(s)
        elif s.startswith("-"):
            parts.append(" - " + s[1:])
        else:
            parts.append(" + " + s)
    return "".join(parts)
