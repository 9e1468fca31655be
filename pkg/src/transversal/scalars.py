"""Exact scalars: rationals and Gaussian rationals.

Real-typed models compute with plain ``fractions.Fraction``.  Complex-typed
models use :class:`GaussRat`, a + b*i with exact rational parts.  The two
interoperate (GaussRat absorbs Fraction/int on either side), and every
operation is exact; nothing here ever rounds.
"""

from __future__ import annotations

from fractions import Fraction


class GaussRat:
    """Gaussian rational a + b*i with Fraction components, i^2 = -1."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    def __add__(self, other):
        other = as_gauss(other)
        return GaussRat(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussRat(-self.re, -self.im)

    def __sub__(self, other):
        return self + (-as_gauss(other))

    def __rsub__(self, other):
        return as_gauss(other) + (-self)

    def __mul__(self, other):
        other = as_gauss(other)
        return GaussRat(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_gauss(other)
        n = other.re * other.re + other.im * other.im
        if n == 0:
            raise ZeroDivisionError("division by zero Gaussian rational")
        return GaussRat(
            (self.re * other.re + self.im * other.im) / n,
            (self.im * other.re - self.re * other.im) / n,
        )

    def __rtruediv__(self, other):
        return as_gauss(other) / self

    def __eq__(self, other):
        if isinstance(other, GaussRat):
            return self.re == other.re and self.im == other.im
        if isinstance(other, (int, Fraction)):
            return self.im == 0 and self.re == other
        return NotImplemented

    def __hash__(self):
        # agree with Fraction when purely real, so mixed dicts stay sane
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __repr__(self):
        return f"GaussRat({self.re!r}, {self.im!r})"

    def __str__(self):
        return format_scalar(self)


I = GaussRat(0, 1)


def as_gauss(x):
    if isinstance(x, GaussRat):
        return x
    return GaussRat(x)


def scalar_is_real(x):
    return not isinstance(x, GaussRat) or x.im == 0


def _format_frac(q: Fraction) -> str:
    return str(q)  # Fraction renders p/q or p


def format_scalar(x) -> str:
    """Canonical text form; parses back bit-exactly via parse_scalar."""
    if isinstance(x, GaussRat):
        if x.im == 0:
            return _format_frac(x.re)
        if x.re == 0:
            return f"{_format_frac(x.im)}*i"
        sign = "+" if x.im > 0 else "-"
        return f"({_format_frac(x.re)}{sign}{_format_frac(abs(x.im))}*i)"
    return _format_frac(Fraction(x))


def parse_scalar(text: str):
    """Inverse of format_scalar.  Accepts p, p/q, r*i, (a+b*i), (a-b*i)."""
    t = text.strip()
    if t.startswith("(") and t.endswith(")"):
        t = t[1:-1].strip()
    if t.endswith("*i") or t == "i" or t == "-i":
        if t == "i":
            return GaussRat(0, 1)
        if t == "-i":
            return GaussRat(0, -1)
        body = t[:-2]
        # split a+b or a-b at the last top-level sign (no parens inside)
        for k in range(len(body) - 1, 0, -1):
            if body[k] in "+-" and body[k - 1] not in "+-*/":
                re_part = Fraction(body[:k])
                im_part = Fraction(body[k + 1 :])
                if body[k] == "-":
                    im_part = -im_part
                return GaussRat(re_part, im_part)
        return GaussRat(0, Fraction(body))
    return Fraction(t)
