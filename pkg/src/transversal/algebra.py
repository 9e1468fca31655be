"""Graded-commutative algebra with exact coefficients.

One element type covers every coefficient ring in this package: polynomials
in even generators tensored with an exterior algebra on odd generators.
With zero odd generators this is plain multivariate polynomials; with the
model's xi generators it is the function algebra of the shifted bundle;
with auxiliary generators it doubles as symbol algebras and the coefficient
rings used by the characteristic-cocycle code.

Elements are sparse maps ``(odd_mask, even_exponents) -> scalar`` with no
stored zeros, so representation equality is mathematical equality.  All
values are immutable after construction and safe to share.
"""

from __future__ import annotations

from fractions import Fraction

from .scalars import GaussRat, format_scalar


def _merge_sign(mask1: int, mask2: int) -> int:
    """Sign of sorting the concatenation of two ascending odd words.

    Counts pairs (i in mask1, j in mask2) with i > j; each such pair is one
    transposition of odd generators.
    """
    sign = 0
    m2 = mask2
    while m2:
        j = (m2 & -m2).bit_length() - 1
        sign ^= bin(mask1 >> (j + 1)).count("1") & 1
        m2 &= m2 - 1
    return -1 if sign else 1


def koszul_sign(permutation, degrees):
    """Sign relating x_1...x_k to x_{s(1)}...x_{s(k)} for graded factors.

    ``permutation`` lists the new ordering by original index (0-based), and
    must be a bijection.  Returns +1 or -1 such that
    x_0 ... x_{k-1} = sign * x_{s(0)} ... x_{s(k-1)}.
    """
    perm = list(permutation)
    if sorted(perm) != list(range(len(perm))):
        raise ValueError("not a permutation: %r" % (permutation,))
    sign = 1
    seq = perm[:]
    # bubble sort, flipping the sign whenever two odd factors swap
    for i in range(len(seq)):
        for j in range(len(seq) - 1 - i):
            if seq[j] > seq[j + 1]:
                if degrees[seq[j]] % 2 and degrees[seq[j + 1]] % 2:
                    sign = -sign
                seq[j], seq[j + 1] = seq[j + 1], seq[j]
    return sign


class Algebra:
    """Descriptor of a graded-commutative coefficient algebra.

    even_names: polynomial generators (degree per gen, default 0)
    odd_names:  exterior generators (degree per gen, default 1)

    Degrees only matter for homogeneity bookkeeping; Koszul signs always
    come from the odd/even split.
    """

    def __init__(self, even_names, odd_names, even_degrees=None, odd_degrees=None):
        self.even_names = tuple(even_names)
        self.odd_names = tuple(odd_names)
        self.n_even = len(self.even_names)
        self.n_odd = len(self.odd_names)
        self.even_degrees = tuple(even_degrees) if even_degrees else (0,) * self.n_even
        self.odd_degrees = tuple(odd_degrees) if odd_degrees else (1,) * self.n_odd
        self._zero_exps = (0,) * self.n_even

    def __repr__(self):
        return f"Algebra(even={self.even_names}, odd={self.odd_names})"

    def __eq__(self, other):
        return (
            isinstance(other, Algebra)
            and self.even_names == other.even_names
            and self.odd_names == other.odd_names
        )

    def __hash__(self):
        return hash((self.even_names, self.odd_names))

    # -- constructors ------------------------------------------------

    def zero(self):
        return Elt(self, {})

    def one(self):
        return Elt(self, {(0, self._zero_exps): Fraction(1)})

    def scalar(self, c):
        if not c:
            return self.zero()
        return Elt(self, {(0, self._zero_exps): _coerce(c)})

    def even_gen(self, i):
        e = [0] * self.n_even
        e[i] = 1
        return Elt(self, {(0, tuple(e)): Fraction(1)})

    def odd_gen(self, a):
        if not 0 <= a < self.n_odd:
            raise IndexError("odd generator index out of range")
        return Elt(self, {(1 << a, self._zero_exps): Fraction(1)})

    def monomial(self, mask, exps, coeff=1):
        if not coeff:
            return self.zero()
        return Elt(self, {(int(mask), tuple(exps)): _coerce(coeff)})

    def degree_of_key(self, key):
        mask, exps = key
        d = 0
        for i, e in enumerate(exps):
            if e:
                d += e * self.even_degrees[i]
        m = mask
        while m:
            a = (m & -m).bit_length() - 1
            d += self.odd_degrees[a]
            m &= m - 1
        return d


def _coerce(c):
    if isinstance(c, (GaussRat, Fraction)):
        return c
    return Fraction(c)


class Elt:
    """A graded-commutative algebra element in canonical sparse form."""

    __slots__ = ("alg", "terms")

    def __init__(self, alg: Algebra, terms: dict):
        self.alg = alg
        self.terms = terms  # never mutated after construction

    # -- ring structure ----------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, Fraction, GaussRat)):
            other = self.alg.scalar(other)
        if other.alg != self.alg:
            raise ValueError("algebra mismatch")
        out = dict(self.terms)
        for k, v in other.terms.items():
            s = out.get(k)
            if s is None:
                out[k] = v
            else:
                s = s + v
                if s:
                    out[k] = s
                else:
                    del out[k]
        return Elt(self.alg, out)

    __radd__ = __add__

    def __neg__(self):
        return Elt(self.alg, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, Fraction, GaussRat)):
            other = self.alg.scalar(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c):
        if not c:
            return self.alg.zero()
        c = _coerce(c)
        return Elt(self.alg, {k: v * c for k, v in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, GaussRat)):
            return self.scale(other)
        if other.alg != self.alg:
            raise ValueError("algebra mismatch")
        out = {}
        for (m1, e1), c1 in self.terms.items():
            for (m2, e2), c2 in other.terms.items():
                if m1 & m2:
                    continue
                sign = _merge_sign(m1, m2)
                key = (m1 | m2, tuple(a + b for a, b in zip(e1, e2)))
                c = c1 * c2
                if sign < 0:
                    c = -c
                s = out.get(key)
                if s is None:
                    out[key] = c
                else:
                    s = s + c
                    if s:
                        out[key] = s
                    else:
                        del out[key]
        return Elt(self.alg, out)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction, GaussRat)):
            return self.scale(other)
        return NotImplemented

    def __pow__(self, k):
        if k < 0:
            raise ValueError("negative power")
        result = self.alg.one()
        for _ in range(k):
            result = result * self
        return result

    def __eq__(self, other):
        if isinstance(other, (int, Fraction, GaussRat)):
            other = self.alg.scalar(other)
        return isinstance(other, Elt) and self.alg == other.alg and self.terms == other.terms

    def __hash__(self):
        return hash((self.alg, frozenset(self.terms.items())))

    def __bool__(self):
        return bool(self.terms)

    # -- structure queries -------------------------------------------

    def is_homogeneous(self):
        degs = {self.alg.degree_of_key(k) for k in self.terms}
        return len(degs) <= 1

    def degree(self):
        """Degree of a homogeneous element; None for 0, error if mixed."""
        degs = {self.alg.degree_of_key(k) for k in self.terms}
        if not degs:
            return None
        if len(degs) > 1:
            raise ValueError("inhomogeneous element has no degree")
        return degs.pop()

    def homogeneous_parts(self):
        """dict degree -> homogeneous component."""
        parts = {}
        for k, v in self.terms.items():
            d = self.alg.degree_of_key(k)
            parts.setdefault(d, {})[k] = v
        return {d: Elt(self.alg, t) for d, t in sorted(parts.items())}

    def parity(self):
        """0 or 1 for parity-homogeneous elements (odd-mask popcount)."""
        ps = {bin(m).count("1") & 1 for (m, _) in self.terms}
        if not ps:
            return 0
        if len(ps) > 1:
            raise ValueError("mixed parity")
        return ps.pop()

    def constant_term(self):
        return self.terms.get((0, self.alg._zero_exps), Fraction(0))

    def max_even_degree(self):
        return max((sum(e) for (_, e) in self.terms), default=0)

    # -- calculus ----------------------------------------------------

    def d_even(self, i):
        """Partial derivative along even generator i."""
        out = {}
        for (m, e), c in self.terms.items():
            if e[i]:
                ne = list(e)
                ne[i] -= 1
                key = (m, tuple(ne))
                add = c * e[i]
                s = out.get(key)
                out[key] = add if s is None else s + add
                if not out[key]:
                    del out[key]
        return Elt(self.alg, out)

    def d_odd(self, a):
        """Left derivative along odd generator a."""
        bit = 1 << a
        out = {}
        for (m, e), c in self.terms.items():
            if m & bit:
                sign = bin(m & (bit - 1)).count("1") & 1
                key = (m ^ bit, e)
                add = -c if sign else c
                s = out.get(key)
                out[key] = add if s is None else s + add
                if not out[key]:
                    del out[key]
        return Elt(self.alg, out)

    def subs_even(self, values):
        """Substitute even generators by elements of another algebra.

        ``values`` maps generator index -> Elt of the target algebra; odd
        part must be empty (polynomial substitution only).
        """
        if not self.terms:
            raise ValueError("cannot infer target algebra from zero")
        target = next(iter(values.values())).alg
        out = target.zero()
        for (m, e), c in self.terms.items():
            if m:
                raise ValueError("subs_even on element with odd part")
            term = target.scalar(c)
            for i, k in enumerate(e):
                for _ in range(k):
                    term = term * values[i]
            out = out + term
        return out

    # -- display -----------------------------------------------------

    def sorted_keys(self):
        def keyfun(key):
            mask, exps = key
            odd = tuple(a for a in range(self.alg.n_odd) if mask >> a & 1)
            return (bin(mask).count("1"), odd, sum(exps), exps)

        return sorted(self.terms, key=keyfun)

    def __str__(self):
        from .grammar import format_elt

        return format_elt(self)

    def __repr__(self):
        return f"<Elt {self}>"


def exact_div(num: Elt, den: Elt):
    """Exact polynomial division num/den, or None when den does not divide.

    Both arguments must be purely even (mask 0).  Uses graded-lex leading
    term cancellation, which finds the quotient exactly when one exists.
    """
    alg = num.alg
    if any(m for (m, _) in den.terms) or any(m for (m, _) in num.terms):
        raise ValueError("exact_div is for purely even elements")
    if not den:
        raise ZeroDivisionError("division by zero polynomial")

    def lead(e: Elt):
        key = max(e.terms, key=lambda k: (sum(k[1]), k[1]))
        return key, e.terms[key]

    dkey, dc = lead(den)
    quot = alg.zero()
    rem = num
    while rem:
        rkey, rc = lead(rem)
        diff = tuple(a - b for a, b in zip(rkey[1], dkey[1]))
        if any(d < 0 for d in diff) or sum(rkey[1]) < sum(dkey[1]):
            return None
        t = alg.monomial(0, diff, rc / dc)
        quot = quot + t
        rem = rem - t * den
    return quot
