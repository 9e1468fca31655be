"""Normal-form differential operators on the shifted bundle and the base.

Everything is kept in a unique normal form: coefficient (a form) on the
left, then commuting even derivatives as a multi-index, then odd
derivatives in increasing index order.  Two operators are equal iff their
term maps are equal, so every identity in the test-suite is a dictionary
comparison.

The transversal quotient is handled by a word-rewriting pass: operators are
rewritten in the mixed frame, distribution letters are commuted to the
right with exact bracket expansions and words ending in a distribution
letter are dropped.  The surviving nondecreasing complement words form the
canonical basis of the quotient.
"""

from __future__ import annotations

import random
from fractions import Fraction
from functools import lru_cache

from .algebra import Elt, _merge_sign
from .chart import ChartModel, ConnectionData, ModelError, vf_apply

# ---------------------------------------------------------------------
# splits of pure derivative monomials (shared by compose and coproducts)
# ---------------------------------------------------------------------


def _subsets(mask):
    """All submasks of an odd mask."""
    sub = mask
    out = []
    while True:
        out.append(sub)
        if sub == 0:
            break
        sub = (sub - 1) & mask
    return out


@lru_cache(maxsize=None)
def _binom(n, k):
    from math import comb

    return comb(n, k)


@lru_cache(maxsize=None)
def monomial_splits(alpha, tmask):
    """Two-fold splitting of d_x^alpha d_xi^T with binomials and odd signs.

    Returns tuples (coeff, beta, t1, alpha-beta, t2, sign) with
    sign = sign of unshuffling (t1, t2) back into T.
    """
    out = []
    evens = [[]]
    for a in alpha:
        evens = [e + [b] for e in evens for b in range(a + 1)]
    for beta in evens:
        coeff = 1
        for a, b in zip(alpha, beta):
            coeff *= _binom(a, b)
        rest = tuple(a - b for a, b in zip(alpha, beta))
        for t1 in _subsets(tmask):
            t2 = tmask ^ t1
            sign = _merge_sign(t1, t2)
            out.append((coeff, tuple(beta), t1, rest, t2, sign))
    return tuple(out)


def _apply_pure(alpha, tmask, w: Elt) -> Elt:
    """Apply d_x^alpha d_xi^T to a form (rightmost factor acts first)."""
    out = w
    t = tmask
    order = []
    while t:
        order.append((t & -t).bit_length() - 1)
        t &= t - 1
    for a in reversed(order):
        out = out.d_odd(a)
        if not out:
            return out
    for i, k in enumerate(alpha):
        for _ in range(k):
            out = out.d_even(i)
            if not out:
                return out
    return out


# ---------------------------------------------------------------------
# operators on the shifted bundle
# ---------------------------------------------------------------------


class DiffOp:
    """Differential operator on the graded chart, unique normal form.

    terms: (alpha, tmask) -> coefficient form.  The coefficient absorbs the
    whole left form factor, odd generators included.
    """

    __slots__ = ("alg", "terms")

    def __init__(self, alg, terms=None):
        self.alg = alg
        self.terms = terms or {}

    @classmethod
    def zero(cls, alg):
        return cls(alg, {})

    @classmethod
    def mult(cls, w: Elt):
        if not w:
            return cls(w.alg, {})
        n = w.alg.n_even
        return cls(w.alg, {((0,) * n, 0): w})

    @classmethod
    def identity(cls, alg):
        return cls.mult(alg.one())

    @classmethod
    def d_even(cls, alg, i, coeff=None):
        a = [0] * alg.n_even
        a[i] = 1
        return cls(alg, {(tuple(a), 0): coeff if coeff is not None else alg.one()})

    @classmethod
    def d_odd(cls, alg, a, coeff=None):
        zero_a = (0,) * alg.n_even
        return cls(alg, {(zero_a, 1 << a): coeff if coeff is not None else alg.one()})

    def _accum(self, store, key, val):
        s = store.get(key)
        if s is None:
            store[key] = val
        else:
            s = s + val
            if s:
                store[key] = s
            else:
                del store[key]

    def __add__(self, other):
        out = dict(self.terms)
        store = dict(out)
        for k, v in other.terms.items():
            self._accum(store, k, v)
        return DiffOp(self.alg, store)

    def __neg__(self):
        return DiffOp(self.alg, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        if not c:
            return DiffOp.zero(self.alg)
        return DiffOp(self.alg, {k: v.scale(c) for k, v in self.terms.items()})

    def left_mult(self, w: Elt):
        """(w .) o D, the left module action."""
        out = {}
        for k, v in self.terms.items():
            nv = w * v
            if nv:
                self._accum(out, k, nv)
        return DiffOp(self.alg, out)

    def __eq__(self, other):
        return isinstance(other, DiffOp) and self.alg == other.alg and self.terms == other.terms

    def __hash__(self):
        return hash((self.alg, frozenset((k, frozenset(v.terms.items())) for k, v in self.terms.items())))

    def __bool__(self):
        return bool(self.terms)

    def order(self):
        return max(
            (sum(a) + bin(t).count("1") for (a, t) in self.terms), default=-1
        )

    def apply(self, w: Elt) -> Elt:
        out = self.alg.zero()
        for (alpha, tmask), coef in self.terms.items():
            piece = _apply_pure(alpha, tmask, w)
            if piece:
                out = out + coef * piece
        return out

    def compose(self, other: "DiffOp") -> "DiffOp":
        out = {}
        for (a1, t1), c1 in self.terms.items():
            for (a2, t2), c2 in other.terms.items():
                # split c2 by parity once; signs depend on it
                for par2, c2p in _parity_parts(c2):
                    for coeff, beta, s1, rest, s2, sign in monomial_splits(a1, t1):
                        applied = _apply_pure(beta, s1, c2p)
                        if not applied:
                            continue
                        ms = _merge_sign(s2, t2)
                        if ms == 0 or (s2 & t2):
                            continue
                        total_sign = sign * ms
                        if (bin(s2).count("1") & 1) and par2:
                            total_sign = -total_sign
                        nc = c1 * applied
                        if coeff != 1:
                            nc = nc.scale(coeff)
                        if total_sign < 0:
                            nc = -nc
                        if not nc:
                            continue
                        key = (
                            tuple(x + y for x, y in zip(rest, a2)),
                            s2 | t2,
                        )
                        self._accum(out, key, nc)
        return DiffOp(self.alg, out)

    # -- grading -------------------------------------------------------

    def degree_parts(self):
        """dict total-degree -> homogeneous operator."""
        parts = {}
        for (alpha, tmask), coef in self.terms.items():
            shift = -bin(tmask).count("1")
            for d, comp in coef.homogeneous_parts().items():
                parts.setdefault(d + shift, {})[(alpha, tmask)] = comp
        return {d: DiffOp(self.alg, t) for d, t in sorted(parts.items())}

    def parity_parts(self):
        even = {}
        odd = {}
        for (alpha, tmask), coef in self.terms.items():
            tshift = bin(tmask).count("1") & 1
            for par, comp in _parity_parts(coef):
                target = odd if (par ^ tshift) else even
                if comp:
                    self._accum(target, (alpha, tmask), comp)
        return DiffOp(self.alg, even), DiffOp(self.alg, odd)

    def degree(self):
        parts = self.degree_parts()
        live = [d for d, p in parts.items() if p]
        if not live:
            return None
        if len(live) > 1:
            raise ValueError("inhomogeneous operator")
        return live[0]

    def __str__(self):
        return format_operator(self)

    def __repr__(self):
        return f"<DiffOp {self}>"


def _parity_parts(e: Elt):
    even = {}
    odd = {}
    for (m, ex), c in e.terms.items():
        if bin(m).count("1") & 1:
            odd[(m, ex)] = c
        else:
            even[(m, ex)] = c
    out = []
    if even:
        out.append((0, Elt(e.alg, even)))
    if odd:
        out.append((1, Elt(e.alg, odd)))
    return out


def commutator(d1: DiffOp, d2: DiffOp) -> DiffOp:
    """Graded commutator, expanded bilinearly over parity parts."""
    out = DiffOp.zero(d1.alg)
    for p1, a in zip((0, 1), d1.parity_parts()):
        if not a:
            continue
        for p2, b in zip((0, 1), d2.parity_parts()):
            if not b:
                continue
            term = a.compose(b)
            swap = b.compose(a)
            if p1 and p2:
                out = out + term + swap
            else:
                out = out + term - swap
    return out


def coproduct(d: DiffOp):
    """Two-fold coproduct in balanced form: (alpha2, t2) -> first leg."""
    out = {}
    alg = d.alg
    for (alpha, tmask), coef in d.terms.items():
        for coeff, beta, t1, rest, t2, sign in monomial_splits(alpha, tmask):
            leg1 = DiffOp(alg, {(beta, t1): coef.scale(Fraction(coeff * sign))})
            key = (rest, t2)
            cur = out.get(key)
            out[key] = leg1 if cur is None else cur + leg1
    return {k: v for k, v in out.items() if v}


def tensor2_eval(t2, alg, xi: Elt, eta: Elt) -> Elt:
    """Evaluate a balanced two-tensor on a pair of forms."""
    out = alg.zero()
    for (alpha, tmask), leg1 in t2.items():
        right = _apply_pure(alpha, tmask, eta)
        if not right:
            continue
        p2 = bin(tmask).count("1") & 1
        for par1, xi_part in _parity_parts(xi):
            lv = leg1.apply(xi_part)
            if not lv:
                continue
            val = lv * right
            if p2 and par1:
                val = -val
            out = out + val
    return out


# ---------------------------------------------------------------------
# operators on the base chart
# ---------------------------------------------------------------------


class BaseOp:
    """Differential operator on the base chart: alpha -> polynomial."""

    __slots__ = ("alg", "terms")

    def __init__(self, alg, terms=None):
        self.alg = alg
        self.terms = terms or {}

    @classmethod
    def mult(cls, f: Elt):
        if not f:
            return cls(f.alg, {})
        return cls(f.alg, {(0,) * f.alg.n_even: f})

    @classmethod
    def identity(cls, alg):
        return cls.mult(alg.one())

    @classmethod
    def from_field(cls, v):
        alg = v[0].alg
        terms = {}
        for i, c in enumerate(v):
            if c:
                a = [0] * alg.n_even
                a[i] = 1
                terms[tuple(a)] = c
        return cls(alg, terms)

    def __add__(self, other):
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
        return BaseOp(self.alg, out)

    def __neg__(self):
        return BaseOp(self.alg, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def left_mult(self, f: Elt):
        out = {}
        for k, v in self.terms.items():
            nv = f * v
            if nv:
                out[k] = nv
        return BaseOp(self.alg, out)

    def __eq__(self, other):
        return isinstance(other, BaseOp) and self.terms == other.terms

    def __bool__(self):
        return bool(self.terms)

    def order(self):
        return max((sum(a) for a in self.terms), default=-1)

    def apply(self, f: Elt) -> Elt:
        out = self.alg.zero()
        for alpha, coef in self.terms.items():
            piece = _apply_pure(alpha, 0, f)
            if piece:
                out = out + coef * piece
        return out

    def compose(self, other: "BaseOp") -> "BaseOp":
        out = {}
        for a1, c1 in self.terms.items():
            for a2, c2 in other.terms.items():
                for coeff, beta, _t1, rest, _t2, _s in monomial_splits(a1, 0):
                    applied = _apply_pure(beta, 0, c2)
                    if not applied:
                        continue
                    key = tuple(x + y for x, y in zip(rest, a2))
                    nc = (c1 * applied).scale(coeff)
                    if not nc:
                        continue
                    s = out.get(key)
                    if s is None:
                        out[key] = nc
                    else:
                        s = s + nc
                        if s:
                            out[key] = s
                        else:
                            del out[key]
        return BaseOp(self.alg, out)

    def coproduct(self):
        """Balanced: alpha2 -> first-leg BaseOp."""
        out = {}
        for alpha, coef in self.terms.items():
            for coeff, beta, _t1, rest, _t2, _s in monomial_splits(alpha, 0):
                leg1 = BaseOp(self.alg, {beta: coef.scale(Fraction(coeff))})
                cur = out.get(rest)
                out[rest] = leg1 if cur is None else cur + leg1
        return {k: v for k, v in out.items() if v}

    def __repr__(self):
        return f"<BaseOp {self.terms}>"


def restrict_to_base(d: DiffOp):
    """Push forward along the bundle projection: drop odd-derivative terms.

    Returns the balanced element of (forms tensor base operators):
    alpha -> form coefficient.
    """
    out = {}
    for (alpha, tmask), coef in d.terms.items():
        if tmask:
            continue
        cur = out.get(alpha)
        out[alpha] = coef if cur is None else cur + coef
    return {k: v for k, v in out.items() if v}


# ---------------------------------------------------------------------
# transversal reduction
# ---------------------------------------------------------------------


class TransversalOp:
    """Class of a base operator modulo the left ideal of the distribution.

    terms: nondecreasing complement-frame word -> polynomial coefficient.
    """

    __slots__ = ("alg", "terms")

    def __init__(self, alg, terms=None):
        self.alg = alg
        self.terms = terms or {}

    @classmethod
    def unit(cls, alg):
        return cls(alg, {(): alg.one()})

    def __add__(self, other):
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
        return TransversalOp(self.alg, out)

    def __neg__(self):
        return TransversalOp(self.alg, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def left_mult(self, f: Elt):
        out = {}
        for k, v in self.terms.items():
            nv = f * v
            if nv:
                out[k] = nv
        return TransversalOp(self.alg, out)

    def scale(self, c):
        return TransversalOp(
            self.alg, {k: v.scale(c) for k, v in self.terms.items()} if c else {}
        )

    def __eq__(self, other):
        return isinstance(other, TransversalOp) and self.terms == other.terms

    def __bool__(self):
        return bool(self.terms)

    def order(self):
        return max((len(b) for b in self.terms), default=-1)

    def __repr__(self):
        return f"<TransversalOp {self.terms}>"


class Ops:
    """Per-model cache of operator-level structure."""

    def __init__(self, model: ChartModel):
        self.model = model
        self.alg = model.alg
        self._coord_mixed = None
        self._bracket_mixed = None
        self._reduce_cache = {}
        self._faction_cache = {}
        self._lcompose_cache = {}
        self._cop_cache = {}
        self._rep_cache = {}
        self._dF = None

    # -- structural tables --------------------------------------------

    @property
    def coord_mixed(self):
        if self._coord_mixed is None:
            self._coord_mixed = [
                self.model.mixed_coords(self.model.coordinate_field(i))
                for i in range(self.model.n)
            ]
        return self._coord_mixed

    @property
    def bracket_mixed(self):
        if self._bracket_mixed is None:
            from .chart import vf_bracket

            n = self.model.n
            self._bracket_mixed = [
                [
                    self.model.mixed_coords(
                        vf_bracket(self.model.frame_field(e), self.model.frame_field(f))
                    )
                    for f in range(n)
                ]
                for e in range(n)
            ]
        return self._bracket_mixed

    # -- homological vector field --------------------------------------

    @property
    def dF(self) -> DiffOp:
        if self._dF is None:
            alg = self.alg
            model = self.model
            terms = {}
            for i in range(model.n):
                coef = alg.zero()
                for a in range(model.r):
                    coef = coef + alg.odd_gen(a) * model.f_frame[a][i]
                if coef:
                    key = [0] * model.n
                    key[i] = 1
                    terms[(tuple(key), 0)] = coef
            zero_a = (0,) * model.n
            for c in range(model.r):
                coef = alg.zero()
                for a in range(model.r):
                    for b in range(model.r):
                        s = model.structure[a][b][c]
                        if s:
                            coef = coef - (
                                alg.odd_gen(a) * alg.odd_gen(b) * s
                            ).scale(Fraction(1, 2))
                if coef:
                    terms[(zero_a, 1 << c)] = coef
            self._dF = DiffOp(alg, terms)
        return self._dF

    def dF_form(self, w: Elt) -> Elt:
        return self.dF.apply(w)

    # -- lifts ----------------------------------------------------------

    def iota(self, a_coeffs) -> DiffOp:
        """Vertical lift of a distribution section (frame coordinates)."""
        alg = self.alg
        out = DiffOp.zero(alg)
        for c, g in enumerate(a_coeffs):
            if g:
                out = out + DiffOp.d_odd(alg, c, coeff=g)
        return out

    def iota_field(self, v) -> DiffOp:
        fpart, bpart = self.model.project(v)
        if any(bpart):
            raise ModelError("vertical lift of a field outside the distribution")
        return self.iota(fpart)

    def hat(self, conn: ConnectionData, u_field) -> DiffOp:
        """Horizontal lift through the induced connection on the distribution."""
        alg = self.alg
        model = self.model
        out = DiffOp.zero(alg)
        for i, ui in enumerate(u_field):
            if ui:
                out = out + DiffOp.d_even(alg, i, coeff=ui)
        for b in range(model.r):
            unit = [alg.one() if k == b else alg.zero() for k in range(model.r)]
            g = conn.nabla_F(u_field, unit)
            for c, gc in enumerate(g):
                if gc:
                    out = out - DiffOp.d_odd(alg, c, coeff=alg.odd_gen(b) * gc)
        return out

    # -- transversal machinery ------------------------------------------

    def _normalize_words(self, terms, strategy=None):
        """Rewrite words in the mixed frame to the quotient normal form.

        terms: list of (poly, word) with word entries ints (frame letters)
        or Elt (interior coefficients).  strategy picks which reducible
        position fires; default leftmost.
        """
        model = self.model
        r = model.r
        result = {}
        stack = list(terms)
        while stack:
            coef, word = stack.pop()
            if not coef:
                continue
            pos = None
            candidates = []
            for p, letter in enumerate(word):
                if isinstance(letter, Elt):
                    candidates.append(p)
                elif letter < r:
                    # reducible unless immediately followed by another
                    # distribution letter (the right one fires first)
                    if p == len(word) - 1 or not (
                        isinstance(word[p + 1], int) and word[p + 1] < r
                    ):
                        candidates.append(p)
                elif (
                    p + 1 < len(word)
                    and isinstance(word[p + 1], int)
                    and word[p + 1] >= r
                    and letter > word[p + 1]
                ):
                    candidates.append(p)
            if not candidates:
                key = tuple(w - r for w in word)
                cur = result.get(key)
                s = coef if cur is None else cur + coef
                if s:
                    result[key] = s
                elif cur is not None:
                    del result[key]
                continue
            pos = candidates[0] if strategy is None else strategy(candidates)
            letter = word[pos]
            if isinstance(letter, Elt):
                if pos == 0:
                    stack.append((coef * letter, word[1:]))
                else:
                    left = word[pos - 1]
                    if isinstance(left, Elt):
                        stack.append(
                            (coef, word[: pos - 1] + (left * letter,) + word[pos + 1 :])
                        )
                    else:
                        head = word[: pos - 1]
                        tail = word[pos + 1 :]
                        stack.append((coef, head + (letter, left) + tail))
                        deriv = vf_apply(model.frame_field(left), letter)
                        if deriv:
                            stack.append((coef, head + (deriv,) + tail))
                continue
            if letter < r:
                if pos == len(word) - 1:
                    continue  # ends in a distribution letter: in the ideal
                nxt = word[pos + 1]
                if isinstance(nxt, Elt):
                    # handled via the Elt rule at pos+1
                    head = word[:pos]
                    tail = word[pos + 2 :]
                    stack.append((coef, head + (nxt, letter) + tail))
                    deriv = vf_apply(model.frame_field(letter), nxt)
                    if deriv:
                        stack.append((coef, head + (deriv,) + tail))
                    continue
                head = word[:pos]
                tail = word[pos + 2 :]
                stack.append((coef, head + (nxt, letter) + tail))
                for e, br in enumerate(self.bracket_mixed[letter][nxt]):
                    if br:
                        stack.append((coef, head + (br, e) + tail))
                continue
            # two complement letters out of order
            nxt = word[pos + 1]
            head = word[:pos]
            tail = word[pos + 2 :]
            stack.append((coef, head + (nxt, letter) + tail))
            for e, br in enumerate(self.bracket_mixed[letter][nxt]):
                if br:
                    stack.append((coef, head + (br, e) + tail))
        return TransversalOp(self.alg, result)

    def _alpha_words(self, alpha):
        """Expand a coordinate-derivative monomial into mixed-frame words."""
        words = [(self.alg.one(), ())]
        for i, k in enumerate(alpha):
            for _ in range(k):
                new = []
                for coef, word in words:
                    for e, c in enumerate(self.coord_mixed[i]):
                        if c:
                            new.append((coef, word + (c, e)))
                words = new
        return words

    def reduce_alpha(self, alpha) -> TransversalOp:
        if alpha not in self._reduce_cache:
            self._reduce_cache[alpha] = self._normalize_words(
                self._alpha_words(alpha)
            )
        return self._reduce_cache[alpha]

    def reduce(self, d: BaseOp, strategy=None) -> TransversalOp:
        out = TransversalOp(self.alg)
        if strategy is not None:
            terms = []
            for alpha, coef in d.terms.items():
                terms.extend(
                    (coef * c, w) for c, w in self._alpha_words(alpha)
                )
            return self._normalize_words(terms, strategy)
        for alpha, coef in d.terms.items():
            out = out + self.reduce_alpha(alpha).left_mult(coef)
        return out

    def reduce_randomized(self, d: BaseOp, seed) -> TransversalOp:
        rng = random.Random(seed)
        return self.reduce(d, strategy=lambda cands: rng.choice(cands))

    def rep_op(self, beta) -> BaseOp:
        """Canonical representative of a complement word as a base operator."""
        if beta not in self._rep_cache:
            op = BaseOp.identity(self.alg)
            for b in reversed(beta):
                op = BaseOp.from_field(self.model.b_lift[b]).compose(op)
            self._rep_cache[beta] = op
        return self._rep_cache[beta]

    def compose_letter(self, e, t: TransversalOp) -> TransversalOp:
        """Left composition by a mixed-frame letter on the quotient."""
        out = TransversalOp(self.alg)
        for beta, coef in t.terms.items():
            key = (e, beta)
            if key not in self._lcompose_cache:
                self._lcompose_cache[key] = self._normalize_words(
                    [(self.alg.one(), (e,) + tuple(b + self.model.r for b in beta))]
                )
            piece = self._lcompose_cache[key]
            acc = {}
            for b2, c2 in piece.terms.items():
                nv = coef * c2
                if nv:
                    acc[b2] = acc.get(b2, self.alg.zero()) + nv
            out = out + TransversalOp(self.alg, {k: v for k, v in acc.items() if v})
            # coefficient must pass the letter: e acts on coef
            deriv = vf_apply(self.model.frame_field(e), coef)
            if deriv:
                out = out + TransversalOp(self.alg, {beta: deriv})
        return out

    def f_action(self, a, t: TransversalOp) -> TransversalOp:
        """Module action of the a-th distribution frame field."""
        return self.compose_letter(a, t)

    def coproduct_beta(self, beta):
        """Coproduct of a basis word, reduced on both legs and balanced."""
        if beta not in self._cop_cache:
            rep = self.rep_op(beta)
            acc = {}
            for alpha2, leg1 in rep.coproduct().items():
                right = self.reduce_alpha(alpha2)
                left = self.reduce(leg1)
                for b2, c2 in right.terms.items():
                    for b1, c1 in left.terms.items():
                        nv = c1 * c2
                        if nv:
                            key = (b1, b2)
                            acc[key] = acc.get(key, self.alg.zero()) + nv
            self._cop_cache[beta] = {k: v for k, v in acc.items() if v}
        return self._cop_cache[beta]

    def coproduct_transversal(self, t: TransversalOp):
        out = {}
        for beta, coef in t.terms.items():
            for (b1, b2), c in self.coproduct_beta(beta).items():
                nv = coef * c
                if nv:
                    key = (b1, b2)
                    s = out.get(key)
                    out[key] = nv if s is None else s + nv
        return {k: v for k, v in out.items() if v}


# ---------------------------------------------------------------------
# forms with transversal coefficients, and their differential
# ---------------------------------------------------------------------


class OmegaDB:
    """Element of (forms tensor transversal operators).

    terms: complement word -> form coefficient.
    """

    __slots__ = ("alg", "terms")

    def __init__(self, alg, terms=None):
        self.alg = alg
        self.terms = terms or {}

    @classmethod
    def from_transversal(cls, t: TransversalOp):
        return cls(t.alg, dict(t.terms))

    def __add__(self, other):
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
        return OmegaDB(self.alg, out)

    def __neg__(self):
        return OmegaDB(self.alg, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def left_mult(self, w: Elt):
        out = {}
        for k, v in self.terms.items():
            nv = w * v
            if nv:
                out[k] = nv
        return OmegaDB(self.alg, out)

    def scale(self, c):
        return OmegaDB(
            self.alg, {k: v.scale(c) for k, v in self.terms.items()} if c else {}
        )

    def __eq__(self, other):
        return isinstance(other, OmegaDB) and self.terms == other.terms

    def __bool__(self):
        return bool(self.terms)

    def order(self):
        return max((len(b) for b in self.terms), default=-1)

    def degree_parts(self):
        parts = {}
        for beta, coef in self.terms.items():
            for d, comp in coef.homogeneous_parts().items():
                parts.setdefault(d, {})[beta] = comp
        return {d: OmegaDB(self.alg, t) for d, t in sorted(parts.items())}

    def __repr__(self):
        return f"<OmegaDB {self.terms}>"


def dF_U(ops: Ops, x: OmegaDB) -> OmegaDB:
    """Flat differential on transversal coefficients.

    d(xi (x) u) = d xi (x) u + (-1)^{|xi|} sum_a xi^a-twisted module action.
    """
    alg = ops.alg
    out = OmegaDB(alg)
    for beta, coef in x.terms.items():
        d1 = ops.dF_form(coef)
        if d1:
            out = out + OmegaDB(alg, {beta: d1})
        for par, cpart in _parity_parts(coef):
            for a in range(ops.model.r):
                acted = ops.f_action(a, TransversalOp(alg, {beta: alg.one()}))
                if not acted:
                    continue
                front = cpart * alg.odd_gen(a)
                if par:
                    front = -front
                if not front:
                    continue
                piece = {}
                for b2, c2 in acted.terms.items():
                    nv = front * c2
                    if nv:
                        piece[b2] = nv
                out = out + OmegaDB(alg, piece)
    return out


def phi_natural(ops: Ops, d: DiffOp) -> OmegaDB:
    """Projection: restrict to the base, then reduce each leg."""
    out = OmegaDB(ops.alg)
    for alpha, coef in restrict_to_base(d).items():
        red = ops.reduce_alpha(alpha)
        piece = {}
        for beta, c in red.terms.items():
            nv = coef * c
            if nv:
                piece[beta] = nv
        out = out + OmegaDB(ops.alg, piece)
    return out


# ---------------------------------------------------------------------
# text form
# ---------------------------------------------------------------------


def format_operator(d: DiffOp) -> str:
    from .grammar import _term_string

    if not d.terms:
        return "0"
    alg = d.alg
    items = []
    for (alpha, tmask) in sorted(
        d.terms, key=lambda k: (sum(k[0]) + bin(k[1]).count("1"), k[0], k[1])
    ):
        coef = d.terms[(alpha, tmask)]
        dparts = []
        for i, k in enumerate(alpha):
            if k == 1:
                dparts.append(f"d{alg.even_names[i]}")
            elif k:
                dparts.append(f"d{alg.even_names[i]}^{k}")
        for a in range(alg.n_odd):
            if tmask >> a & 1:
                dparts.append(f"d{alg.odd_names[a]}")
        dstr = "*".join(dparts)
        for key in coef.sorted_keys():
            ts = _term_string(alg, key, coef.terms[key])
            if dstr:
                if ts == "1":
                    ts = dstr
                elif ts == "-1":
                    ts = "-" + dstr
                else:
                    ts = ts + "*" + dstr
            items.append(ts)
    parts = []
    for s in items:
        if not parts:
            parts.append(s)
        elif s.startswith("-"):
            parts.append(" - " + s[1:])
        else:
            parts.append(" + " + s)
    return "".join(parts)


def operator_atoms(model: ChartModel):
    from .grammar import form_atoms

    alg = model.alg
    atoms = {}
    for name, val in form_atoms(alg, model.complex_typed).items():
        atoms[name] = DiffOp.mult(val) if isinstance(val, Elt) else val
    for i, nm in enumerate(alg.even_names):
        atoms["d" + nm] = DiffOp.d_even(alg, i)
    for a, nm in enumerate(alg.odd_names):
        atoms["d" + nm] = DiffOp.d_odd(alg, a)
    if model.complex_typed:
        from .scalars import GaussRat

        atoms["i"] = DiffOp.mult(alg.scalar(GaussRat(0, 1)))
    return atoms


def parse_operator(text, model: ChartModel) -> DiffOp:
    from .grammar import Parser

    alg = model.alg

    def power(d, k):
        out = DiffOp.identity(alg)
        for _ in range(k):
            out = out.compose(d)
        return out

    hooks = {
        "add": lambda a, b: a + b,
        "neg": lambda a: -a,
        "mul": lambda a, b: a.compose(b),
        "pow": power,
        "scalar": lambda c: DiffOp.mult(alg.scalar(c)),
    }
    return Parser(operator_atoms(model), hooks).parse(text)


def parse_base_operator(text, model: ChartModel) -> BaseOp:
    d = parse_operator(text, model)
    out = {}
    for (alpha, tmask), coef in d.terms.items():
        if tmask or any(m for (m, _) in coef.terms):
            raise ValueError("operator is not a base-chart operator")
        out[alpha] = coef
    return BaseOp(model.alg, out)
