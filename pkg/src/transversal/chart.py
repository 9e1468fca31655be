"""Foliated polynomial chart models and their connection data.

A model is a chart with an involutive polynomial frame for the distribution,
a lift of a complement frame (the splitting), and optional Christoffel
tables.  Everything downstream assumes a validated model: the frame is
pointwise independent at the origin, brackets of distribution fields expand
exactly in the distribution frame over the polynomial ring, and connection
tables satisfy their defining constraints.

Vector fields on the base chart are tuples of polynomial coefficients, one
per coordinate.  Sections of the distribution (resp. of the complement) are
lists of coefficients in the distribution frame (resp. complement frame).
"""

from __future__ import annotations

from fractions import Fraction
from itertools import permutations

from .algebra import Algebra, Elt, exact_div


class ModelError(ValueError):
    pass


def vf_apply(v, f: Elt) -> Elt:
    out = f.alg.zero()
    for i, vi in enumerate(v):
        if vi:
            out = out + vi * f.d_even(i)
    return out


def vf_bracket(v, w):
    """Commutator of base vector fields, coefficientwise."""
    alg = v[0].alg
    n = len(v)
    out = []
    for i in range(n):
        c = alg.zero()
        for j in range(n):
            c = c + v[j] * w[i].d_even(j) - w[j] * v[i].d_even(j)
        out.append(c)
    return tuple(out)


def vf_scale(f: Elt, v):
    return tuple(f * vi for vi in v)


def vf_add(v, w):
    return tuple(a + b for a, b in zip(v, w))


def vf_zero(alg, n):
    return tuple(alg.zero() for _ in range(n))


def _det(alg, mat):
    n = len(mat)
    out = alg.zero()
    for perm in permutations(range(n)):
        inv = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        term = alg.scalar(Fraction((-1) ** inv))
        for i in range(n):
            term = term * mat[i][perm[i]]
        out = out + term
    return out


def _minor(mat, row, col):
    return [
        [mat[i][j] for j in range(len(mat)) if j != col]
        for i in range(len(mat))
        if i != row
    ]


class ChartModel:
    """Validated chart with distribution frame and complement lift."""

    def __init__(self, n, r, f_frame, b_lift, perfect=False, complex_typed=False,
                 even_names=None, name=None, weight_table=None):
        if even_names is None:
            even_names = tuple(f"x{i+1}" for i in range(n))
        odd_names = tuple(f"xi{a+1}" for a in range(r))
        self.alg = Algebra(tuple(even_names), odd_names)
        self.n = n
        self.r = r
        self.q = n - r
        self.name = name
        self.perfect = perfect
        self.complex_typed = complex_typed
        self.f_frame = tuple(tuple(c for c in v) for v in f_frame)
        self.b_lift = tuple(tuple(c for c in v) for v in b_lift)
        # generator weights for truncation gradings: even then odd, ints
        self.weight_table = weight_table
        self._validate()

    # frame field by mixed index: 0..r-1 distribution, r..n-1 complement
    def frame_field(self, e):
        return self.f_frame[e] if e < self.r else self.b_lift[e - self.r]

    def _validate(self):
        alg = self.alg
        n, r = self.n, self.r
        if len(self.f_frame) != r or len(self.b_lift) != n - r:
            raise ModelError("frame sizes inconsistent with (n, r)")
        # coefficient matrix: rows = coordinates, columns = frame fields
        A = [[self.frame_field(e)[i] for e in range(n)] for i in range(n)]
        self.frame_matrix = A
        self.frame_det = _det(alg, A)
        if not self.frame_det.constant_term():
            raise ModelError("frame degenerate at the chart origin")
        self.frame_adj = [
            [
                _det(alg, _minor(A, j, i)).scale(Fraction((-1) ** (i + j)))
                for j in range(n)
            ]
            for i in range(n)
        ]
        # structure functions: [u_a, u_b] = sum_c c^c_{ab} u_c, exactly
        self.structure = [[None] * r for _ in range(r)]
        for a in range(r):
            for b in range(r):
                br = vf_bracket(self.f_frame[a], self.f_frame[b])
                fpart, bpart = self.project(br)
                if any(bpart):
                    raise ModelError(
                        f"frame not involutive: [u{a+1},u{b+1}] leaves the span"
                    )
                self.structure[a][b] = fpart
        if self.perfect:
            for a in range(self.q):
                for b in range(self.q):
                    br = vf_bracket(self.b_lift[a], self.b_lift[b])
                    fpart, _ = self.project(br)
                    if any(fpart):
                        raise ModelError(
                            "perfect flag set but complement lift is not involutive"
                        )

    # -- frame expansion ----------------------------------------------

    def mixed_coords(self, v):
        """Coefficients of v in the mixed frame; exact, or ModelError."""
        n = len(v)
        out = []
        for e in range(n):
            num = self.alg.zero()
            for i in range(n):
                num = num + self.frame_adj[e][i] * v[i]
            q = exact_div(num, self.frame_det)
            if q is None:
                raise ModelError("vector field not in the polynomial frame span")
            out.append(q)
        return out

    def project(self, v):
        """Split v = (distribution part, complement part) in frame coords."""
        coords = self.mixed_coords(v)
        return coords[: self.r], coords[self.r :]

    def f_section_field(self, a_coeffs):
        v = vf_zero(self.alg, self.n)
        for a, c in enumerate(a_coeffs):
            v = vf_add(v, vf_scale(c, self.f_frame[a]))
        return v

    def b_section_field(self, b_coeffs):
        v = vf_zero(self.alg, self.n)
        for b, c in enumerate(b_coeffs):
            v = vf_add(v, vf_scale(c, self.b_lift[b]))
        return v

    def coordinate_field(self, i):
        return tuple(
            self.alg.one() if j == i else self.alg.zero() for j in range(self.n)
        )

    def bott(self, a_field, b_coeffs):
        """Flat distribution action on the complement: pr_B [a, j(b)]."""
        bf = self.b_section_field(b_coeffs)
        _, bpart = self.project(vf_bracket(a_field, bf))
        return bpart

    def validate_report(self):
        """Structure-function table as printable strings."""
        rows = []
        for a in range(self.r):
            for b in range(self.r):
                for c in range(self.r):
                    val = self.structure[a][b][c]
                    if val:
                        rows.append((f"c^{c+1}_{a+1}{b+1}", str(val)))
        return rows


class ConnectionData:
    """Christoffel tables: torsion-free connection on the distribution and
    a full-direction connection on the complement extending the flat one.

    gamma_tilde[a][b][c]: distribution-frame Christoffels.
    gamma_b[e][beta][gamma]: complement Christoffels per mixed direction e;
    the distribution-direction block is pinned to the flat action and
    rejected if supplied otherwise.
    """

    def __init__(self, model: ChartModel, gamma_tilde=None, gamma_b=None):
        alg = model.alg
        r, q, n = model.r, model.q, model.n
        self.model = model
        if gamma_tilde is None:
            # canonical torsion-free choice: half the structure functions
            gamma_tilde = [
                [
                    [model.structure[a][b][c] * Fraction(1, 2) for c in range(r)]
                    for b in range(r)
                ]
                for a in range(r)
            ]
        self.gamma_tilde = gamma_tilde
        bott_table = [
            [model.bott(model.f_frame[a], _unit(alg, q, beta)) for beta in range(q)]
            for a in range(r)
        ]
        if gamma_b is None:
            gamma_b = [
                [[alg.zero() for _ in range(q)] for _ in range(q)] for _ in range(n)
            ]
            for a in range(r):
                for beta in range(q):
                    for gamma in range(q):
                        gamma_b[a][beta][gamma] = bott_table[a][beta][gamma]
        self.gamma_b = gamma_b
        # torsion-freeness against the structure functions
        for a in range(r):
            for b in range(r):
                for c in range(r):
                    lhs = self.gamma_tilde[a][b][c] - self.gamma_tilde[b][a][c]
                    if lhs != model.structure[a][b][c]:
                        raise ModelError(
                            "connection on the distribution is not torsion-free"
                        )
        for a in range(r):
            for beta in range(q):
                for gamma in range(q):
                    if self.gamma_b[a][beta][gamma] != bott_table[a][beta][gamma]:
                        raise ModelError(
                            "complement connection does not extend the flat action"
                        )

    # -- connections -------------------------------------------------

    def nabla_tilde(self, a_coeffs, b_coeffs):
        """Distribution connection nabla~_a b, both arguments frame coords."""
        m = self.model
        out = [m.alg.zero() for _ in range(m.r)]
        for a, pa in enumerate(a_coeffs):
            if not pa:
                continue
            for b, gb in enumerate(b_coeffs):
                if gb:
                    df = vf_apply(m.f_frame[a], gb)
                    out[b] = out[b] + pa * df
                    for c in range(m.r):
                        out[c] = out[c] + pa * gb * self.gamma_tilde[a][b][c]
        return out

    def nabla_F(self, u_field, a_coeffs):
        """Induced full-direction connection on the distribution."""
        m = self.model
        fpart, bpart = m.project(u_field)
        out = self.nabla_tilde(fpart, a_coeffs)
        # flat complement action: pr_F [j(pr_B u), a]
        bfield = m.b_section_field(bpart)
        afield = m.f_section_field(a_coeffs)
        fb, _ = m.project(vf_bracket(bfield, afield))
        return [x + y for x, y in zip(out, fb)]

    def nabla_B(self, u_field, b_coeffs):
        """Complement connection nabla^B_u b from the Christoffel table."""
        m = self.model
        coords = m.mixed_coords(u_field)
        out = [vf_apply(u_field, c) for c in b_coeffs]
        for e in range(m.n):
            if not coords[e]:
                continue
            for beta, h in enumerate(b_coeffs):
                if h:
                    for gamma in range(m.q):
                        g = self.gamma_b[e][beta][gamma]
                        if g:
                            out[gamma] = out[gamma] + coords[e] * h * g
        return out

    def nabla_TM(self, u_field, v_field):
        """Adapted connection on the whole tangent sheaf."""
        m = self.model
        fpart, bpart = m.project(v_field)
        fval = self.nabla_F(u_field, fpart)
        bval = self.nabla_B(u_field, bpart)
        return vf_add(m.f_section_field(fval), m.b_section_field(bval))

    def nabla_bas(self, a_coeffs, u_field):
        """Basic connection: nabla^F_u a + [a, u], as a base field."""
        m = self.model
        afield = m.f_section_field(a_coeffs)
        val = m.f_section_field(self.nabla_F(u_field, a_coeffs))
        return vf_add(val, vf_bracket(afield, u_field))

    def nabla_bas_split(self, a_coeffs, u_field):
        """Equivalent torsion-free form nabla~_a pr_F u + Bott_a pr_B u."""
        m = self.model
        fpart, bpart = m.project(u_field)
        t1 = self.nabla_tilde(a_coeffs, fpart)
        t2 = m.bott(m.f_section_field(a_coeffs), bpart)
        return vf_add(m.f_section_field(t1), m.b_section_field(t2))

    def basic_curvature(self, a1, a2, u_field):
        """Five-term basic curvature, valued in distribution coordinates."""
        m = self.model
        f1 = m.f_section_field(a1)
        f2 = m.f_section_field(a2)
        br12, _ = m.project(vf_bracket(f1, f2))
        t1 = self.nabla_F(u_field, br12)
        n1 = m.f_section_field(self.nabla_F(u_field, a1))
        t2, rest2 = m.project(vf_bracket(n1, f2))
        n2 = m.f_section_field(self.nabla_F(u_field, a2))
        t3, rest3 = m.project(vf_bracket(f1, n2))
        if any(rest2) or any(rest3):
            raise ModelError("bracket of distribution sections left the span")
        w1 = self.nabla_bas(a2, u_field)
        t4 = self.nabla_F(w1, a1)
        w2 = self.nabla_bas(a1, u_field)
        t5 = self.nabla_F(w2, a2)
        return [p - q - s - t + v for p, q, s, t, v in zip(t1, t2, t3, t4, t5)]

    def curvature_tilde(self, a1, a2, a3):
        """Curvature of the distribution connection, computed from tables."""
        m = self.model
        t1 = self.nabla_tilde(a1, self.nabla_tilde(a2, a3))
        t2 = self.nabla_tilde(a2, self.nabla_tilde(a1, a3))
        br, rest = m.project(vf_bracket(m.f_section_field(a1), m.f_section_field(a2)))
        if any(rest):
            raise ModelError("bracket of distribution sections left the span")
        t3 = self.nabla_tilde(br, a3)
        return [x - y - z for x, y, z in zip(t1, t2, t3)]


def _unit(alg, size, k):
    return [alg.one() if j == k else alg.zero() for j in range(size)]
