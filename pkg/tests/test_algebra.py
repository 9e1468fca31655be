from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from transversal.algebra import Algebra, Elt, exact_div, koszul_sign
from transversal.grammar import format_elt, parse_form
from transversal.scalars import GaussRat, format_scalar, parse_scalar

ALG = Algebra(("x1", "x2"), ("xi1", "xi2", "xi3"))
x1, x2 = ALG.even_gen(0), ALG.even_gen(1)
xi1, xi2, xi3 = (ALG.odd_gen(a) for a in range(3))


def random_elt(alg, rng, max_deg=3, n_terms=4):
    out = alg.zero()
    for _ in range(n_terms):
        exps = tuple(rng.randrange(0, max_deg + 1) for _ in range(alg.n_even))
        mask = rng.randrange(0, 1 << alg.n_odd)
        c = Fraction(rng.randrange(-6, 7), rng.randrange(1, 5))
        out = out + alg.monomial(mask, exps, c)
    return out


def homogeneous_elt(alg, rng, odd_degree, max_deg=3):
    masks = [m for m in range(1 << alg.n_odd) if bin(m).count("1") == odd_degree]
    out = alg.zero()
    for _ in range(3):
        exps = tuple(rng.randrange(0, max_deg + 1) for _ in range(alg.n_even))
        c = Fraction(rng.randrange(-6, 7), 1)
        out = out + alg.monomial(rng.choice(masks), exps, c)
    return out


def test_odd_generator_squares_to_zero():
    assert not xi1 * xi1


def test_graded_commutativity_on_generators():
    assert xi1 * xi2 == -(xi2 * xi1)
    assert x1 * xi1 == xi1 * x1


def test_bilinearity_example():
    assert (x1 * xi1) * (x2 * xi2) == x1 * x2 * xi1 * xi2


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_wedge_associative_and_graded_commutative(seed):
    import random

    rng = random.Random(seed)
    a = homogeneous_elt(ALG, rng, rng.randrange(0, 3))
    b = homogeneous_elt(ALG, rng, rng.randrange(0, 3))
    c = random_elt(ALG, rng)
    assert (a * b) * c == a * (b * c)
    pa, pb = a.parity(), b.parity()
    sign = -1 if (pa and pb) else 1
    assert a * b == (b * a).scale(sign)


def test_koszul_sign_examples():
    assert koszul_sign([0, 1, 2], [1, 1, 1]) == 1
    assert koszul_sign([1, 0], [1, 1]) == -1
    assert koszul_sign([1, 0], [0, 1]) == 1
    assert koszul_sign([1, 0], [2, 1]) == 1


def test_koszul_sign_rejects_non_permutation():
    with pytest.raises(ValueError):
        koszul_sign([0, 0], [1, 1])


def test_derivatives():
    f = x1 * x1 * x2 + x2
    assert f.d_even(0) == 2 * x1 * x2
    w = xi1 * xi3
    assert w.d_odd(0) == xi3
    assert w.d_odd(2) == -xi1
    assert not w.d_odd(1)


def test_exact_division():
    f = (x1 + x2) * (x1 * x1 + 3)
    assert exact_div(f, x1 + x2) == x1 * x1 + 3
    assert exact_div(f, x1 + 1) is None


def test_scalar_roundtrip():
    for s in [Fraction(3, 2), Fraction(-7), GaussRat(1, -2), GaussRat(0, 3), GaussRat(Fraction(1, 2), Fraction(5, 3))]:
        assert parse_scalar(format_scalar(s)) == s


def test_gaussian_arithmetic():
    i = GaussRat(0, 1)
    assert i * i == -1
    assert (1 + i) * (1 - i) == 2
    assert (GaussRat(2, 1) / GaussRat(2, 1)) == 1


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_grammar_roundtrip(seed):
    import random

    rng = random.Random(seed)
    e = random_elt(ALG, rng)
    assert parse_form(format_elt(e), ALG) == e


def test_grammar_examples():
    e = parse_form("3/2*x1^2*x2*xi1^xi3", ALG)
    assert e == ALG.monomial(0b101, (2, 1), Fraction(3, 2))
    assert format_elt(e) == "3/2*x1^2*x2*xi1^xi3"
    assert parse_form("0", ALG) == ALG.zero()
    assert parse_form("x1 - x1", ALG) == ALG.zero()


def test_complex_grammar():
    calg = Algebra(("z", "zb"), ("xi1",))
    e = parse_form("(1/2+1/2*i)*z*xi1", calg, complex_typed=True)
    assert e.terms[(1, (1, 0))] == GaussRat(Fraction(1, 2), Fraction(1, 2))
    assert parse_form(format_elt(e), calg, complex_typed=True) == e
