"""The three reference chart models shipped with the package.

M1 "line foliation": flat adapted chart on the plane.
M2 "twisted frame":  nonzero structure functions and a tilted splitting.
M3 "complex line":   Gaussian-rational chart z, zb with the antiholomorphic
                     direction as the distribution.

Weight tables make the homological vector field weight-homogeneous, which
is what the truncated cohomology machinery grades by.
"""

from __future__ import annotations

from .chart import ChartModel, ConnectionData


def _fields(alg, *specs):
    """specs are dicts coordinate-index -> Elt coefficient."""
    out = []
    for spec in specs:
        out.append(
            tuple(spec.get(i, alg.zero()) for i in range(alg.n_even))
        )
    return out


def m1():
    from .algebra import Algebra

    alg = Algebra(("x", "y"), ("xi1",))
    one = alg.one()
    f_frame = _fields(alg, {0: one})
    b_lift = _fields(alg, {1: one})
    return ChartModel(
        2, 1, f_frame, b_lift, perfect=True, even_names=("x", "y"), name="m1",
        weight_table=((1, 0), (1,)),
    )


def m2():
    from .algebra import Algebra

    alg = Algebra(("x", "y", "w"), ("xi1", "xi2"))
    one = alg.one()
    x = alg.even_gen(0)
    f_frame = _fields(alg, {0: one}, {1: one, 0: x})
    b_lift = _fields(alg, {2: one, 0: x})
    return ChartModel(
        3, 2, f_frame, b_lift, perfect=True, even_names=("x", "y", "w"), name="m2",
        weight_table=((1, 0, 1), (1, 0)),
    )


def m3():
    from .algebra import Algebra

    alg = Algebra(("z", "zb"), ("xi1",))
    one = alg.one()
    f_frame = _fields(alg, {1: one})
    b_lift = _fields(alg, {0: one})
    return ChartModel(
        2, 1, f_frame, b_lift, perfect=True, complex_typed=True,
        even_names=("z", "zb"), name="m3", weight_table=((1, 0), (0,)),
    )


MODEL_BUILDERS = {"m1": m1, "m2": m2, "m3": m3}


def shipped_model(name):
    try:
        return MODEL_BUILDERS[name]()
    except KeyError:
        raise ValueError(f"unknown shipped model {name!r}") from None


def default_connection(model):
    return ConnectionData(model)


def twisted_connection(model, seed=0):
    """A nontrivial admissible connection: same torsion-free table, plus
    polynomial Christoffels in the free complement directions."""
    import random

    rng = random.Random(seed)
    conn = ConnectionData(model)
    alg = model.alg
    gamma_b = [
        [[conn.gamma_b[e][beta][gamma] for gamma in range(model.q)]
         for beta in range(model.q)]
        for e in range(model.n)
    ]
    for e in range(model.r, model.n):
        for beta in range(model.q):
            for gamma in range(model.q):
                exps = [0] * model.n
                exps[rng.randrange(model.n)] = rng.randrange(0, 2)
                gamma_b[e][beta][gamma] = alg.monomial(
                    0, tuple(exps), rng.randrange(-2, 3)
                )
    return ConnectionData(model, gamma_tilde=conn.gamma_tilde, gamma_b=gamma_b)
