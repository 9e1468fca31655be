"""Generic contraction data, the perturbation series, and the tensor trick.

Maps are lazy objects; a perturbed datum never materializes matrices.  Each
series application iterates until the summand is exactly zero and raises a
hard error when the iteration cap is exceeded: silent truncation would make
every downstream identity meaningless.

Elements only need +, -, unary -, equality and truthiness, so the same
engine drives operators, symmetric tensors and arity-graded tensors alike.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable


class NonNilpotentError(RuntimeError):
    """A perturbation series failed to terminate on a concrete element."""


class ContractViolation(RuntimeError):
    """A declared filtration property failed on a concrete element."""


@dataclass
class MapObject:
    """A degree-graded linear map with a label."""

    name: str
    degree: int
    fn: Callable
    weight_effect: int | None = None  # declared change of filtration weight

    def __call__(self, x):
        return self.fn(x)


@dataclass
class Contraction:
    """Projection/inclusion/homotopy between two complexes."""

    name: str
    src_diff: MapObject
    tgt_diff: MapObject
    proj: MapObject
    incl: MapObject
    homotopy: MapObject

    def identities(self, src_samples=(), tgt_samples=()):
        """Exact pass/fail rows for the retraction and side conditions."""
        rows = []
        d, dt = self.src_diff, self.tgt_diff
        phi, psi, h = self.proj, self.incl, self.homotopy
        for label, t in tgt_samples:
            rows.append(_row("proj_incl_identity", label, phi(psi(t)) - t))
            rows.append(_row("homotopy_kills_incl", label, h(psi(t))))
            rows.append(_row("incl_chain_map", label, d(psi(t)) - psi(dt(t))))
        for label, x in src_samples:
            gap = psi(phi(x)) - x - d(h(x)) - h(d(x))
            rows.append(_row("incl_proj_homotopic_id", label, gap))
            rows.append(_row("proj_kills_homotopy", label, phi(h(x))))
            rows.append(_row("homotopy_squares_zero", label, h(h(x))))
            rows.append(_row("proj_chain_map", label, dt(phi(x)) - phi(d(x))))
        return rows


def _row(identity, label, residual):
    return {"identity": identity, "sample": str(label), "ok": not residual}


def verify_contraction(c: Contraction, src_samples=(), tgt_samples=()):
    return c.identities(src_samples, tgt_samples)


def _sum_series(seed, outer, step, cap, what):
    """outer(seed) + outer(step seed) + ... until the orbit hits zero."""
    if not seed:
        return seed
    total = None
    current = seed
    count = 0
    while current:
        piece = outer(current)
        if piece:
            total = piece if total is None else total + piece
        current = step(current)
        count += 1
        if count > cap:
            raise NonNilpotentError(
                f"{what}: series did not terminate within {cap} iterations"
            )
    return total if total is not None else outer(seed)


def perturb(c: Contraction, rho: MapObject, cap=64, weight=None) -> Contraction:
    """Homological perturbation of a contraction by rho.

    Termination is per element: each series stops when its summand becomes
    exactly zero.  With ``weight`` given, every homotopy-then-perturbation
    step is checked to strictly lower it (the filtered variant's contract).
    """
    phi, psi, h = c.proj, c.incl, c.homotopy
    d, dt = c.src_diff, c.tgt_diff

    def step(z):
        """One (rho h)-iteration with the optional weight certificate."""
        hz = h(z)
        if not hz:
            return hz
        y = rho(hz)
        if weight is not None and y:
            wz, wy = weight(z), weight(y)
            if wy >= wz:
                raise ContractViolation(
                    f"{c.name}: perturbation step does not lower the weight "
                    f"({wz} -> {wy})"
                )
        return y

    def step_after_h(z):
        """One (h rho)-iteration, used for series starting with h or psi."""
        y = rho(z)
        if weight is not None and y:
            wz, wy = weight(z), weight(y)
            if wy >= wz:
                raise ContractViolation(
                    f"{c.name}: perturbation step does not lower the weight "
                    f"({wz} -> {wy})"
                )
        return h(y)

    proj_flat = MapObject(
        phi.name + "_flat",
        phi.degree,
        lambda x: _sum_series(x, phi, step, cap, "perturbed projection"),
    )
    incl_flat = MapObject(
        psi.name + "_flat",
        psi.degree,
        lambda t: _sum_series(
            psi(t), lambda z: z, step_after_h, cap, "perturbed inclusion"
        ),
    )
    homotopy_flat = MapObject(
        h.name + "_flat",
        h.degree,
        lambda x: _sum_series(
            h(x), lambda z: z, step_after_h, cap, "perturbed homotopy"
        ),
    )

    def tgt_diff_new(t):
        base = dt(t)
        seed = rho(psi(t))
        if not seed:
            return base
        extra = _sum_series(seed, phi, step, cap, "perturbed target differential")
        return base + extra

    return Contraction(
        name=f"{c.name}+perturbation",
        src_diff=MapObject(d.name + "+rho", 1, lambda x: d(x) + rho(x)),
        tgt_diff=MapObject(dt.name + "+theta", 1, tgt_diff_new),
        proj=proj_flat,
        incl=incl_flat,
        homotopy=homotopy_flat,
    )


def perturb_filtered(c: Contraction, rho: MapObject, weight, cap=64) -> Contraction:
    """Perturbation whose termination is certified by a declared weight."""
    return perturb(c, rho, cap=cap, weight=weight)


def tensor_trick(c: Contraction, src_adapter, tgt_adapter, name=None) -> Contraction:
    """Lift a contraction to reduced tensor powers.

    An adapter supplies the arity-graded tensor structure of one side:
      apply_each(x, f)          -- f on every leg (even maps only),
      apply_derivation(x, f)    -- sum over legs of id(x)..f..id with signs,
      apply_homotopy(x, pf, f)  -- sum over legs of pf^(i-1) (x) f (x) id.
    """
    phi, psi, h = c.proj, c.incl, c.homotopy

    def psiphi(x):
        return psi(phi(x))

    return Contraction(
        name=name or f"T({c.name})",
        src_diff=MapObject(
            f"T({c.src_diff.name})", 1, lambda x: src_adapter.apply_derivation(x, c.src_diff)
        ),
        tgt_diff=MapObject(
            f"T({c.tgt_diff.name})", 1, lambda t: tgt_adapter.apply_derivation(t, c.tgt_diff)
        ),
        proj=MapObject(
            f"T({phi.name})", 0, lambda x: src_adapter.apply_each(x, phi, into=tgt_adapter)
        ),
        incl=MapObject(
            f"T({psi.name})", 0, lambda t: tgt_adapter.apply_each(t, psi, into=src_adapter)
        ),
        homotopy=MapObject(
            f"T({h.name})", -1, lambda x: src_adapter.apply_homotopy(x, psiphi, h)
        ),
    )
