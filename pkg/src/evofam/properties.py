"""Discrete checks of evolution-family properties.

Every checker takes a form, a subdivision and a grid of times, and returns
a small report.  Reductions run in grid order so that results do not depend
on the number of worker threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import ordered_map
from .forms import FormError, NonautonomousForm, returned_adjoint_form, shift
from .propagator import DEFAULT_EXP_TOL, Propagator, Subdivision, fitted_order

MODULUS_SPACES = ("V", "H", "Vprime")


def _max(values) -> float:
    out = 0.0
    for v in values:
        out = max(out, float(v))
    return out


@dataclass
class AxiomReport:
    max_identity_defect: float
    max_cocycle_defect: float
    samples: int

    def to_dict(self) -> dict:
        return {
            "max_identity_defect": self.max_identity_defect,
            "max_cocycle_defect": self.max_cocycle_defect,
            "samples": self.samples,
        }


def check_axioms(
    form: NonautonomousForm,
    subdivision: Subdivision,
    triples,
    exp_tolerance: float = DEFAULT_EXP_TOL,
    workers: int = 1,
) -> AxiomReport:
    """Max ``|U(t,t) - I|`` and ``|U(t,s) - U(t,r) U(r,s)|`` in ``L(H)`` over ``(r, s, t)``."""
    triples = [tuple(map(float, x)) for x in triples]
    for tr in triples:
        if len(tr) != 3 or not tr[1] <= tr[0] <= tr[2]:
            raise FormError(f"triples must be (r, s, t) with s <= r <= t, got {tr}")
    prop = Propagator(form, subdivision, exp_tolerance)
    op = form.triple.op_norm
    n = form.dim

    def one(tr):
        r, s, t = tr
        ident = max(op(prop.matrix(x, x) - np.eye(n)) for x in (r, s, t))
        U = prop.matrix(t, s)
        cocycle = op(U - prop.matrix(t, r) @ prop.matrix(r, s))
        return ident, cocycle

    rows = ordered_map(one, triples, workers)
    return AxiomReport(_max(r[0] for r in rows), _max(r[1] for r in rows), len(rows))


@dataclass
class DualityReport:
    max_defect: float
    samples: int
    reversed_partition: bool

    def to_dict(self) -> dict:
        return {"max_defect": self.max_defect, "samples": self.samples, "reversed_partition": self.reversed_partition}


def _check_pairs(pairs, horizon):
    pairs = [tuple(map(float, p)) for p in pairs]
    for t, s in pairs:
        if not 0 <= s <= t <= horizon:
            raise FormError(f"pairs must satisfy 0 <= s <= t <= T, got ({t}, {s})")
    return pairs


def check_duality(
    form: NonautonomousForm,
    subdivision: Subdivision,
    pairs,
    exp_tolerance: float = DEFAULT_EXP_TOL,
    reverse_partition: bool = True,
    workers: int = 1,
) -> DualityReport:
    """Max over ``(t, s)`` of ``|adj(U*_r,L(t,s)) - U_{L_T}(T-s, T-t)|`` in ``L(H)``.

    ``adj`` is the H-adjoint and ``U*_r`` the propagator of the returned
    adjoint form.  Passing ``reverse_partition=False`` evaluates the right
    side on ``L`` itself; that is wrong for nonuniform ``L`` and serves as a
    regression guard.
    """
    T = form.horizon
    pairs = _check_pairs(pairs, T)
    tri = form.triple
    left = Propagator(returned_adjoint_form(form), subdivision, exp_tolerance)
    right = Propagator(form, subdivision.reverse() if reverse_partition else subdivision, exp_tolerance)

    def one(p):
        t, s = p
        lhs = tri.h_adjoint(left.matrix(t, s))
        rhs = right.matrix(T - s, T - t)
        return tri.op_norm(lhs - rhs)

    defects = ordered_map(one, pairs, workers)
    return DualityReport(_max(defects), len(defects), reverse_partition)


@dataclass
class RescalingReport:
    omega_s: float
    max_defect: float
    samples: int

    def to_dict(self) -> dict:
        return {"omega_s": self.omega_s, "max_defect": self.max_defect, "samples": self.samples}


def check_rescaling(
    form: NonautonomousForm,
    subdivision: Subdivision,
    pairs,
    omega_s: float,
    exp_tolerance: float = DEFAULT_EXP_TOL,
    workers: int = 1,
) -> RescalingReport:
    """Max of ``|U_shifted(t,s) - exp(-omega_s (t-s)) U(t,s)|`` in ``L(H)``."""
    pairs = _check_pairs(pairs, form.horizon)
    base = Propagator(form, subdivision, exp_tolerance)
    shifted = Propagator(shift(form, omega_s), subdivision, exp_tolerance)
    op = form.triple.op_norm

    def one(p):
        t, s = p
        return op(shifted.matrix(t, s) - math.exp(-omega_s * (t - s)) * base.matrix(t, s))

    defects = ordered_map(one, pairs, workers)
    return RescalingReport(float(omega_s), _max(defects), len(defects))


@dataclass
class ExtensionReport:
    bound_vprime: float
    bound_adjoint_v: float
    bound_h: float
    bound_v: float
    agreement_defect: float
    samples: int

    def to_dict(self) -> dict:
        return {
            "bound_vprime_direct": self.bound_vprime,
            "bound_returned_adjoint_V": self.bound_adjoint_v,
            "bound_H": self.bound_h,
            "bound_V": self.bound_v,
            "agreement_defect": self.agreement_defect,
            "samples": self.samples,
        }


def vprime_extension_bound(
    form: NonautonomousForm,
    subdivision: Subdivision,
    pairs,
    exp_tolerance: float = DEFAULT_EXP_TOL,
    workers: int = 1,
) -> ExtensionReport:
    """Bound ``c`` for ``|U(t,s) x|_{V'} <= c |x|_{V'}`` computed two ways.

    Directly as ``max |U_L(t,s)|_{L(V')}``, and through the returned adjoint
    family as ``max |U*_r,{L_T}(T-s, T-t)|_{L(V)}``.  The agreement defect is
    the largest per-pair difference of the two norms.
    """
    T = form.horizon
    pairs = _check_pairs(pairs, T)
    tri = form.triple
    direct = Propagator(form, subdivision, exp_tolerance)
    dual = Propagator(returned_adjoint_form(form), subdivision.reverse(), exp_tolerance)

    def one(p):
        t, s = p
        U = direct.matrix(t, s)
        a = tri.op_norm(U, "Vprime")
        b = tri.op_norm(dual.matrix(T - s, T - t), "V")
        return a, b, tri.op_norm(U, "H"), tri.op_norm(U, "V")

    rows = ordered_map(one, pairs, workers)
    return ExtensionReport(
        _max(r[0] for r in rows),
        _max(r[1] for r in rows),
        _max(r[2] for r in rows),
        _max(r[3] for r in rows),
        _max(abs(r[0] - r[1]) for r in rows),
        len(rows),
    )


@dataclass
class ModulusTable:
    space: str
    epsilon: float
    entries: list = field(default_factory=list)

    @property
    def deltas(self) -> np.ndarray:
        return np.array([e[2] for e in self.entries])

    @property
    def increments(self) -> np.ndarray:
        return np.array([e[3] for e in self.entries])

    @property
    def fitted_exponent(self) -> float:
        return fitted_order(self.deltas, self.increments)

    def to_dict(self) -> dict:
        return {
            "space": self.space,
            "epsilon": self.epsilon,
            "fitted_exponent": _finite_or_none(self.fitted_exponent),
            "pairs": len(self.entries),
        }


def _finite_or_none(x):
    return x if math.isfinite(x) else None


def _check_separated(pair_grid, eps, horizon):
    out = []
    for (a, b) in pair_grid:
        (t, s), (t2, s2) = tuple(map(float, a)), tuple(map(float, b))
        for tt, ss in ((t, s), (t2, s2)):
            if tt - ss < eps * (1 - 1e-12) or ss < 0 or tt > horizon:
                raise FormError(f"pair ({tt}, {ss}) is not {eps}-separated from the diagonal inside [0, T]")
        out.append(((t, s), (t2, s2)))
    return out


def continuity_modulus(
    form: NonautonomousForm,
    subdivision: Subdivision,
    space: str,
    epsilon: float,
    pair_grid,
    exp_tolerance: float = DEFAULT_EXP_TOL,
    workers: int = 1,
) -> ModulusTable:
    """Increments ``|U(t,s) - U(t',s')|`` in ``L(space)`` over the pair grid.

    ``L(V')`` norms go through the H-adjoint in ``L(V)``.
    """
    if space not in MODULUS_SPACES:
        raise FormError(f"space must be one of {MODULUS_SPACES}, got {space!r}")
    if not epsilon > 0:
        raise FormError(f"epsilon must be positive, got {epsilon}")
    pairs = _check_separated(pair_grid, epsilon, form.horizon)
    prop = Propagator(form, subdivision, exp_tolerance)
    op = form.triple.op_norm

    def one(pp):
        (t, s), (t2, s2) = pp
        inc = op(prop.matrix(t, s) - prop.matrix(t2, s2), space)
        return ((t, s), (t2, s2), abs(t - t2) + abs(s - s2), inc)

    return ModulusTable(space, epsilon, ordered_map(one, pairs, workers))


def modulus_tables(
    form: NonautonomousForm,
    subdivision: Subdivision,
    epsilon: float,
    pair_grid,
    exp_tolerance: float = DEFAULT_EXP_TOL,
    workers: int = 1,
) -> dict:
    """Modulus tables for V, H and V' sharing one set of propagator evaluations."""
    if not epsilon > 0:
        raise FormError(f"epsilon must be positive, got {epsilon}")
    pairs = _check_separated(pair_grid, epsilon, form.horizon)
    prop = Propagator(form, subdivision, exp_tolerance)
    op = form.triple.op_norm

    def one(pp):
        (t, s), (t2, s2) = pp
        D = prop.matrix(t, s) - prop.matrix(t2, s2)
        return [op(D, sp) for sp in MODULUS_SPACES]

    rows = ordered_map(one, pairs, workers)
    tables = {}
    for i, sp in enumerate(MODULUS_SPACES):
        entries = [(a, b, abs(a[0] - b[0]) + abs(a[1] - b[1]), r[i]) for (a, b), r in zip(pairs, rows)]
        tables[sp] = ModulusTable(sp, epsilon, entries)
    return tables


def pair_grid(horizon: float, epsilon: float, count: int, seed: int = 0, decades: float = 3.0) -> list:
    """Random base pairs with perturbations ``delta`` log-spaced over ``decades``.

    All points stay ``epsilon``-separated from the diagonal.
    """
    if not epsilon > 0:
        raise FormError(f"epsilon must be positive, got {epsilon}")
    if not epsilon < horizon:
        raise FormError("epsilon must be smaller than the horizon")
    rng = np.random.default_rng(seed)
    dmax = min(0.1 * horizon, 0.5 * (horizon - epsilon))
    deltas = dmax * np.logspace(-decades, 0, count)
    out = []
    for d in deltas:
        # base point with room for a perturbation of size d
        while True:
            s = rng.uniform(0, horizon - epsilon)
            t = rng.uniform(s + epsilon, horizon)
            theta = rng.uniform(0, 2 * np.pi)
            dt, ds = d * np.cos(theta), d * np.sin(theta)
            scale = d / (abs(dt) + abs(ds))
            t2, s2 = t + dt * scale, s + ds * scale
            if 0 <= s2 and t2 <= horizon and t2 - s2 >= epsilon:
                break
        out.append(((float(t), float(s)), (float(t2), float(s2))))
    return out


def random_triples(horizon: float, count: int, seed: int = 0) -> list:
    """Sorted random ``(r, s, t)`` triples with ``s <= r <= t``."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        s, r, t = np.sort(rng.uniform(0, horizon, 3))
        out.append((float(r), float(s), float(t)))
    return out


def random_pairs(horizon: float, count: int, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        s, t = np.sort(rng.uniform(0, horizon, 2))
        out.append((float(t), float(s)))
    return out
