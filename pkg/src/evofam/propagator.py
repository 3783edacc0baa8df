"""Product propagators built from cell-averaged generators.

On a subdivision ``0 = l_0 < ... < l_N = T`` every cell gets the average of
``A(r)`` over the cell, and ``U(t, s)`` is the ordered product of the
semigroups of these averaged generators over the pieces of ``[s, t]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .forms import FormError, NonautonomousForm
from .gelfand import GelfandTriple

DEFAULT_EXP_TOL = 1e-12
DEFAULT_QUADRATURE = 8
MAX_REFERENCE_LEVEL = 20


class ConvergenceError(RuntimeError):
    """The dyadic reference did not reach its tolerance."""

    def __init__(self, msg, last=None, difference=math.nan):
        super().__init__(msg)
        self.last = last
        self.difference = difference


@dataclass(frozen=True, eq=False)
class Subdivision:
    """Strictly increasing partition of ``[0, T]``.

    The reflected points ``T - l`` are stored alongside so that reversing
    twice gives back the identical array.
    """

    points: np.ndarray
    mirror: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise FormError("a subdivision needs at least two points")
        if pts[0] != 0.0:
            raise FormError(f"subdivision must start at 0, got {pts[0]}")
        if np.any(np.diff(pts) <= 0):
            raise FormError("subdivision points must be strictly increasing")
        mirror = pts[-1] - pts[::-1] if self.mirror is None else np.array(self.mirror, dtype=float)
        pts.setflags(write=False)
        mirror.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "mirror", mirror)

    @classmethod
    def uniform(cls, horizon: float, cells: int) -> "Subdivision":
        if cells < 1:
            raise FormError("need at least one cell")
        pts = horizon * np.arange(cells + 1) / cells
        pts[-1] = horizon
        return cls(pts)

    @classmethod
    def random(cls, horizon: float, cells: int, seed: int = 0) -> "Subdivision":
        """Nonuniform subdivision with cell widths drawn from U(0.5, 1.5), then rescaled."""
        if cells < 1:
            raise FormError("need at least one cell")
        widths = np.random.default_rng(seed).uniform(0.5, 1.5, cells)
        pts = np.concatenate([[0.0], np.cumsum(widths)])
        pts = horizon * pts / pts[-1]
        pts[-1] = horizon
        return cls(pts)

    @property
    def horizon(self) -> float:
        return float(self.points[-1])

    @property
    def cells(self) -> int:
        return self.points.size - 1

    @property
    def mesh(self) -> float:
        return float(np.max(np.diff(self.points)))

    def reverse(self) -> "Subdivision":
        """The reflected partition ``T - l_N < ... < T - l_0``."""
        return Subdivision(self.mirror, mirror=self.points)

    def insert(self, point: float) -> "Subdivision":
        pts = np.union1d(self.points, [point])
        return Subdivision(pts)

    def cell_of(self, t: float) -> int:
        """Index ``k`` with ``l_k <= t < l_{k+1}``; ``T`` belongs to the last cell."""
        k = int(np.searchsorted(self.points, t, side="right")) - 1
        return min(max(k, 0), self.cells - 1)


@dataclass(frozen=True, eq=False)
class PropagatorEval:
    matrix: np.ndarray
    t: float
    s: float
    subdivision: Subdivision
    exp_tolerance: float


def averaged_generator(form: NonautonomousForm, a: float, b: float, order: int = DEFAULT_QUADRATURE) -> np.ndarray:
    """Mean of ``A(r)`` over ``[a, b]`` by ``order``-point Gauss-Legendre."""
    if not b > a:
        raise FormError(f"empty cell [{a}, {b}]")
    if order < 1:
        raise FormError("quadrature order must be >= 1")
    x, w = np.polynomial.legendre.leggauss(order)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    acc = None
    for xi, wi in zip(x, w):
        term = wi * np.asarray(form.evaluate(mid + half * xi))
        acc = term if acc is None else acc + term
    return 0.5 * acc


def _check_tolerance(tol: float):
    if not tol >= np.finfo(float).eps:
        raise ValueError(f"exponential tolerance {tol} is below double precision")


def _expm_neg(G: np.ndarray, tau: float) -> np.ndarray:
    if tau == 0:
        return np.eye(G.shape[0], dtype=G.dtype)
    E = scipy.linalg.expm(-tau * G)
    if not np.all(np.isfinite(E)):
        raise FloatingPointError("matrix exponential produced non-finite entries")
    return E


def step(A_k: np.ndarray, tau: float, triple: GelfandTriple, exp_tolerance: float = DEFAULT_EXP_TOL) -> np.ndarray:
    """``exp(-tau mass^{-1} A_k)``: the semigroup of a frozen generator."""
    if tau < 0:
        raise FormError(f"step length must be nonnegative, got {tau}")
    _check_tolerance(exp_tolerance)
    A_k = np.asarray(A_k)
    if not np.all(np.isfinite(A_k)):
        raise FloatingPointError("generator has non-finite entries")
    if tau == 0:
        return np.eye(triple.dim, dtype=np.result_type(A_k, triple.mass))
    Gt = triple.phi.conj().T @ A_k @ triple.phi
    return _from_eigenbasis(triple, _expm_neg(Gt, tau))


def _from_eigenbasis(triple: GelfandTriple, Ut: np.ndarray) -> np.ndarray:
    return triple.phi @ Ut @ (triple.phi.conj().T @ triple.mass)


class Propagator:
    """Evaluates ``U_L(t, s)`` for one form and subdivision.

    Averaged generators and full-cell steps are cached per cell, so repeated
    queries on one subdivision cost only the partial-cell exponentials and
    the ordered product.
    """

    def __init__(
        self,
        form: NonautonomousForm,
        subdivision: Subdivision,
        exp_tolerance: float = DEFAULT_EXP_TOL,
        quadrature_order: int = DEFAULT_QUADRATURE,
    ):
        if abs(subdivision.horizon - form.horizon) > 1e-12 * form.horizon:
            raise FormError(f"subdivision spans [0, {subdivision.horizon}], form horizon is {form.horizon}")
        _check_tolerance(exp_tolerance)
        form.require_coercive()
        self.form = form
        self.subdivision = subdivision
        self.exp_tolerance = exp_tolerance
        self.quadrature_order = quadrature_order
        self._generators: dict[int, np.ndarray] = {}
        self._full_steps: dict[int, np.ndarray] = {}

    def generator(self, k: int) -> np.ndarray:
        """Averaged generator of cell ``k`` in the eigenbasis (``phi^H A_k phi``)."""
        G = self._generators.get(k)
        if G is None:
            pts = self.subdivision.points
            A_k = averaged_generator(self.form, pts[k], pts[k + 1], self.quadrature_order)
            if not np.all(np.isfinite(A_k)):
                raise FloatingPointError(f"averaged generator of cell {k} is not finite")
            phi = self.form.triple.phi
            G = phi.conj().T @ A_k @ phi
            self._generators[k] = G
        return G

    def _cell_step(self, k: int, tau: float) -> np.ndarray:
        pts = self.subdivision.points
        if tau == pts[k + 1] - pts[k]:
            E = self._full_steps.get(k)
            if E is None:
                E = _expm_neg(self.generator(k), tau)
                self._full_steps[k] = E
            return E
        return _expm_neg(self.generator(k), tau)

    def eigen_matrix(self, t: float, s: float) -> np.ndarray:
        """``U_L(t, s)`` in eigenbasis coordinates."""
        T = self.form.horizon
        slack = 1e-12 * T
        if t < s:
            raise FormError(f"propagator needs s <= t, got t={t}, s={s}")
        if s < -slack or t > T + slack:
            raise FormError(f"times ({t}, {s}) outside [0, {T}]")
        n = self.form.dim
        if t == s:
            return np.eye(n)
        sub = self.subdivision
        pts = sub.points
        m, l = sub.cell_of(s), sub.cell_of(t)
        if m == l:
            return self._cell_step(m, t - s)
        U = self._cell_step(m, pts[m + 1] - s)
        for k in range(m + 1, l):
            U = self._cell_step(k, pts[k + 1] - pts[k]) @ U
        if t > pts[l]:
            U = self._cell_step(l, t - pts[l]) @ U
        return U

    def matrix(self, t: float, s: float) -> np.ndarray:
        if t == s:
            self.eigen_matrix(t, s)  # range checks
            return np.eye(self.form.dim)
        return _from_eigenbasis(self.form.triple, self.eigen_matrix(t, s))

    def __call__(self, t: float, s: float) -> PropagatorEval:
        return PropagatorEval(self.matrix(t, s), float(t), float(s), self.subdivision, self.exp_tolerance)


def propagate(
    form: NonautonomousForm,
    subdivision: Subdivision,
    t: float,
    s: float,
    exp_tolerance: float = DEFAULT_EXP_TOL,
    quadrature_order: int = DEFAULT_QUADRATURE,
) -> PropagatorEval:
    return Propagator(form, subdivision, exp_tolerance, quadrature_order)(t, s)


@dataclass
class ReferenceResult:
    evaluation: PropagatorEval
    difference: float
    level: int
    metric: str = "L(H) operator norm at fixed (t, s)"

    @property
    def matrix(self) -> np.ndarray:
        return self.evaluation.matrix


def reference_propagator(
    form: NonautonomousForm,
    t: float,
    s: float,
    tol: float = 1e-10,
    exp_tolerance: float = DEFAULT_EXP_TOL,
    max_level: int = MAX_REFERENCE_LEVEL,
    quadrature_order: int = DEFAULT_QUADRATURE,
) -> ReferenceResult:
    """Stand-in for the limit propagator: dyadic refinement until self-converged.

    Uniform subdivisions with ``2^k`` cells are evaluated for increasing
    ``k`` until successive results differ by less than ``tol`` in ``L(H)``,
    twice in a row (symmetric time profiles can make a single pair of
    levels coincide).
    """
    if not tol > 0:
        raise ValueError("reference tolerance must be positive")
    prev = None
    diff = previous_diff = math.inf
    for level in range(max_level + 1):
        prop = Propagator(form, Subdivision.uniform(form.horizon, 2**level), exp_tolerance, quadrature_order)
        Ut = prop.eigen_matrix(t, s)
        if prev is not None:
            previous_diff, diff = diff, float(np.linalg.norm(Ut - prev, 2))
            if diff < tol and previous_diff < tol:
                ev = PropagatorEval(_from_eigenbasis(form.triple, Ut), t, s, prop.subdivision, exp_tolerance)
                return ReferenceResult(ev, diff, level)
        elif t == s:
            return ReferenceResult(prop(t, s), 0.0, 0)
        prev = Ut
    ev = PropagatorEval(_from_eigenbasis(form.triple, prev), t, s, prop.subdivision, exp_tolerance)
    raise ConvergenceError(
        f"reference did not reach tol={tol:.1e} within {2**max_level} cells (last difference {diff:.3e})",
        last=ev,
        difference=diff,
    )


@dataclass
class ConvergenceTable:
    cells: list
    mesh: list
    errors: list
    reference: ReferenceResult
    metric: str = "L(H) operator norm at fixed (t, s)"

    @property
    def order(self) -> float:
        return fitted_order(self.mesh, self.errors)

    def orders_so_far(self) -> list:
        return [fitted_order(self.mesh[: i + 1], self.errors[: i + 1]) for i in range(len(self.cells))]


def fitted_order(mesh, errors) -> float:
    """Least-squares slope of ``log(error)`` against ``log(mesh)``."""
    pairs = [(h, e) for h, e in zip(mesh, errors) if e > 0]
    if len(pairs) < 2:
        return math.nan
    x = np.log([p[0] for p in pairs])
    y = np.log([p[1] for p in pairs])
    if np.ptp(x) == 0:
        return math.nan
    return float(np.polyfit(x, y, 1)[0])


def convergence_study(
    form: NonautonomousForm,
    t: float,
    s: float,
    levels,
    ref_tol: float = 1e-10,
    exp_tolerance: float = DEFAULT_EXP_TOL,
    reference: ReferenceResult | None = None,
    max_level: int = 20,
) -> ConvergenceTable:
    """Errors of uniform-subdivision propagators against the dyadic reference."""
    levels = [int(c) for c in levels]
    if not levels or any(c < 1 for c in levels) or any(b <= a for a, b in zip(levels, levels[1:])):
        raise FormError(f"levels must be a nonempty increasing list of positive cell counts, got {levels}")
    if not s < t:
        raise FormError(f"convergence study needs s < t, got t={t}, s={s}")
    if reference is None:
        reference = reference_propagator(form, t, s, ref_tol, exp_tolerance, max_level)
    Ur = form.triple.to_eigenbasis(reference.matrix)
    mesh, errors = [], []
    for c in levels:
        sub = Subdivision.uniform(form.horizon, c)
        Ut = Propagator(form, sub, exp_tolerance).eigen_matrix(t, s)
        mesh.append(sub.mesh)
        errors.append(float(np.linalg.norm(Ut - Ur, 2)))
    return ConvergenceTable(levels, mesh, errors, reference)
