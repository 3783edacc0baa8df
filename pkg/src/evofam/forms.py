"""Non-autonomous sesquilinear forms and checks of their standing assumptions.

A form is stored through its matrix evaluator ``t -> A(t)`` with
``A(t)[i, j] = a(t; basis_j, basis_i)``, so ``a(t; u, v) = v^H A(t) u``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.integrate
import scipy.linalg

from .gelfand import GelfandTriple

Evaluator = Callable[[float], np.ndarray]


class FormError(ValueError):
    """Invalid form data or out-of-range arguments."""


class NotCoerciveError(FormError):
    """The form is not coercive on its certification grid."""


@dataclass(frozen=True)
class Modulus:
    """Continuity modulus ``omega`` of a form.

    ``kind="power"`` is ``scale * t**exponent``; ``kind="table"`` interpolates
    ``values`` linearly over ``times`` (which must start at 0).
    """

    kind: str = "power"
    scale: float = 0.0
    exponent: float = 1.0
    times: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind == "power":
            if self.scale < 0 or self.exponent <= 0:
                raise FormError("power modulus needs scale >= 0 and exponent > 0")
        elif self.kind == "table":
            if len(self.times) < 2 or len(self.times) != len(self.values):
                raise FormError("table modulus needs matching times/values of length >= 2")
            if self.times[0] != 0 or np.any(np.diff(self.times) <= 0):
                raise FormError("table modulus times must start at 0 and increase")
            if min(self.values) < 0:
                raise FormError("modulus values must be nonnegative")
        else:
            raise FormError(f"unknown modulus kind {self.kind!r}")

    @classmethod
    def power(cls, scale: float, exponent: float) -> "Modulus":
        return cls("power", float(scale), float(exponent))

    @classmethod
    def table(cls, times, values) -> "Modulus":
        return cls("table", times=tuple(map(float, times)), values=tuple(map(float, values)))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "power":
            return self.scale * t**self.exponent
        return np.interp(t, self.times, self.values)

    def to_dict(self) -> dict:
        if self.kind == "power":
            return {"kind": "power", "scale": self.scale, "exponent": self.exponent}
        return {"kind": "table", "times": list(self.times), "values": list(self.values)}


@dataclass(frozen=True, eq=False)
class NonautonomousForm:
    triple: GelfandTriple
    horizon: float
    evaluate: Evaluator
    bound: float
    coercivity: float
    modulus: Modulus = field(default_factory=Modulus)
    gamma: float = 0.5
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.horizon > 0:
            raise FormError(f"horizon must be positive, got {self.horizon}")
        if not 0 < self.gamma < 1:
            raise FormError(f"gamma must lie in (0, 1), got {self.gamma}")

    @property
    def dim(self) -> int:
        return self.triple.dim

    def __call__(self, t: float) -> np.ndarray:
        return self.evaluate(t)

    def at(self, t: float) -> np.ndarray:
        """Evaluator output at ``t`` after range checking."""
        _check_time(self, t)
        A = np.asarray(self.evaluate(float(t)))
        if A.shape != (self.dim, self.dim):
            raise FormError(f"evaluator returned shape {A.shape}, expected {(self.dim, self.dim)}")
        return A

    def sesquilinear(self, t: float, u: np.ndarray, v: np.ndarray) -> complex:
        """``a(t; u, v)``, linear in ``u`` and antilinear in ``v``."""
        return np.vdot(v, self.at(t) @ u)

    def certification_grid(self, points: int = 65) -> np.ndarray:
        return np.linspace(0.0, self.horizon, points)

    def require_coercive(self):
        if not self.coercivity > 0:
            raise NotCoerciveError(
                f"form is not coercive (certified constant {self.coercivity:.3e}); apply shift() first"
            )


def _check_time(form: NonautonomousForm, t: float):
    slack = 1e-12 * form.horizon
    if not -slack <= t <= form.horizon + slack:
        raise FormError(f"time {t} outside [0, {form.horizon}]")


def _hermitian_part(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.conj().T)


def coercivity_constant(form: NonautonomousForm, t: float) -> float:
    """Largest ``alpha`` with ``Re a(t; u, u) >= alpha |u|_V^2``."""
    A = form.at(t)
    return float(scipy.linalg.eigh(_hermitian_part(A), form.triple.vgram, eigvals_only=True)[0])


def boundedness_constant(form: NonautonomousForm, t: float) -> float:
    """Smallest ``M`` with ``|a(t; u, v)| <= M |u|_V |v|_V``."""
    return form.triple.form_norm(form.at(t), 1.0, 1.0)


@dataclass
class UniformityReport:
    alpha_min: float
    bound_max: float
    declared_coercivity: float
    declared_bound: float
    samples: int

    @property
    def passed(self) -> bool:
        return self.alpha_min >= self.declared_coercivity and self.bound_max <= self.declared_bound

    def to_dict(self) -> dict:
        return {
            "alpha_min": self.alpha_min,
            "bound_max": self.bound_max,
            "declared_coercivity": self.declared_coercivity,
            "declared_bound": self.declared_bound,
            "samples": self.samples,
            "passed": self.passed,
            "note": "certified on a finite time grid only",
        }


def verify_uniformity(form: NonautonomousForm, times=None) -> UniformityReport:
    """Check the declared ``M`` and ``alpha`` against grid extremes."""
    times = form.certification_grid() if times is None else np.asarray(times, dtype=float)
    if times.size == 0:
        raise FormError("empty time grid")
    # fixed order reductions
    alphas = [coercivity_constant(form, t) for t in times]
    bounds = [boundedness_constant(form, t) for t in times]
    return UniformityReport(min(alphas), max(bounds), form.coercivity, form.bound, len(times))


def dini_deviation(form: NonautonomousForm, t: float, s: float, gamma_u: float, gamma_v: float) -> float:
    """Smallest ``C`` with ``|a(t;u,v) - a(s;u,v)| <= C |u|_{V_gu} |v|_{V_gv}``.

    ``(gamma, gamma)`` gives the symmetric Dini-type condition, ``(1, gamma)``
    the weaker mixed one.
    """
    for g in (gamma_u, gamma_v):
        if not 0.0 <= g <= 1.0:
            raise FormError(f"interpolation exponents must lie in [0, 1], got {g}")
    D = form.at(t) - form.at(s)
    return form.triple.form_norm(D, gamma_u, gamma_v)


@dataclass
class DiniReport:
    sup_ratio: float
    integral: float
    samples_used: int
    analytic: bool

    @property
    def sup_finite(self) -> bool:
        return math.isfinite(self.sup_ratio)

    @property
    def integral_finite(self) -> bool:
        return math.isfinite(self.integral)

    @property
    def passed(self) -> bool:
        return self.sup_finite and self.integral_finite

    def to_dict(self) -> dict:
        return {
            "sup_ratio": _json_float(self.sup_ratio),
            "integral": _json_float(self.integral),
            "samples_used": self.samples_used,
            "analytic": self.analytic,
            "passed": self.passed,
        }


def _json_float(x: float):
    return x if math.isfinite(x) else "inf"


_DINI_LEVELS = 61


def check_dini(modulus, gamma: float, horizon: float) -> DiniReport:
    """Evaluate ``sup omega(t)/t^(gamma/2)`` and ``int_0^T omega(t)/t^(1+gamma/2) dt``.

    Power moduli are handled in closed form.  Any other callable is sampled
    on ``t = T 2^-k`` (k = 0..60); the sup is declared infinite when the
    ratios are still strictly growing over the last ten levels.  The
    integral uses the substitution ``t = tau^(2/gamma)`` on dyadic pieces; the
    remainder below ``T 2^-60`` is summed as a geometric tail, and the
    integral is declared divergent when the pieces stop shrinking.
    """
    if not 0 < gamma < 1:
        raise FormError(f"gamma must lie in (0, 1), got {gamma}")
    if not horizon > 0:
        raise FormError(f"horizon must be positive, got {horizon}")
    half = gamma / 2
    if isinstance(modulus, Modulus) and modulus.kind == "power":
        c, p = modulus.scale, modulus.exponent
        if c == 0:
            return DiniReport(0.0, 0.0, 0, True)
        sup = c * horizon ** (p - half) if p >= half else math.inf
        integral = c * horizon ** (p - half) / (p - half) if p > half else math.inf
        return DiniReport(sup, integral, 0, True)

    omega = modulus
    ts = horizon * 2.0 ** -np.arange(_DINI_LEVELS)
    ratios = np.array([float(omega(t)) for t in ts]) / ts**half
    tail = ratios[-11:]
    growing = tail[-1] > 0 and np.all(np.diff(tail) > 0)
    sup = math.inf if growing else float(ratios.max())

    def integrand(tau):
        # t = tau^(2/gamma): dt = (2/gamma) tau^(2/gamma - 1) dtau
        t = tau ** (1.0 / half)
        return float(omega(t)) * (1.0 / half) * tau ** (1.0 / half - 1.0) / t ** (1.0 + half)

    pieces = []
    for k in range(_DINI_LEVELS - 1):
        lo, hi = (ts[k + 1]) ** half, (ts[k]) ** half
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.integrate.IntegrationWarning)
            val, _ = scipy.integrate.quad(integrand, lo, hi, limit=200)
        pieces.append(val)
    total = math.fsum(pieces)
    tail = pieces[-6:]
    if tail[-1] > 0:
        ratios = [b / a if a > 0 else math.inf for a, b in zip(tail, tail[1:])]
        r = max(ratios)
        total = math.inf if r >= 1 - 1e-3 else total + tail[-1] * r / (1 - r)
    return DiniReport(sup, total, len(ts), False)


def adjoint_form(form: NonautonomousForm) -> NonautonomousForm:
    """``a*(t; u, v) = conj(a(t; v, u))``, with the same constants."""
    evaluate = form.evaluate

    def adjoint(t):
        return np.asarray(evaluate(t)).conj().T

    return replace(form, evaluate=adjoint, meta={**form.meta, "derived": "adjoint"})


def returned_adjoint_form(form: NonautonomousForm) -> NonautonomousForm:
    """``a*_r(t; u, v) = conj(a(T - t; v, u))``."""
    evaluate = form.evaluate
    T = form.horizon

    def returned(t):
        return np.asarray(evaluate(T - t)).conj().T

    return replace(form, evaluate=returned, meta={**form.meta, "derived": "returned_adjoint"})


def shift(form: NonautonomousForm, omega_s: float) -> NonautonomousForm:
    """``a(t; .,.) + omega_s (.|.)_H``, with the coercivity re-certified on the grid."""
    if omega_s == 0:
        return form
    evaluate = form.evaluate
    mass = form.triple.mass

    def shifted(t):
        return np.asarray(evaluate(t)) + omega_s * mass

    out = replace(form, evaluate=shifted, meta={**form.meta, "shift": form.meta.get("shift", 0.0) + omega_s})
    alpha = min(coercivity_constant(out, t) for t in out.certification_grid())
    bound = form.bound + abs(omega_s) * form.triple.embedding_constant**2
    return replace(out, coercivity=alpha, bound=bound)


def h_generator(form: NonautonomousForm, t: float) -> np.ndarray:
    """Matrix of the part of the operator in H: ``mass^{-1} A(t)``."""
    return form.triple.solve_mass(form.at(t))


def kato_constants(form: NonautonomousForm, t: float) -> tuple[float, float]:
    """Extremes of ``|A_H(t)^{1/2} u|_H / |u|_V`` over ``u != 0``.

    ``A_H(t)`` is the part in H of the operator; the principal square root is
    taken in the mass-orthonormal eigenbasis.  A positive lower constant
    certifies the square root property in the discrete setting.
    """
    tri = form.triple
    A = form.at(t)
    Gt = tri.phi.conj().T @ A @ tri.phi
    spectrum = np.linalg.eigvals(Gt)
    if np.min(spectrum.real) <= 0:
        raise FormError(f"spectrum of the H-part at t={t} touches the closed left half-plane")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        St = scipy.linalg.sqrtm(Gt)
    St = St / np.sqrt(tri.eigenvalues)[None, :]
    sv = np.linalg.svd(St, compute_uv=False)
    return float(sv[-1]), float(sv[0])
