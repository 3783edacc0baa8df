"""Desk-scale Galerkin problems and a seeded random problem generator."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .forms import FormError, Modulus, NonautonomousForm
from .gelfand import GelfandTriple


def p1_matrices(nodes: np.ndarray, weight=None) -> tuple[np.ndarray, np.ndarray]:
    """P1 stiffness and (optionally weighted) mass matrices on a 1D mesh."""
    n = nodes.size
    K = np.zeros((n, n))
    M = np.zeros((n, n))
    # 3-point Gauss is exact for the quartic weight * phi_i * phi_j when weight is quadratic
    xq, wq = np.polynomial.legendre.leggauss(3)
    for e in range(n - 1):
        a, b = nodes[e], nodes[e + 1]
        h = b - a
        K[e : e + 2, e : e + 2] += np.array([[1.0, -1.0], [-1.0, 1.0]]) / h
        if weight is None:
            M[e : e + 2, e : e + 2] += h / 6 * np.array([[2.0, 1.0], [1.0, 2.0]])
        else:
            x = 0.5 * (a + b) + 0.5 * h * xq
            shape = np.vstack([(b - x) / h, (x - a) / h])
            wx = weight(x) * wq * 0.5 * h
            M[e : e + 2, e : e + 2] += (shape * wx) @ shape.T
    return K, M


def _default_robin_gamma(holder: float) -> float:
    top = min(1.0, 2.0 * holder)
    return 0.9 if 0.9 < top else 0.5 * (0.5 + top)


@dataclass(frozen=True)
class RobinProblem:
    """``-u'' `` on (0, 1) with ``u' = beta(t) u``-type Robin conditions at both ends.

    ``beta(t) = beta_base + beta_amp * t**holder``.
    """

    n_elems: int = 64
    beta_base: float = 1.0
    beta_amp: float = 1.0
    holder: float = 0.75
    horizon: float = 1.0
    gamma: float | None = None

    def beta(self, t):
        return self.beta_base + self.beta_amp * np.asarray(t, dtype=float) ** self.holder


def _robin_shift(K, M, E, betas, target=0.5) -> float:
    """Smallest integer ``w`` with ``K + b E + w M >= target (K + M)`` at the given ``b``.

    The trace inequality makes such a ``w`` exist independently of the mesh.
    """

    def alpha(w):
        return min(scipy.linalg.eigh(K + b * E + w * M, K + M, eigvals_only=True)[0] for b in betas)

    lo, hi = 0.0, 1.0
    while alpha(hi) < target:
        lo, hi = hi, 2 * hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if alpha(mid) < target else (lo, mid)
    return float(math.ceil(hi))


def build_robin(problem: RobinProblem) -> tuple[GelfandTriple, NonautonomousForm]:
    """P1 Galerkin form ``int u' v' + beta(t) (u(0)v(0) + u(1)v(1))``.

    V carries the full H^1 inner product and H the L^2 one.  The modulus is
    ``c t^holder`` with ``c`` the ``V_gamma``-form norm of the boundary term
    times ``|beta_amp|``.  When ``beta`` dips low enough to break coercivity
    the form is returned with its (non-positive) certified constant and
    ``meta["suggested_shift"]`` tells how much ``(.|.)_H`` to add for a
    coercivity constant of at least 1/2.
    """
    p = problem
    if p.n_elems < 2:
        raise FormError("Robin problem needs at least 2 elements")
    if not p.holder > 0.25 or p.holder > 1:
        raise FormError(f"Hoelder exponent must lie in (1/4, 1], got {p.holder}")
    if not p.horizon > 0 or not all(map(math.isfinite, (p.beta_base, p.beta_amp))):
        raise FormError("beta must be bounded on [0, T]")
    gamma = _default_robin_gamma(p.holder) if p.gamma is None else p.gamma
    if not 0.5 < gamma < min(1.0, 2.0 * p.holder):
        raise FormError(f"gamma = r0 + 1/2 must lie in (1/2, min(1, 2*holder)), got {gamma}")

    nodes = np.linspace(0.0, 1.0, p.n_elems + 1)
    K, M = p1_matrices(nodes)
    E = np.zeros_like(K)
    E[0, 0] = E[-1, -1] = 1.0
    triple = GelfandTriple(M, K + M)
    for a in (K, M, E):
        a.setflags(write=False)

    def evaluate(t, _K=K, _E=E, _p=p):
        return _K + _p.beta(t) * _E

    # beta is monotone in t, so its extremes sit at the ends of [0, T]
    b_lo, b_hi = sorted((float(p.beta(0.0)), float(p.beta(p.horizon))))
    lam_min = [scipy.linalg.eigh(K + b * E, K + M, eigvals_only=True)[0] for b in (b_lo, b_hi)]
    alpha = min(lam_min)
    bound = max(triple.form_norm(K + b * E) for b in (b_lo, b_hi))
    c = abs(p.beta_amp) * triple.form_norm(E, gamma, gamma)
    meta = {"problem": "robin", "boundary_term": E, "stiffness": K}
    meta["suggested_shift"] = _robin_shift(K, M, E, (b_lo, b_hi)) if alpha <= 0 else 0.0
    form = NonautonomousForm(triple, p.horizon, evaluate, bound, alpha, Modulus.power(c, p.holder), gamma, meta)
    return triple, form


@dataclass(frozen=True)
class SchrodingerProblem:
    """``-u'' + mu(t) (1 + x^2) u`` on (-L, L) with Dirichlet truncation.

    ``mu(t) = mu_base + mu_amp * sin(mu_freq * t)``.
    """

    n_elems: int = 64
    half_width: float = 1.0
    mu_base: float = 1.0
    mu_amp: float = 0.5
    mu_freq: float = 1.0
    horizon: float = 1.0
    sobolev_index: float = 0.5

    def mu(self, t):
        return self.mu_base + self.mu_amp * np.sin(self.mu_freq * np.asarray(t, dtype=float))

    @property
    def alpha_1(self) -> float:
        return self.mu_base - abs(self.mu_amp)

    @property
    def alpha_2(self) -> float:
        return self.mu_base + abs(self.mu_amp)

    @property
    def kappa(self) -> float:
        return abs(self.mu_amp * self.mu_freq)


def m0(x):
    return 1.0 + np.asarray(x) ** 2


def build_schrodinger(problem: SchrodingerProblem) -> tuple[GelfandTriple, NonautonomousForm]:
    """P1 Galerkin form ``int u' v' + mu(t) int m0 u v`` with ``m0 = 1 + x^2``.

    V is normed by ``int |u'|^2 + int m0 |u|^2``.  The Lipschitz modulus is
    ``kappa * |W|_{gamma} * t`` with ``W`` the weighted mass matrix.
    """
    p = problem
    if p.n_elems < 2:
        raise FormError("Schroedinger problem needs at least 2 elements")
    if not p.half_width > 0:
        raise FormError("half width L must be positive")
    if not p.alpha_1 > 0:
        raise FormError(f"mu must stay positive (alpha_1 = {p.alpha_1}); shift the form instead")
    if not 0 < p.sobolev_index < 1:
        raise FormError(f"sobolev index s must lie in (0, 1), got {p.sobolev_index}")
    grid = np.linspace(0.0, p.horizon, 257)
    mus = p.mu(grid)
    if mus.min() < p.alpha_1 - 1e-12 or mus.max() > p.alpha_2 + 1e-12:
        raise FormError("mu violates its bounds on the certification grid")

    nodes = np.linspace(-p.half_width, p.half_width, p.n_elems + 1)
    K, M = p1_matrices(nodes)
    _, W = p1_matrices(nodes, m0)
    inner = slice(1, -1)
    K, M, W = (np.ascontiguousarray(a[inner, inner]) for a in (K, M, W))
    triple = GelfandTriple(M, K + W)
    for a in (K, M, W):
        a.setflags(write=False)

    def evaluate(t, _K=K, _W=W, _p=p):
        return _K + _p.mu(t) * _W

    gamma = p.sobolev_index
    alpha = min(1.0, p.alpha_1)
    bound = max(1.0, p.alpha_2)
    c = p.kappa * triple.form_norm(W, gamma, gamma)
    # int m1 |u|^2 <= c |u|_{H^s}^2 with m1 = kappa m0: report c on the mesh
    _, Hs_gram = K, M + K
    lam_hs = scipy.linalg.eigh(p.kappa * W, Hs_gram, eigvals_only=True)[-1] if p.kappa else 0.0
    meta = {
        "problem": "schrodinger",
        "weighted_mass": W,
        "stiffness": K,
        "m1_bound_H1": float(lam_hs),
        "suggested_shift": 0.0,
    }
    form = NonautonomousForm(triple, p.horizon, evaluate, bound, alpha, Modulus.power(c, 1.0), gamma, meta)
    return triple, form


def _random_basis(rng, n):
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, _ = np.linalg.qr(Z)
    return Q


def random_problem(
    n: int,
    seed: int,
    smoothness: str = "lipschitz",
    holder: float = 0.75,
    horizon: float = 1.0,
    stiffness: float = 100.0,
) -> tuple[GelfandTriple, NonautonomousForm]:
    """Seeded complex problem ``A(t) = A0 + phi(t) B`` with ``A0`` nonnormal.

    ``A0 = vGram + S0`` with ``S0`` skew-Hermitian, and ``B`` is scaled so
    that ``|b(u, v)| <= 0.25 |u|_V |v|_V``; hence ``alpha = 0.75`` holds for
    all ``|phi| <= 1``.  The V-Gram has generalized eigenvalues spread over
    ``[2, stiffness]`` so that shifting by ``-(.|.)_H`` keeps coercivity.  ``phi(t) = sin(2 pi t / T)`` (``"lipschitz"``) or
    ``2 (t/T)^holder - 1`` (``"holder"``).
    """
    if n < 2:
        raise FormError("random problems need n >= 2")
    if smoothness not in ("lipschitz", "holder"):
        raise FormError(f"unknown smoothness class {smoothness!r}")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    mass = X @ X.conj().T / n + 0.5 * np.eye(n)
    # V-Gram with eigenvalues spread over [2, stiffness] relative to mass
    L = np.linalg.cholesky(mass)
    Q = _random_basis(rng, n)
    lam = np.geomspace(2.0, stiffness, n)
    R = L @ Q  # R R^H = mass
    vgram = R @ np.diag(lam) @ R.conj().T
    vgram = 0.5 * (vgram + vgram.conj().T)
    triple = GelfandTriple(mass, vgram)

    Y = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    S0 = Y - Y.conj().T
    Kh = scipy.linalg.sqrtm(triple.vgram)
    Kh = 0.5 * (Kh + Kh.conj().T)
    S0 = Kh @ (S0 / np.linalg.norm(S0, 2)) @ Kh
    A0 = triple.vgram + S0
    B = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    B = 0.25 * B / triple.form_norm(B)
    for a in (A0, B):
        a.setflags(write=False)

    if smoothness == "lipschitz":
        def profile(t, _T=horizon):
            return math.sin(2 * math.pi * t / _T)

        modulus = Modulus.power(2 * math.pi / horizon, 1.0)
        gamma = 0.5
    else:
        def profile(t, _T=horizon, _a=holder):
            return 2.0 * (max(t, 0.0) / _T) ** _a - 1.0

        modulus = Modulus.power(2.0 / horizon**holder, holder)
        gamma = min(0.9, holder)

    def evaluate(t, _A0=A0, _B=B, _f=profile):
        return _A0 + _f(t) * _B

    modulus = Modulus.power(modulus.scale * triple.form_norm(B, gamma, gamma), modulus.exponent)
    bound = triple.form_norm(A0) + 0.25
    meta = {"problem": "random", "seed": seed, "smoothness": smoothness, "A0": A0, "B": B}
    form = NonautonomousForm(triple, horizon, evaluate, bound, 0.75, modulus, gamma, meta)
    return triple, form


def stock_problem() -> tuple[GelfandTriple, NonautonomousForm]:
    """Fixed nonsymmetric, nonautonomous 6x6 test problem."""
    return random_problem(6, seed=2024, smoothness="lipschitz", stiffness=30.0)


def stock_problems(n_elems: int = 32) -> dict:
    """The stock problems used by the verification suites."""
    return {
        "robin": build_robin(RobinProblem(n_elems=n_elems)),
        "schrodinger": build_schrodinger(SchrodingerProblem(n_elems=n_elems)),
        "stock": stock_problem(),
    }
