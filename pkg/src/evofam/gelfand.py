"""Linear algebra over a finite-dimensional Gelfand triple V -> H -> V'.

Vectors in H and V are coefficient vectors with respect to a fixed basis.
Functionals in V' are stored through their pairings with the basis,
``f_i = <F, basis_i>``, so that H embeds into V' as ``u -> massGram @ u``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

SPACES = ("H", "V", "Vprime", "Vgamma")

_HERMITIAN_RTOL = 1e-13


class GelfandError(ValueError):
    """Raised for malformed Gram matrices or mismatched dimensions."""


def _symmetrize(G: np.ndarray, name: str) -> np.ndarray:
    G = np.asarray(G)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise GelfandError(f"{name} must be square, got shape {G.shape}")
    if not np.all(np.isfinite(G)):
        raise GelfandError(f"{name} has non-finite entries")
    scale = np.linalg.norm(G)
    defect = np.linalg.norm(G - G.conj().T)
    if scale == 0 or defect > _HERMITIAN_RTOL * scale:
        raise GelfandError(f"{name} is not Hermitian (relative defect {defect / max(scale, 1e-300):.2e})")
    G = 0.5 * (G + G.conj().T)
    if not np.iscomplexobj(G):
        G = G.astype(float)
    return G


@dataclass(frozen=True, eq=False)
class GelfandTriple:
    """Finite-dimensional stand-in for ``V -> H -> V'``.

    ``mass`` is the Gram matrix of ``(.|.)_H`` and ``vgram`` that of
    ``(.|.)_V``.  The generalized eigenpairs ``vgram phi = lam mass phi`` are
    cached: ``phi`` is mass-orthonormal and diagonalizes ``vgram``.
    """

    mass: np.ndarray
    vgram: np.ndarray
    eigenvalues: np.ndarray = field(init=False, repr=False)
    phi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mass = _symmetrize(self.mass, "massGram")
        vgram = _symmetrize(self.vgram, "vGram")
        if mass.shape != vgram.shape:
            raise GelfandError(f"Gram shapes differ: {mass.shape} vs {vgram.shape}")
        try:
            lam, phi = scipy.linalg.eigh(vgram, mass)
        except np.linalg.LinAlgError as exc:
            raise GelfandError("massGram is not positive definite") from exc
        if lam[0] <= 0:
            raise GelfandError(f"vGram is not positive definite (smallest eigenvalue {lam[0]:.3e})")
        for name, value in (("mass", mass), ("vgram", vgram), ("eigenvalues", lam), ("phi", phi)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def dim(self) -> int:
        return self.mass.shape[0]

    @property
    def embedding_constant(self) -> float:
        """Smallest ``c`` with ``|u|_H <= c |u|_V``."""
        return float(np.sqrt(1.0 / self.eigenvalues[0]))

    def coordinates(self, u: np.ndarray) -> np.ndarray:
        """Coefficients of ``u`` in the mass-orthonormal eigenbasis."""
        return self.phi.conj().T @ (self.mass @ u)

    def to_eigenbasis(self, B: np.ndarray) -> np.ndarray:
        """``phi^{-1} B phi``: the matrix of ``B`` in the eigenbasis."""
        return self.phi.conj().T @ (self.mass @ (B @ self.phi))

    def embed(self, u: np.ndarray) -> np.ndarray:
        """Image of ``u`` in H under the embedding into V'."""
        return self.mass @ u

    def solve_mass(self, B: np.ndarray) -> np.ndarray:
        """``massGram^{-1} B`` via the eigenbasis (``mass^{-1} = phi phi^H``)."""
        return self.phi @ (self.phi.conj().T @ B)

    def _check(self, B, ndim):
        B = np.asarray(B)
        n = self.dim
        if ndim == 1 and B.shape != (n,):
            raise GelfandError(f"expected a vector of length {n}, got shape {B.shape}")
        if ndim == 2 and B.shape != (n, n):
            raise GelfandError(f"expected a {n}x{n} matrix, got shape {B.shape}")
        return B

    def inner(self, u: np.ndarray, v: np.ndarray) -> complex:
        """``(u|v)_H``, linear in the first argument."""
        u = self._check(u, 1)
        v = self._check(v, 1)
        return np.vdot(v, self.mass @ u)

    def norm(self, u: np.ndarray, space: str = "H", gamma: float | None = None) -> float:
        """Norm of ``u`` in ``H``, ``V``, ``Vgamma`` (with ``gamma``) or ``Vprime``.

        For ``Vprime``, ``u`` holds functional pairings ``f_i = <F, basis_i>``
        and the result is ``sqrt(f^H vgram^{-1} f)``.
        """
        u = self._check(u, 1)
        lam = self.eigenvalues
        if space == "Vprime":
            # vgram^{-1} = phi diag(1/lam) phi^H
            d = self.phi.conj().T @ u
            return float(np.sqrt(np.sum(np.abs(d) ** 2 / lam)))
        c = self.coordinates(u)
        if space == "H":
            w = 1.0
        elif space == "V":
            w = lam
        elif space == "Vgamma":
            if gamma is None or not 0.0 <= gamma <= 1.0:
                raise GelfandError(f"Vgamma needs 0 <= gamma <= 1, got {gamma}")
            w = lam**gamma
        else:
            raise GelfandError(f"unknown space {space!r}; expected one of {SPACES}")
        return float(np.sqrt(np.sum(w * np.abs(c) ** 2)))

    def h_adjoint(self, B: np.ndarray) -> np.ndarray:
        """Adjoint with respect to ``(.|.)_H``: ``mass^{-1} B^H mass``."""
        B = self._check(B, 2)
        return self.solve_mass(B.conj().T @ self.mass)

    def op_norm(self, B: np.ndarray, space: str = "H") -> float:
        """Operator norm of ``B`` in ``L(H)``, ``L(V)`` or ``L(V')``.

        The ``L(V')`` norm is that of the H-adjoint in ``L(V)``; this is the
        norm of the unique extension of ``B`` from H to V'.
        """
        B = self._check(B, 2)
        if space == "Vprime":
            return self.op_norm(self.h_adjoint(B), "V")
        Bt = self.to_eigenbasis(B)
        if space == "V":
            r = np.sqrt(self.eigenvalues)
            Bt = r[:, None] * Bt / r[None, :]
        elif space != "H":
            raise GelfandError(f"unknown operator space {space!r}")
        return float(np.linalg.norm(Bt, 2))

    def form_norm(self, A: np.ndarray, gamma_u: float = 1.0, gamma_v: float = 1.0) -> float:
        """Smallest ``C`` with ``|v^H A u| <= C |u|_{V_gamma_u} |v|_{V_gamma_v}``."""
        A = self._check(A, 2)
        for g in (gamma_u, gamma_v):
            if not 0.0 <= g <= 1.0:
                raise GelfandError(f"interpolation exponent must lie in [0, 1], got {g}")
        lam = self.eigenvalues
        At = self.phi.conj().T @ A @ self.phi
        At = lam[:, None] ** (-gamma_v / 2) * At * lam[None, :] ** (-gamma_u / 2)
        return float(np.linalg.norm(At, 2))
