"""Heat semigroup ``P_t = exp(tL)`` through the mu-symmetrized eigendecomposition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GeneratorMatrix, GridError

__all__ = ["InconsistentGeneratorError", "SpectralDecomposition", "spectral", "evolve", "evolve_path"]


class InconsistentGeneratorError(GridError):
    """The generator is not reversible with respect to the grid weights."""


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """``D^{1/2} L D^{-1/2} = Q diag(eigenvalues) Q^T`` with ``D = diag(w)``.

    Eigenvalues are sorted in decreasing order, so ``eigenvalues[0]`` is the
    zero mode and ``eigenvalues[1]`` is minus the spectral gap.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sqrt_weights: np.ndarray

    @property
    def gap(self) -> float:
        return float(-self.eigenvalues[1])

    def eigenfunction(self, k: int) -> np.ndarray:
        """k-th eigenfunction, orthonormal in L^2(mu)."""
        return self.eigenvectors[:, k] / self.sqrt_weights


def spectral(gen: GeneratorMatrix, tol: float = 1e-9) -> SpectralDecomposition:
    sw = np.sqrt(gen.grid.weights)
    S = sw[:, None] * gen.matrix / sw[None, :]
    scale = max(1.0, float(np.abs(S).max()))
    asym = float(np.abs(S - S.T).max())
    if asym > tol * scale:
        raise InconsistentGeneratorError(f"symmetrization residual {asym:.3e} exceeds {tol:g} (relative)")
    lam, Q = np.linalg.eigh(0.5 * (S + S.T))
    order = np.argsort(lam)[::-1]
    lam, Q = lam[order], Q[:, order]
    # the zero mode is known exactly: sqrt(w), eigenvalue 0
    Q[:, 0] = sw / np.linalg.norm(sw)
    lam[0] = 0.0
    return SpectralDecomposition(lam, Q, sw)


def evolve(spec: SpectralDecomposition, f, t: float) -> np.ndarray:
    """``P_t f``; ``f`` may carry extra trailing columns."""
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    f = np.asarray(f, dtype=float)
    if t == 0:
        return f.copy()
    sw = spec.sqrt_weights if f.ndim == 1 else spec.sqrt_weights[:, None]
    coef = spec.eigenvectors.T @ (sw * f)
    decay = np.exp(t * spec.eigenvalues)
    if f.ndim > 1:
        decay = decay[:, None]
    return (spec.eigenvectors @ (decay * coef)) / sw


def evolve_path(spec: SpectralDecomposition, f, times) -> list[np.ndarray]:
    """``[P_t f for t in times]`` reusing one projection onto the eigenbasis."""
    times = np.asarray(times, dtype=float)
    if times.size and (np.any(times < 0) or np.any(np.diff(times) < 0)):
        raise ValueError("times must be sorted and nonnegative")
    f = np.asarray(f, dtype=float)
    coef = spec.eigenvectors.T @ (spec.sqrt_weights * f)
    decay = np.exp(np.outer(spec.eigenvalues, times))
    out = (spec.eigenvectors @ (decay * coef[:, None])) / spec.sqrt_weights[:, None]
    # P_0 is the identity exactly, not up to the eigenbasis round trip
    return [f.copy() if t == 0 else out[:, k] for k, t in enumerate(times)]
