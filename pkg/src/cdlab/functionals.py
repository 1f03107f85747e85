"""Scalar functionals of densities: entropy, Fisher information, ``s_r`` and ``U_m``.

Values that are infinite by convention (for instance the Fisher information of
a density vanishing where its gradient does not) are returned as ``math.inf``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import simpson

from .grid import GeneratorMatrix, WeightedGrid, gamma
from .semigroup import SpectralDecomposition, evolve_path

__all__ = [
    "BranchError",
    "s_r",
    "entropy",
    "fisher",
    "u_m",
    "entropy_path",
    "de_bruijn_residual",
]

R_ZERO = 1e-12


class BranchError(ValueError):
    """``s_r`` evaluated past its monotone branch (``sqrt(r) x >= pi``)."""


def s_r(r: float, x):
    """``sin(sqrt(r) x)/sqrt(r)``, ``x`` or ``sinh(sqrt(-r) x)/sqrt(-r)`` by the sign of ``r``.

    Only the increasing branch is allowed: for ``r > 0`` the argument must
    satisfy ``sqrt(r) x < pi``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("s_r is evaluated on nonnegative arguments only")
    if abs(r) < R_ZERO:
        out = x
    elif r > 0:
        q = math.sqrt(r)
        if np.any(q * x >= math.pi):
            raise BranchError(f"sqrt(r)*x = {float(np.max(q * x)):.6g} >= pi for r = {r:g}")
        out = np.sin(q * x) / q
    else:
        q = math.sqrt(-r)
        out = np.sinh(q * x) / q
    return float(out) if out.ndim == 0 else out


def entropy(grid: WeightedGrid, f) -> float:
    """``sum_i w_i f_i log f_i`` with ``0 log 0 = 0``."""
    f = np.asarray(f, dtype=float)
    pos = f > 0
    return float(np.sum(grid.weights[pos] * f[pos] * np.log(f[pos])))


def fisher(gen: GeneratorMatrix, f, floor: float = 1e-12, gamma_tol: float = 1e-12) -> float:
    """``sum_i w_i Gamma(f)_i / max(f_i, floor)``; infinite when the floor hides a nonzero gradient."""
    if not floor > 0:
        raise ValueError("floor must be positive")
    f = np.asarray(f, dtype=float)
    G = np.maximum(gamma(gen, f), 0.0)
    if np.any((f < floor) & (G > gamma_tol)):
        return math.inf
    return float(np.sum(gen.grid.weights * G / np.maximum(f, floor)))


def u_m(grid: WeightedGrid, f, m: float) -> float:
    ent = entropy(grid, f)
    if math.isinf(ent):
        return 0.0
    if math.isinf(m):
        return 1.0
    return math.exp(-ent / m)


def simpson_nodes(t: float, du: float) -> np.ndarray:
    """Even number of Simpson panels on ``[0, t]`` with step at most ``du``."""
    k = max(2, int(math.ceil(t / du - 1e-12)))
    k += k % 2
    return np.linspace(0.0, t, k + 1)


def entropy_path(spec: SpectralDecomposition, grid: WeightedGrid, f, times) -> np.ndarray:
    return np.array([entropy(grid, p) for p in evolve_path(spec, f, times)])


def de_bruijn_residual(gen: GeneratorMatrix, spec: SpectralDecomposition, f, t: float, du: float) -> float:
    """``|Ent(f) - Ent(P_t f) - int_0^t I(P_s f) ds|`` with composite Simpson."""
    us = simpson_nodes(t, du)
    path = evolve_path(spec, f, us)
    info = np.array([fisher(gen, p) for p in path])
    drop = entropy(gen.grid, path[0]) - entropy(gen.grid, path[-1])
    return abs(drop - float(simpson(info, x=us)))
