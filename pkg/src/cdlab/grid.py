"""Weighted 1-D discretizations of diffusion generators and their Gamma calculus.

A :class:`WeightedGrid` samples a circle or an interval together with the
reference measure ``mu = exp(-V) dx``. :func:`build_generator` turns it into a
Markov generator matrix approximating ``L = f'' - V' f'`` that is exactly
conservative and exactly reversible with respect to the node weights, so that
the discrete integration-by-parts identities hold to roundoff.

The carre du champ and its iterate are computed algebraically from the matrix,

    Gamma(f, g) = (L(fg) - f Lg - g Lf) / 2
    Gamma_2(f)  = (L Gamma(f) - 2 Gamma(f, Lf)) / 2

and never from difference quotients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .report import CheckReport

__all__ = [
    "GridError",
    "StabilityError",
    "WeightedGrid",
    "GeneratorMatrix",
    "CurvatureParams",
    "build_grid",
    "build_generator",
    "density",
    "apply_L",
    "gamma",
    "gamma2",
    "integrate",
    "stencil_interior",
    "default_test_family",
    "cd_margins",
    "check_pointwise_cd",
    "check_weak_cd",
    "estimate_best_R",
]

MIN_NODES = 8


class GridError(ValueError):
    """Invalid grid construction or mismatched grid data."""


class StabilityError(GridError):
    """The drift is too strong for the spacing: a transition rate would be negative."""


@dataclass(frozen=True, eq=False)
class WeightedGrid:
    """Nodes, spacing and reference weights ``w_i = exp(-V(x_i)) dx``.

    Circle grids place nodes at ``a + k dx`` with periodic adjacency. Interval
    grids use cell centres ``a + (k + 1/2) dx`` with reflecting (zero-flux)
    adjacency, so every node owns a cell of width ``dx``.
    """

    kind: str
    nodes: np.ndarray
    dx: float
    potential: np.ndarray
    dpotential: np.ndarray
    weights: np.ndarray
    normalized: bool
    domain: tuple[float, float]
    potential_fn: Callable | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def length(self) -> float:
        return self.domain[1] - self.domain[0]

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def is_circle(self) -> bool:
        return self.kind == "circle"

    def distance_matrix(self) -> np.ndarray:
        """Pairwise node distances (arc length on the circle)."""
        d = np.abs(self.nodes[:, None] - self.nodes[None, :])
        if self.is_circle:
            d = np.minimum(d, self.length - d)
        return d

    def check_function(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape[0] != self.n:
            raise GridError(f"function has {f.shape[0]} values, grid has {self.n} nodes")
        if not np.all(np.isfinite(f)):
            raise GridError("grid function has non-finite entries")
        return f


@dataclass(frozen=True)
class CurvatureParams:
    """Curvature lower bound ``R`` and dimension upper bound ``m`` (``m`` may be ``inf``)."""

    R: float
    m: float = math.inf

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"dimension m must be positive, got {self.m}")

    @property
    def inv_m(self) -> float:
        return 0.0 if math.isinf(self.m) else 1.0 / self.m


def _as_params(params) -> CurvatureParams:
    if isinstance(params, CurvatureParams):
        return params
    R, m = params
    return CurvatureParams(float(R), float(m))


def build_grid(
    kind: str,
    n: int,
    domain: Sequence[float] = (0.0, 2 * math.pi),
    V=None,
    normalize: bool = True,
    dV=None,
) -> WeightedGrid:
    """Discretize a circle or an interval with reference measure ``exp(-V) dx``.

    Parameters
    ----------
    kind : {"circle", "interval"}
    n : int
        Number of nodes, at least 8.
    domain : (a, b)
        Interval endpoints, or the fundamental domain of the circle.
    V : callable, array of node samples, or None
        Potential. ``None`` means ``V = 0``.
    normalize : bool
        Rescale weights to total mass one.
    dV : callable or array, optional
        Derivative of ``V``. Defaults to a central difference of the callable,
        or to a (periodic, for circles) gradient of the samples.
    """
    if kind not in ("circle", "interval"):
        raise GridError(f"unknown grid kind {kind!r}")
    if n < MIN_NODES:
        raise GridError(f"grid needs at least {MIN_NODES} nodes, got {n}")
    a, b = float(domain[0]), float(domain[1])
    if not b > a:
        raise GridError(f"domain must satisfy a < b, got [{a}, {b}]")
    dx = (b - a) / n
    k = np.arange(n)
    x = a + k * dx if kind == "circle" else a + (k + 0.5) * dx

    fn = None
    if V is None:
        Vx = np.zeros(n)
        dVx = np.zeros(n)
    elif callable(V):
        fn = V
        Vx = np.asarray(V(x), dtype=float) * np.ones(n)
        if dV is None:
            h = 1e-6 * max(1.0, b - a)
            with np.errstate(invalid="ignore", over="ignore"):
                dVx = (np.asarray(V(x + h), float) - np.asarray(V(x - h), float)) / (2 * h) * np.ones(n)
        else:
            dVx = np.asarray(dV(x) if callable(dV) else dV, dtype=float) * np.ones(n)
    else:
        Vx = np.asarray(V, dtype=float)
        if Vx.shape != (n,):
            raise GridError(f"potential samples must have shape ({n},)")
        if dV is not None:
            dVx = np.asarray(dV(x) if callable(dV) else dV, dtype=float)
        elif kind == "circle":
            dVx = (np.roll(Vx, -1) - np.roll(Vx, 1)) / (2 * dx)
        else:
            dVx = np.gradient(Vx, dx)
    if not np.all(np.isfinite(Vx)) or not np.all(np.isfinite(dVx)):
        bad = int(np.flatnonzero(~(np.isfinite(Vx) & np.isfinite(dVx)))[0])
        raise GridError(f"potential is not finite at node {bad} (x={x[bad]:.6g})")

    w = np.exp(-Vx) * dx
    if normalize:
        w = w / w.sum()
    return WeightedGrid(kind, x, dx, Vx, dVx, w, bool(normalize), (a, b), fn)


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    """Dense generator ``L`` (rows sum to zero, nonnegative off-diagonal, mu-reversible)."""

    matrix: np.ndarray
    grid: WeightedGrid

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def row_sum_residual(self) -> float:
        return float(np.abs(self.matrix.sum(axis=1)).max())

    def symmetry_residual(self, weights=None) -> float:
        w = self.grid.weights if weights is None else weights
        flux = w[:, None] * self.matrix
        return float(np.abs(flux - flux.T).max())


def build_generator(grid: WeightedGrid) -> GeneratorMatrix:
    """Three-point generator for ``f'' - V' f'`` with exact reversibility.

    Nearest-neighbour rates ``1/dx^2 -+ V'(x_i)/(2 dx)`` are turned into
    symmetric fluxes by averaging ``w_i L_ij`` with ``w_j L_ji``; the diagonal
    closes every row to zero. Interval ends have no outer neighbour
    (reflecting boundary).
    """
    n, dx = grid.n, grid.dx
    up = 1.0 / dx**2 - grid.dpotential / (2 * dx)
    down = 1.0 / dx**2 + grid.dpotential / (2 * dx)
    bad = np.flatnonzero((up < 0) | (down < 0))
    if bad.size:
        i = int(bad[0])
        raise StabilityError(
            f"drift too large at node {i} (x={grid.nodes[i]:.6g}): dx*|V'| = "
            f"{dx * abs(grid.dpotential[i]):.3g} must be < 2"
        )
    L = np.zeros((n, n))
    i = np.arange(n)
    if grid.is_circle:
        L[i, (i + 1) % n] = up
        L[i, (i - 1) % n] = down
    else:
        L[i[:-1], i[:-1] + 1] = up[:-1]
        L[i[1:], i[1:] - 1] = down[1:]
    flux = grid.weights[:, None] * L
    flux = 0.5 * (flux + flux.T)
    L = flux / grid.weights[:, None]
    np.fill_diagonal(L, 0.0)
    np.fill_diagonal(L, -L.sum(axis=1))
    return GeneratorMatrix(L, grid)


def density(grid: WeightedGrid, values, normalize: bool = True) -> np.ndarray:
    """Validate (and by default normalize) a probability density with respect to mu."""
    f = grid.check_function(values)
    if np.any(f < 0):
        raise GridError("density has negative values")
    mass = float(f @ grid.weights)
    if mass <= 0:
        raise GridError("density has zero mass")
    if normalize:
        return f / mass
    if abs(mass - 1.0) > 1e-10:
        raise GridError(f"density mass is {mass!r}, expected 1")
    return f


def apply_L(gen: GeneratorMatrix, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape[0] != gen.n:
        raise GridError(f"shape mismatch: {f.shape[0]} values for {gen.n} nodes")
    return gen.matrix @ f


def gamma(gen: GeneratorMatrix, f, g=None) -> np.ndarray:
    """Carre du champ ``Gamma(f, g)``; ``Gamma(f) = Gamma(f, f)`` when ``g`` is omitted."""
    f = np.asarray(f, dtype=float)
    g = f if g is None else np.asarray(g, dtype=float)
    if f.shape != g.shape:
        raise GridError(f"shape mismatch: {f.shape} vs {g.shape}")
    L = gen.matrix
    return 0.5 * (L @ (f * g) - f * (L @ g) - g * (L @ f))


def gamma2(gen: GeneratorMatrix, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    Lf = apply_L(gen, f)
    return 0.5 * (apply_L(gen, gamma(gen, f)) - 2.0 * gamma(gen, f, Lf))


def integrate(grid: WeightedGrid, f) -> float:
    f = np.asarray(f, dtype=float)
    if f.shape[0] != grid.n:
        raise GridError(f"shape mismatch: {f.shape[0]} values for {grid.n} nodes")
    return float(grid.weights @ f)


def stencil_interior(grid: WeightedGrid, depth: int = 2) -> np.ndarray:
    """Nodes whose ``Gamma_2`` stencil stays clear of the reflecting boundary.

    ``Gamma_2`` at node i reads generator rows i-1..i+1, so on an interval the
    first and last ``depth`` nodes see the truncated boundary rows.
    """
    mask = np.ones(grid.n, dtype=bool)
    if not grid.is_circle:
        mask[:depth] = False
        mask[grid.n - depth :] = False
    return mask


def default_test_family(grid: WeightedGrid, m: float | None = None, max_mode: int = 4) -> list[np.ndarray]:
    """Smooth test functions for the pointwise curvature-dimension test.

    Constants, ``sin kx`` / ``cos kx`` for ``k <= max_mode`` (periodic on the
    circle), monomials up to degree four on intervals, and, for ``1 < m < inf`` with a
    non-constant potential, the one-dimensional extremal whose derivative is
    ``exp(-V / (m - 1))``; it saturates ``V'' - V'^2/(m-1)`` at every point.
    """
    a, b = grid.domain
    x = grid.nodes
    fam = [np.ones(grid.n)]
    if grid.is_circle:
        theta = 2 * math.pi * (x - a) / (b - a)
        for k in range(1, max_mode + 1):
            fam += [np.sin(k * theta), np.cos(k * theta)]
        return fam
    c, h = 0.5 * (a + b), 0.5 * (b - a)
    xi = (x - c) / h
    for k in range(1, max_mode + 1):
        fam += [np.sin(k * xi), np.cos(k * xi)]
    for p in range(1, 5):
        fam.append(xi**p)
    if m is not None and 1 < m < math.inf and np.ptp(grid.potential) > 0 and grid.potential_fn is not None:
        fine = np.linspace(a, b, 16 * grid.n + 1)
        vals = np.asarray(grid.potential_fn(fine), dtype=float) * np.ones_like(fine)
        prim = cumulative_trapezoid(np.exp(-(vals - vals.min()) / (m - 1)), fine, initial=0.0)
        fam.append(np.interp(x, fine, prim))
    return fam


def cd_margins(gen: GeneratorMatrix, params, f) -> np.ndarray:
    """Per-node ``Gamma_2(f) - R Gamma(f) - (Lf)^2 / m``."""
    p = _as_params(params)
    f = gen.grid.check_function(f)
    Lf = apply_L(gen, f)
    G = gamma(gen, f)
    margin = gamma2(gen, f) - p.R * G
    if p.inv_m:
        margin = margin - p.inv_m * Lf**2
    return margin


def _family(test_functions) -> list[np.ndarray]:
    fam = [np.asarray(f, dtype=float) for f in test_functions]
    if not fam:
        raise ValueError("test-function family is empty")
    return fam


def check_pointwise_cd(gen: GeneratorMatrix, params, test_functions, tol: float | None = None) -> CheckReport:
    """Pointwise Bakry-Emery test over a family of functions.

    The reported inequality is ``R Gamma(f) + (Lf)^2/m <= Gamma_2(f)`` at the
    node/function pair with the smallest margin, restricted to stencil-interior
    nodes. Default tolerance is ``5 dx``.

    The inequality is homogeneous of degree two in ``f``, so each function is
    rescaled to make the larger of its two sides equal to one at its peak
    node; margins are therefore relative and independent of the amplitude or
    frequency of the test function.
    """
    p = _as_params(params)
    fam = _family(test_functions)
    grid = gen.grid
    tol = 5.0 * grid.dx if tol is None else tol
    mask = stencil_interior(grid)
    best = None
    for k, f in enumerate(fam):
        Lf = apply_L(gen, f)
        G = gamma(gen, f)
        G2 = gamma2(gen, f)
        low = p.R * G + p.inv_m * Lf**2
        scale = max(np.abs(G2[mask]).max(initial=0.0), np.abs(low[mask]).max(initial=0.0))
        if scale > 0:
            low, G2 = low / scale, G2 / scale
        marg = np.where(mask, G2 - low, np.inf)
        i = int(np.argmin(marg))
        if best is None or marg[i] < best[0]:
            best = (marg[i], k, i, low[i], G2[i])
    _, k, i, low, high = best
    return CheckReport(
        "pointwise_cd",
        "CD-pointwise",
        low,
        high,
        tol,
        metadata={"R": p.R, "m": p.m, "n": grid.n, "node": i, "x": float(grid.nodes[i]), "function": k},
    )


def check_weak_cd(gen: GeneratorMatrix, params, f, g, tol: float | None = None) -> CheckReport:
    """Integrated test ``R int Gamma(f) g + 1/m int (Lf)^2 g <= 1/2 int Gamma(f) Lg - int Gamma(f, Lf) g``."""
    p = _as_params(params)
    grid = gen.grid
    f = grid.check_function(f)
    g = grid.check_function(g)
    if np.any(g < 0):
        raise ValueError("weight function g must be nonnegative")
    tol = 5.0 * grid.dx if tol is None else tol
    Lf = apply_L(gen, f)
    G = gamma(gen, f)
    upper = 0.5 * integrate(grid, G * apply_L(gen, g)) - integrate(grid, gamma(gen, f, Lf) * g)
    lower = p.R * integrate(grid, G * g) + p.inv_m * integrate(grid, Lf**2 * g)
    return CheckReport(
        "weak_cd", "CD-weak", lower, upper, tol, metadata={"R": p.R, "m": p.m, "n": grid.n, "mass_g": integrate(grid, g)}
    )


def estimate_best_R(gen: GeneratorMatrix, m: float, test_functions, gate: float = 1e-2, floor: float = 1e-12) -> float:
    """Largest ``R`` for which the pointwise test passes with zero tolerance.

    The ratio ``(Gamma_2(f) - (Lf)^2/m) / Gamma(f)`` is minimized over the
    family and the stencil-interior nodes where ``Gamma(f)`` exceeds both
    ``floor`` and ``gate * max Gamma(f)``. Near critical points of ``f`` the
    numerator and ``Gamma(f)`` are both ``O(dx^2)`` and their ratio carries no
    curvature information, hence the relative gate.
    """
    if not m > 0:
        raise ValueError("m must be positive")
    fam = _family(test_functions)
    inv_m = 0.0 if math.isinf(m) else 1.0 / m
    mask = stencil_interior(gen.grid)
    best = math.inf
    for f in fam:
        G = gamma(gen, f)
        gmax = G[mask].max(initial=0.0)
        keep = mask & (G > floor) & (G > gate * gmax)
        if not keep.any():
            continue
        num = gamma2(gen, f) - inv_m * apply_L(gen, f) ** 2
        best = min(best, float((num[keep] / G[keep]).min()))
    if math.isinf(best):
        raise ValueError("undefined R: Gamma(f) is below threshold for every test function")
    return best
