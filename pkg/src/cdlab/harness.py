"""Contraction, EVI and equivalence checks assembled from the grid, semigroup and transport layers.

Every check returns :class:`~cdlab.report.CheckReport` records with signed
margins. Distances use the cell measure model of :mod:`cdlab.transport` unless
an experiment says otherwise; it is the model under which distance difference
quotients converge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import simpson

from .functionals import BranchError, entropy, s_r, simpson_nodes, u_m
from .grid import (
    CurvatureParams,
    GeneratorMatrix,
    WeightedGrid,
    _as_params,
    apply_L,
    build_generator,
    build_grid,
    check_pointwise_cd,
    default_test_family,
    estimate_best_R,
    gamma,
    integrate,
)
from .report import CheckReport
from .semigroup import SpectralDecomposition, evolve, evolve_path, spectral
from .transport import w2, w2_geodesic

__all__ = [
    "Space",
    "make_space",
    "reference_space",
    "density_family",
    "ContractionExperiment",
    "tolerance",
    "check_contraction_iii",
    "check_contraction_ii",
    "check_two_time_eks",
    "check_evi",
    "check_evi_integrated",
    "geodesic_refinement",
    "tilted_generator",
    "perturbed_density",
    "richardson",
    "converse_estimates",
    "forward_reports",
    "equivalence_report",
    "eks_coefficient",
]

C_DX = 5.0
C_DU = 5.0
QUAD_PANELS = 64
RATIO_FLOOR = 1e-9


@dataclass(frozen=True, eq=False)
class Space:
    """A grid with its generator and spectral decomposition."""

    grid: WeightedGrid
    gen: GeneratorMatrix
    spec: SpectralDecomposition

    @classmethod
    def from_grid(cls, grid: WeightedGrid) -> "Space":
        gen = build_generator(grid)
        return cls(grid, gen, spectral(gen))

    @property
    def dx(self) -> float:
        return self.grid.dx

    def evolve(self, f, t: float) -> np.ndarray:
        return evolve(self.spec, f, t)

    def density(self, values) -> np.ndarray:
        f = np.asarray(values, dtype=float)
        return f / integrate(self.grid, f)


def make_space(kind: str, n: int, domain=(0.0, 2 * math.pi), V=None, normalize: bool = True) -> Space:
    return Space.from_grid(build_grid(kind, n, domain, V, normalize))


def reference_space(name: str, n: int = 256) -> Space:
    """``"circle"``: flat circle of length 2 pi. ``"interval"``: ``[-1/2, 1/2]`` with ``V = x^2 / 2``."""
    if name == "circle":
        return make_space("circle", n, (0.0, 2 * math.pi))
    if name == "interval":
        return make_space("interval", n, (-0.5, 0.5), lambda x: 0.5 * x**2)
    raise ValueError(f"unknown reference space {name!r}")


def density_family(space: Space) -> dict[str, np.ndarray]:
    """Six smooth positive densities ranging from flat to sharply peaked."""
    a, b = space.grid.domain
    x = space.grid.nodes
    th = 2 * math.pi * (x - a) / (b - a)
    if space.grid.is_circle:
        raw = {
            "sin": 1 + 0.5 * np.sin(th),
            "cos": 1 + 0.5 * np.cos(th),
            "uniform": np.ones_like(x),
            "cos2": 1 + 0.9 * np.cos(2 * th),
            "vonmises": np.exp(2.0 * np.cos(th - 1.0)),
            "peak": np.exp(-((np.angle(np.exp(1j * (th - 4.0)))) ** 2) / 0.1) + 0.02,
        }
    else:
        xi = (x - a) / (b - a)
        raw = {
            "cos": 1 + 0.5 * np.cos(math.pi * xi),
            "sin": 1 + 0.5 * np.sin(math.pi * xi),
            "uniform": np.ones_like(x),
            "cos2": 1 + 0.9 * np.cos(2 * math.pi * xi),
            "left": np.exp(-((xi - 0.25) ** 2) / 0.02),
            "peak": np.exp(-((xi - 0.85) ** 2) / 0.002) + 0.02,
        }
    return {k: space.density(v) for k, v in raw.items()}


def tolerance(dx: float, du: float = 0.0, c_dx: float = C_DX, c_du: float = C_DU) -> float:
    return c_dx * dx + c_du * du


@dataclass(eq=False)
class ContractionExperiment:
    """Two densities on one space, curvature parameters and check times.

    ``du`` is the quadrature step; ``None`` means ``t / 64`` at each time.
    """

    space: Space
    f: np.ndarray
    g: np.ndarray
    params: CurvatureParams
    times: Sequence[float]
    du: float | None = None
    model: str = "cell"
    c_dx: float = C_DX
    c_du: float = C_DU
    name: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.params = _as_params(self.params)
        t = np.asarray(self.times, dtype=float)
        if np.any(t < 0) or np.any(np.diff(t) < 0):
            raise ValueError("experiment times must be sorted and nonnegative")
        if self.du is not None and not self.du > 0:
            raise ValueError("quadrature step du must be positive")
        self.f = self.space.density(self.f)
        self.g = self.space.density(self.g)

    def step(self, t: float) -> float:
        return t / QUAD_PANELS if self.du is None else self.du

    def tol(self, t: float) -> float:
        return tolerance(self.space.dx, self.step(t) if t > 0 else 0.0, self.c_dx, self.c_du)

    def w2(self, f, g) -> float:
        return w2(self.space.grid, f, g, self.model)


def _decay(R: float, t):
    return np.exp(-2.0 * R * np.asarray(t))


def _entropy_gap_path(space: Space, f, g, us):
    ef = np.array([entropy(space.grid, p) for p in evolve_path(space.spec, f, us)])
    eg = np.array([entropy(space.grid, p) for p in evolve_path(space.spec, g, us)])
    return ef - eg


def _s_sq(p: CurvatureParams, x: float, what: str) -> float:
    try:
        return s_r(p.R * p.inv_m, x) ** 2
    except BranchError as exc:
        raise BranchError(f"{what}: {exc}") from None


def _two_m_sinh_sq(p: CurvatureParams, gap):
    """``2 m sinh^2(gap / (2m))``; zero when ``m`` is infinite."""
    if p.inv_m == 0.0:
        return np.zeros_like(gap)
    return 2.0 * p.m * np.sinh(gap / (2.0 * p.m)) ** 2


def _iii_terms(space, f, g, t, p, du, distance):
    w0 = distance(f, g)
    if t == 0:
        return w0**2, w0**2, 0.0
    us = simpson_nodes(t, du)
    integral = 0.0
    if p.inv_m:
        gap = _entropy_gap_path(space, f, g, us)
        integral = float(simpson(_decay(p.R, t - us) * gap**2, x=us))
    lhs = distance(space.evolve(f, t), space.evolve(g, t)) ** 2
    rhs = float(_decay(p.R, t)) * w0**2 - 2.0 * p.inv_m * integral
    return lhs, rhs, integral


def _ii_terms(space, f, g, t, p, du, distance):
    """Both sides of the sinh-form contraction for one pair, plus the subtracted integral."""
    w0 = distance(f, g)
    s0 = _s_sq(p, 0.5 * w0, f"initial distance W2={w0:.6g}")
    if t == 0:
        return s0, s0, 0.0
    wt = distance(space.evolve(f, t), space.evolve(g, t))
    st = _s_sq(p, 0.5 * wt, f"distance W2={wt:.6g} at t={t:g}")
    integral = 0.0
    if p.inv_m:
        us = simpson_nodes(t, du)
        gap = _entropy_gap_path(space, f, g, us)
        integral = float(simpson(_decay(p.R, t - us) * _two_m_sinh_sq(p, gap), x=us))
    return st, float(_decay(p.R, t)) * s0 - integral, integral


def check_contraction_iii(exp: ContractionExperiment) -> list[CheckReport]:
    """Squared-distance contraction with the subtracted entropy-gap integral."""
    out = []
    for t in exp.times:
        lhs, rhs, integral = _iii_terms(exp.space, exp.f, exp.g, t, exp.params, exp.step(t), exp.w2)
        out.append(
            CheckReport(
                exp.name or "contraction_iii",
                "contraction-iii",
                lhs,
                rhs,
                exp.tol(t),
                t=t,
                metadata={"R": exp.params.R, "m": exp.params.m, "n": exp.space.grid.n, "du": exp.step(t), "integral": integral},
            )
        )
    return out


def check_contraction_ii(exp: ContractionExperiment) -> list[CheckReport]:
    """``s_{R/m}``-form contraction with the ``2m sinh^2`` entropy integrand."""
    out = []
    for t in exp.times:
        lhs, rhs, integral = _ii_terms(exp.space, exp.f, exp.g, t, exp.params, exp.step(t), exp.w2)
        out.append(
            CheckReport(
                exp.name or "contraction_ii",
                "contraction-ii",
                lhs,
                rhs,
                exp.tol(t),
                t=t,
                metadata={"R": exp.params.R, "m": exp.params.m, "n": exp.space.grid.n, "du": exp.step(t), "integral": integral},
            )
        )
    return out


def eks_coefficient(R: float, m: float, T: float) -> float:
    """``(m / R)(1 - exp(-R T))`` with the limit ``m T`` at ``R = 0``."""
    if math.isinf(m):
        return math.inf
    if abs(R) < 1e-12:
        return m * T
    return m * (-math.expm1(-R * T)) / R


def check_two_time_eks(
    space: Space, f, g, s: float, t: float, params, tol: float | None = None, model: str = "cell"
) -> CheckReport:
    """Two-time bound comparing ``P_t f`` with ``P_s g``."""
    p = _as_params(params)
    if s < 0 or t < 0 or s + t == 0:
        raise ValueError("need s, t >= 0, not both zero")
    f, g = space.density(f), space.density(g)
    grid = space.grid
    w0 = w2(grid, f, g, model)
    wst = w2(grid, space.evolve(f, t), space.evolve(g, s), model)
    lhs = _s_sq(p, 0.5 * wst, f"distance W2={wst:.6g} at (t, s)=({t:g}, {s:g})")
    T = s + t
    spread = (math.sqrt(t) - math.sqrt(s)) ** 2
    coef = eks_coefficient(p.R, p.m, T)
    extra = 0.0 if spread == 0 else coef * spread / (2.0 * T)
    rhs = math.exp(-p.R * T) * _s_sq(p, 0.5 * w0, f"initial distance W2={w0:.6g}") + extra
    tol = tolerance(grid.dx) if tol is None else tol
    return CheckReport(
        "two_time_eks", "two-time-EKS", lhs, rhs, tol, t=t, metadata={"s": s, "R": p.R, "m": p.m, "n": grid.n}
    )


def _evi_rhs(space: Space, p: CurvatureParams, target, moving) -> float:
    """``(m/2)(1 - U_m(target) / U_m(moving))``, with the ``m = inf`` limit ``(Ent(moving) - Ent(target)) / 2``."""
    et, em = entropy(space.grid, target), entropy(space.grid, moving)
    if p.inv_m == 0.0:
        return 0.5 * (em - et)
    return -0.5 * p.m * math.expm1((em - et) / p.m)


def _evi_phi(exp: ContractionExperiment, moving, target, what: str) -> float:
    return _s_sq(exp.params, 0.5 * exp.w2(moving, target), what)


def _evi_margin(exp: ContractionExperiment, f, g, t: float, h: float):
    """EVI terms for the curve ``P_t f`` against the fixed density ``g``."""
    p = exp.params
    sp = exp.space
    if t >= h:
        phis = [_evi_phi(exp, sp.evolve(f, t + k * h), g, f"EVI distance at t={t + k * h:g}") for k in (-1, 0, 1)]
        deriv = (phis[2] - phis[0]) / (2 * h)
    else:
        phis = [_evi_phi(exp, sp.evolve(f, t + k * h), g, f"EVI distance at t={t + k * h:g}") for k in (0, 1, 2)]
        deriv = (-3 * phis[0] + 4 * phis[1] - phis[2]) / (2 * h)
        phis = [None, phis[0]]
    phi = phis[1]
    lhs = deriv + p.R * phi
    rhs = _evi_rhs(sp, p, g, sp.evolve(f, t))
    return lhs, rhs, phi, deriv


def check_evi(exp: ContractionExperiment, h: float = 1e-3) -> list[CheckReport]:
    """EVI along ``P_t f`` with the probe ``exp.g`` held fixed; tolerance ``c_dx dx + 10 h``."""
    positive = [t for t in exp.times if t > 0]
    if len(positive) > 1 and h >= np.min(np.diff(positive)):
        raise ValueError("difference step must be smaller than the gap between times")
    out = []
    for t in exp.times:
        lhs, rhs, phi, deriv = _evi_margin(exp, exp.f, exp.g, t, h)
        out.append(
            CheckReport(
                exp.name or "evi",
                "EVI",
                lhs,
                rhs,
                exp.c_dx * exp.space.dx + 10.0 * h,
                t=t,
                metadata={"R": exp.params.R, "m": exp.params.m, "h": h, "phi": phi, "dphi": deriv},
            )
        )
    return out


def check_evi_integrated(exp: ContractionExperiment, t: float, h: float = 1e-3, panels: int = 16) -> CheckReport:
    """Integrate the two symmetric EVI margins and compare with the contraction margin.

    For the curves ``P_u f`` against ``P_u g`` and ``P_u g`` against ``P_u f``
    the weighted sum ``int_0^t e^{-2R(t-u)} (margin_1 + margin_2) du`` equals
    the sinh-form contraction margin at ``t`` in exact arithmetic. The report
    asserts the integrated margin is nonnegative; the gap to the contraction
    margin is stored in the metadata.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    p = exp.params
    sp = exp.space
    us = np.linspace(0.0, t, panels + 1)
    total = np.empty(us.size)
    for k, u in enumerate(us):
        fu, gu = sp.evolve(exp.f, u), sp.evolve(exp.g, u)
        total[k] = 0.0
        for moving, fixed in ((exp.f, gu), (exp.g, fu)):
            # partial derivative in the moving argument only, at time u
            lhs, rhs, _, _ = _evi_margin(exp, moving, fixed, u, h)
            total[k] += rhs - lhs
    integrated = float(simpson(_decay(p.R, t - us) * total, x=us))
    lhs_ii, rhs_ii, _ = _ii_terms(sp, exp.f, exp.g, t, p, t / panels, exp.w2)
    margin_ii = rhs_ii - lhs_ii
    return CheckReport(
        exp.name or "evi_integrated",
        "EVI-integrated",
        0.0,
        integrated,
        exp.c_dx * sp.dx + exp.c_du * t / panels + 10.0 * h,
        t=t,
        metadata={
            "margin_ii": margin_ii,
            "gap": abs(integrated - margin_ii),
            "same_sign": bool(np.sign(integrated) == np.sign(margin_ii)),
        },
    )


def geodesic_refinement(
    space: Space, f, g, t: float, params, n_refine: Sequence[int] = (1, 2, 4), du: float | None = None, model: str = "cell"
) -> list[CheckReport]:
    """Geodesic refinement of the sinh-form contraction.

    For each ``n`` the pair is split at the displacement interpolants
    ``y_{i/n}`` and the sinh-form inequality is summed over segments:
    ``n sum s(x_i / 2)^2 <= n sum [e^{-2Rt} s(d_i / 2)^2 - 2m int e^{-2R(t-u)} sinh^2(...) du]``
    where ``x_i = W2(P_t y_{(i-1)/n}, P_t y_{i/n})`` and ``d_i`` is the
    undeformed segment length. ``n = 1`` is exactly the sinh-form check.
    The triangle and Cauchy-Schwarz steps of the chain, the (iii)-form right
    side and the geodesic defect go into the metadata.
    """
    p = _as_params(params)
    f, g = space.density(f), space.density(g)
    grid = space.grid
    du = t / QUAD_PANELS if du is None else du

    def dist(a, b):
        return w2(grid, a, b, model)

    w_full = dist(f, g)
    wt_full = dist(space.evolve(f, t), space.evolve(g, t))
    _, rhs_iii, _ = _iii_terms(space, f, g, t, p, du, dist)
    out = []
    for n in n_refine:
        if n not in (1, 2, 4, 8):
            raise ValueError("refinement levels are limited to 1, 2, 4, 8")
        ys = [f] + [w2_geodesic(grid, f, g, i / n, model) for i in range(1, n)] + [g]
        for y in ys:
            if np.any(y < 0) or not np.isfinite(y).all() or abs(integrate(grid, y) - 1) > 1e-10:
                raise ValueError("re-binned interpolant is not a probability density")
        lhs_terms, rhs_terms, xs, ds = [], [], [], []
        for a, b in zip(ys[:-1], ys[1:]):
            lhs_i, rhs_i, _ = _ii_terms(space, a, b, t, p, du, dist)
            lhs_terms.append(lhs_i)
            rhs_terms.append(rhs_i)
            xs.append(dist(space.evolve(a, t), space.evolve(b, t)))
            ds.append(dist(a, b))
        lhs = n * math.fsum(lhs_terms)
        rhs = n * math.fsum(rhs_terms)
        xs = np.array(xs)
        chain = (wt_full**2, float(xs.sum()) ** 2, n * float(np.sum(xs**2)))
        out.append(
            CheckReport(
                "refinement",
                "refinement-chain",
                lhs,
                rhs,
                n * C_DX * grid.dx + C_DU * du,
                t=t,
                metadata={
                    "n_refine": n,
                    "chain": chain,
                    "chain_holds": bool(chain[0] <= chain[1] * (1 + 1e-12) and chain[1] <= chain[2] * (1 + 1e-12)),
                    "geodesic_defect": float(np.max(np.abs(np.array(ds) - w_full / n))),
                    "rhs_iii_quarter": 0.25 * rhs_iii,
                },
            )
        )
    return out


def tilted_generator(gen: GeneratorMatrix, g) -> GeneratorMatrix:
    """``L^g h = L h + Gamma(log g, h)`` as a matrix.

    ``Gamma(l, h)_i = 1/2 sum_j L_ij (l_j - l_i)(h_j - h_i)``, so the
    correction has off-diagonal entries ``L_ij (l_j - l_i) / 2``. Rows still sum
    to zero; symmetry with respect to ``g mu`` holds only up to the
    discretization error and is not enforced.
    """
    g = gen.grid.check_function(g)
    if np.any(g <= 0):
        raise ValueError("tilting density must be positive")
    ell = np.log(g)
    L = gen.matrix
    M = 0.5 * L * (ell[None, :] - ell[:, None])
    np.fill_diagonal(M, 0.0)
    np.fill_diagonal(M, -M.sum(axis=1))
    return GeneratorMatrix(L + M, gen.grid)


def perturbed_density(space: Space, g, f, s: float, tilted: GeneratorMatrix | None = None) -> np.ndarray:
    """``g_s = g (1 - s L^g f)``, renormalized when the discrete mass identity is off by roundoff."""
    g = space.grid.check_function(g)
    if np.any(g <= 0):
        raise ValueError("base density must be positive")
    Lg = tilted_generator(space.gen, g) if tilted is None else tilted
    v = apply_L(Lg, f)
    N = float(np.abs(v).max())
    if s * N >= 1:
        raise ValueError(f"s = {s:g} too large: positivity needs s < 1/N = {1 / N:.6g}")
    gs = g * (1 - s * v)
    mass = integrate(space.grid, gs)
    if abs(mass - 1) > 1e-12:
        gs = gs / mass
    return gs


def richardson(values: Sequence[float], ratio: float = 2.0, order: int = 1) -> tuple[float, float]:
    """Two-level Richardson table for ``q(s_k)`` with ``s_k = s_0 / ratio^k``.

    Returns the most extrapolated value and the difference between the two
    best estimates of the previous level, used as a convergence indicator.
    """
    q = np.asarray(values, dtype=float)
    if q.size < 2:
        raise ValueError("need at least two values")
    level = q
    p = order
    prev = level
    while level.size > 1:
        prev = level
        fac = ratio**p
        level = (fac * level[1:] - level[:-1]) / (fac - 1)
        p += 1
    spread = float(abs(prev[-1] - prev[-2])) if prev.size > 1 else 0.0
    return float(level[0]), spread


def converse_estimates(
    space: Space,
    g,
    f,
    t: float,
    params=(0.0, 1.0),
    s_list: Sequence[float] = (0.02, 0.01, 0.005),
    u_panels: int = 8,
    tol: float | None = None,
    model: str = "cell",
) -> list[CheckReport]:
    """The three small-``s`` estimates along the perturbed densities ``g_s``.

    (a) ``W2^2(P_t g_s, P_t g) / 2s^2`` against its Kantorovich lower bound
        ``-1/2 int P_t Gamma(f) g + int Gamma(f, P_t f) g``;
    (b) ``W2^2(g_s, g) / 2s^2`` against ``1/2 int Gamma(f) g``;
    (c) ``-1/m int e^{-2R(t-u)} D(u)^2 du`` against the same with ``D(u)``
        replaced by ``int Gamma(P_u log P_u g, f) g``, where ``D(u)`` is the
        entropy derivative ``(Ent(P_u g_s) - Ent(P_u g)) / s``.

    Limits are Richardson-extrapolated over ``s_list`` (halving steps). A
    report whose last two extrapolants differ by more than ten tolerances is
    flagged inconclusive. ``metadata["ratio"]`` is extrapolated over closed form.
    """
    p = _as_params(params)
    s_list = np.asarray(s_list, dtype=float)
    if np.any(np.diff(s_list) >= 0):
        raise ValueError("s_list must decrease")
    grid, gen = space.grid, space.gen
    g = space.density(g)
    f = grid.check_function(f)
    tol = 10.0 * grid.dx if tol is None else tol
    Lg = tilted_generator(gen, g)
    gs = [perturbed_density(space, g, f, s, Lg) for s in s_list]
    Pg = space.evolve(g, t)

    def dist(a, b):
        return w2(grid, a, b, model)

    Gf = gamma(gen, f)
    rhs_a = -0.5 * integrate(grid, space.evolve(Gf, t) * g) + integrate(grid, gamma(gen, f, space.evolve(f, t)) * g)
    qa = [dist(space.evolve(x, t), Pg) ** 2 / (2 * s * s) for x, s in zip(gs, s_list)]
    rhs_b = 0.5 * integrate(grid, Gf * g)
    qb = [dist(x, g) ** 2 / (2 * s * s) for x, s in zip(gs, s_list)]

    us = np.linspace(0.0, t, u_panels + 1)
    d_lim, d_closed, d_spread = [], [], []
    for u in us:
        Pug = space.evolve(g, u)
        base = entropy(grid, Pug)
        q = [(entropy(grid, space.evolve(x, u)) - base) / s for x, s in zip(gs, s_list)]
        val, spread = richardson(q)
        d_lim.append(val)
        d_spread.append(spread)
        d_closed.append(integrate(grid, gamma(gen, space.evolve(np.log(Pug), u), f) * g))
    d_lim, d_closed = np.array(d_lim), np.array(d_closed)
    weight = _decay(p.R, t - us)
    lhs_c = -p.inv_m * float(simpson(weight * d_lim**2, x=us))
    rhs_c = -p.inv_m * float(simpson(weight * d_closed**2, x=us))

    va, sa = richardson(qa)
    vb, sb = richardson(qb)

    def ratio(num, den):
        if abs(den) <= RATIO_FLOOR:
            return 1.0 if abs(num) <= RATIO_FLOOR else math.inf
        return num / den

    meta = {"t": t, "s_list": tuple(s_list), "n": grid.n}
    ra = CheckReport(
        "converse_a", "converse-first", rhs_a, va, tol, t=t,
        metadata={**meta, "raw": qa, "ratio": ratio(va, rhs_a)}, inconclusive=sa > 10 * tol,
    )
    rb = CheckReport(
        "converse_b", "converse-second", vb, rhs_b, tol, t=t,
        metadata={**meta, "raw": qb, "ratio": ratio(vb, rhs_b)}, inconclusive=sb > 10 * tol,
    )
    dev = np.abs(d_lim - d_closed)
    rc = CheckReport(
        "converse_c", "converse-third", lhs_c, rhs_c, tol, t=t,
        metadata={
            **meta,
            "ratio": ratio(lhs_c, rhs_c),
            "pointwise_ratio": [ratio(a, b) for a, b in zip(d_lim, d_closed)],
            "max_deviation": float(dev.max()),
            "u": tuple(us),
        },
        inconclusive=max(d_spread) > 10 * tol,
    )
    return [ra, rb, rc]


def _pairs(names: Sequence[str]) -> list[tuple[str, str]]:
    return [(a, b) for i, a in enumerate(names) for b in names[i + 1 :]]


def forward_reports(
    space: Space, params, family: dict[str, np.ndarray], times: Sequence[float], model: str = "cell", evi: bool = True
) -> list[CheckReport]:
    """Pointwise CD plus the (ii), (iii) and EVI checks over all pairs of a family."""
    p = _as_params(params)
    reports = [check_pointwise_cd(space.gen, p, default_test_family(space.grid, p.m))]
    for a, b in _pairs(list(family)):
        exp = ContractionExperiment(space, family[a], family[b], p, times, model=model, name=f"{a}|{b}")
        reports += check_contraction_ii(exp) + check_contraction_iii(exp)
        if evi:
            reports += check_evi(exp)
    return reports


def equivalence_report(
    space: Space,
    params,
    family: dict[str, np.ndarray],
    times: Sequence[float],
    delta: float | None = None,
    kappa: float = 10.0,
    model: str = "cell",
) -> CheckReport:
    """Aggregate equivalence check.

    The forward direction runs :func:`forward_reports` at ``params``. The
    falsification direction strengthens to ``(R + delta, m)`` with
    ``delta = 0.5 |R*| + 0.1`` and to ``(R, m / kappa)``: for each, the
    pointwise test at zero tolerance must fail, and at least one contraction check must fail
    for at least one of the two. ``lhs`` counts violations; it passes at 0.
    """
    p = _as_params(params)
    forward = forward_reports(space, p, family, times, model)
    # high modes only add O(k^4 dx^2) noise to the ratio near their critical points
    r_star = estimate_best_R(space.gen, p.m, default_test_family(space.grid, p.m, max_mode=1))
    delta = 0.5 * abs(r_star) + 0.1 if delta is None else delta
    strong = {"R+delta": CurvatureParams(p.R + delta, p.m), "m/kappa": CurvatureParams(p.R, p.m / kappa)}
    falsified = {}
    for key, q in strong.items():
        # R* is the zero-tolerance threshold, so the strengthened pointwise test uses tol = 0
        cd = check_pointwise_cd(space.gen, q, default_test_family(space.grid, q.m), tol=0.0)
        contr = forward_reports(space, q, family, times, model, evi=True)[1:]
        failed = [r for r in contr if not r.passed]
        worst = min(contr, key=lambda r: r.margin + r.tol)
        falsified[key] = {
            "params": (q.R, q.m),
            "pointwise_fails": not cd.passed,
            "contraction_failures": len(failed),
            "worst": (worst.name, worst.anchor, worst.t, worst.margin, worst.tol),
        }
    forward_failures = sum(not r.passed for r in forward)
    violations = forward_failures
    violations += sum(not v["pointwise_fails"] for v in falsified.values())
    violations += 0 if any(v["contraction_failures"] for v in falsified.values()) else 1
    return CheckReport(
        "equivalence",
        "equivalence",
        violations,
        0.0,
        0.0,
        metadata={
            "R_star": r_star,
            "delta": delta,
            "kappa": kappa,
            "forward_checks": len(forward),
            "forward_failures": forward_failures,
            "falsification": falsified,
            "forward": forward,
        },
    )
