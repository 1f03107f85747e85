"""Euclidean gradient flows ``dX/dt = -grad F(X)`` and their (R, m)-convexity.

Finite-dimensional counterpart of the curvature-dimension machinery: the
convexity test ``phi'' >= R |h|^2 + phi'^2 / m`` along lines
``phi(s) = F(x + s h)``, the flow contraction it implies, and the converse
obtained from a Taylor expansion at small separations.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import simpson

from .harness import richardson
from .report import CheckReport

__all__ = [
    "DivergenceError",
    "PotentialSpec",
    "Trajectory",
    "quadratic",
    "double_well",
    "flow_rk4",
    "check_cd_convexity",
    "check_flow_contraction",
    "check_converse_taylor",
    "write_trajectory_csv",
]


class DivergenceError(RuntimeError):
    """A trajectory left the configured bound."""


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Potential ``F`` on ``R^d``; the gradient defaults to central differences with step ``h_g``."""

    dim: int
    F: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray] | None = None
    h_g: float = 1e-6

    def value(self, x) -> float:
        return float(self.F(np.asarray(x, dtype=float)))

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.grad is not None:
            return np.asarray(self.grad(x), dtype=float)
        return self.fd_gradient(x)

    def fd_gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        e = np.eye(self.dim) * self.h_g
        return np.array([(self.F(x + e[k]) - self.F(x - e[k])) / (2 * self.h_g) for k in range(self.dim)])

    def gradient_residual(self, points) -> float:
        """``max |grad F - FD(F)|`` over sample points; consistent when at most ``10 h_g``."""
        return max(float(np.abs(self.gradient(p) - self.fd_gradient(p)).max()) for p in np.atleast_2d(points))


def quadratic(dim: int = 2, scale: float = 1.0) -> PotentialSpec:
    """``F(x) = scale |x|^2 / 2``."""
    return PotentialSpec(dim, lambda x: 0.5 * scale * float(x @ x), lambda x: scale * np.asarray(x, dtype=float))


def double_well() -> PotentialSpec:
    """``F(x) = (x^2 - 1)^2 / 4`` in one dimension."""
    return PotentialSpec(1, lambda x: 0.25 * float((x[0] ** 2 - 1) ** 2), lambda x: np.array([x[0] * (x[0] ** 2 - 1)]))


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    values: np.ndarray
    dt: float
    scheme: str = "rk4"
    metadata: dict = field(default_factory=dict)

    def at(self, t: float) -> np.ndarray:
        """State at a grid time (nearest step)."""
        return self.states[int(round(t / self.dt))]


def flow_rk4(pot: PotentialSpec, x0, T: float, dt: float, bound: float = 1e6) -> Trajectory:
    """Classical Runge-Kutta integration of the gradient flow on ``[0, T]``.

    The step is adjusted to divide ``T`` exactly. ``metadata["max_energy_increase"]``
    records the largest step-to-step increase of ``F`` (nonpositive for a stable step).
    """
    if not dt > 0 or T < dt:
        raise ValueError("need dt > 0 and T >= dt")
    steps = int(math.ceil(T / dt - 1e-9))
    dt = T / steps
    x = np.array(x0, dtype=float).reshape(pot.dim)
    states = np.empty((steps + 1, pot.dim))
    states[0] = x

    def v(y):
        return -pot.gradient(y)

    for k in range(steps):
        k1 = v(x)
        k2 = v(x + 0.5 * dt * k1)
        k3 = v(x + 0.5 * dt * k2)
        k4 = v(x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > bound:
            raise DivergenceError(f"trajectory left |x| <= {bound:g} at t = {(k + 1) * dt:.6g}")
        states[k + 1] = x
    values = np.array([pot.value(s) for s in states])
    times = np.linspace(0.0, T, steps + 1)
    inc = float(np.max(np.diff(values), initial=-math.inf))
    return Trajectory(times, states, values, dt, metadata={"max_energy_increase": inc})


def write_trajectory_csv(traj: Trajectory, path) -> None:
    d = traj.states.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x{k + 1}" for k in range(d)] + ["F"])
        for t, x, F in zip(traj.times, traj.states, traj.values):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in x] + [repr(float(F))])


def _line_derivatives(pot: PotentialSpec, x, h, step: float):
    f0 = pot.value(x)
    fp = pot.value(x + step * h)
    fm = pot.value(x - step * h)
    return (fp - fm) / (2 * step), (fp - 2 * f0 + fm) / step**2


def _inv(m: float) -> float:
    if not m > 0:
        raise ValueError("m must be positive")
    return 0.0 if math.isinf(m) else 1.0 / m


def check_cd_convexity(
    pot: PotentialSpec,
    R: float,
    m: float,
    box,
    n_samples: int = 2000,
    h: float = 1e-4,
    seed: int = 0,
    tol: float | None = None,
    extra_points: Sequence | None = None,
) -> CheckReport:
    """Sampled test of ``phi''(0) >= R |h|^2 + phi'(0)^2 / m`` for ``phi(s) = F(x + s h)``.

    Points are uniform in the box and directions uniform on the unit sphere;
    the derivatives are central differences with step ``h``. The report
    carries the worst sample and its witness ``(x, h)``.
    """
    inv_m = _inv(m)
    box = np.asarray(box, dtype=float).reshape(pot.dim, 2)
    rng = np.random.default_rng(seed)
    xs = box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random((n_samples, pot.dim))
    if extra_points is not None:
        xs = np.vstack([np.atleast_2d(np.asarray(extra_points, dtype=float)), xs])
    dirs = rng.normal(size=(xs.shape[0], pot.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    tol = 10.0 * h if tol is None else tol
    worst = None
    for x, d in zip(xs, dirs):
        d1, d2 = _line_derivatives(pot, x, d, h)
        low = R * float(d @ d) + inv_m * d1 * d1
        if worst is None or d2 - low < worst[0]:
            worst = (d2 - low, low, d2, x, d)
    _, low, high, x, d = worst
    return CheckReport(
        "cd_convexity",
        "gradflow-convexity",
        low,
        high,
        tol,
        metadata={"R": R, "m": m, "x": tuple(map(float, x)), "h": tuple(map(float, d)), "samples": xs.shape[0]},
    )


def check_flow_contraction(
    pot: PotentialSpec,
    R: float,
    m: float,
    x0,
    y0,
    T: float,
    dt: float = 1e-3,
    du: float | None = None,
    times: Sequence[float] | None = None,
    tol: float | None = None,
    box=None,
) -> list[CheckReport]:
    """``|X_t - Y_t|^2 <= e^{-2Rt}|X_0 - Y_0|^2 - (2/m) int_0^t e^{-2R(t-u)} (F(X_u) - F(Y_u))^2 du``.

    Simpson quadrature uses every ``round(du / dt)``-th integrator step.
    When ``box`` is given, both trajectories must stay inside it.
    """
    inv_m = _inv(m)
    X = flow_rk4(pot, x0, T, dt)
    Y = flow_rk4(pot, y0, T, dt)
    dt = X.dt
    du = 10 * dt if du is None else du
    stride = max(1, int(round(du / dt)))
    du = stride * dt
    if box is not None:
        b = np.asarray(box, dtype=float).reshape(pot.dim, 2)
        for traj in (X, Y):
            if np.any(traj.states < b[:, 0] - 1e-12) or np.any(traj.states > b[:, 1] + 1e-12):
                raise ValueError("trajectory leaves the convexity box")
    tol = 10 * dt + 5 * du if tol is None else tol
    times = np.linspace(0, T, 5)[1:] if times is None else np.asarray(times, dtype=float)
    gap = (X.values - Y.values) ** 2
    d0 = float(np.sum((X.states[0] - Y.states[0]) ** 2))
    out = []
    for t in times:
        it = int(round(t / dt))
        idx = np.arange(0, it + 1, stride)
        if idx[-1] != it:
            idx = np.append(idx, it)
        u = X.times[idx]
        t_exact = X.times[it]
        integral = float(simpson(np.exp(-2 * R * (t_exact - u)) * gap[idx], x=u)) if it > 0 else 0.0
        lhs = float(np.sum((X.states[it] - Y.states[it]) ** 2))
        rhs = math.exp(-2 * R * t_exact) * d0 - 2 * inv_m * integral
        out.append(
            CheckReport(
                "flow_contraction", "gradflow-contraction", lhs, rhs, tol, t=float(t_exact),
                metadata={"R": R, "m": m, "dt": dt, "du": du, "integral": integral},
            )
        )
    return out


def check_converse_taylor(
    pot: PotentialSpec,
    R: float,
    m: float,
    x,
    h,
    eps_list: Sequence[float] = (0.04, 0.02, 0.01, 0.005),
    tol: float = 1e-4,
    fd_step: float = 1e-4,
) -> CheckReport:
    """Small-separation converse of the flow contraction.

    At ``X_0 = x`` and ``Y_0 = x + eps h`` the time derivative of the
    contraction at ``t = 0`` gives
    ``-(X_0 - Y_0).(grad F(X_0) - grad F(Y_0)) <= -R |X_0 - Y_0|^2 - (F(X_0) - F(Y_0))^2 / m``.
    Its margin divided by ``eps^2`` tends to ``phi'' - R |h|^2 - phi'^2 / m``
    at ``s = 0``; the limit is Richardson-extrapolated over ``eps_list``
    (halving) and reported as ``rhs - lhs``. The direct margin at the
    smallest ``eps`` and the finite-difference value of the limit go into the
    metadata.
    """
    inv_m = _inv(m)
    eps = np.asarray(eps_list, dtype=float)
    if np.any(np.diff(eps) >= 0):
        raise ValueError("eps_list must decrease")
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    gx = pot.gradient(x)
    Fx = pot.value(x)
    q, direct = [], []
    for e in eps:
        y = x + e * h
        lhs = -float((x - y) @ (gx - pot.gradient(y)))
        rhs = -R * float((x - y) @ (x - y)) - inv_m * (Fx - pot.value(y)) ** 2
        direct.append(rhs - lhs)
        q.append((rhs - lhs) / e**2)
    limit, spread = richardson(q)
    d1, d2 = _line_derivatives(pot, x, h, fd_step)
    low = R * float(h @ h) + inv_m * d1 * d1
    closed = d2 - low
    return CheckReport(
        "converse_taylor",
        "gradflow-converse",
        low,
        low + limit,
        tol,
        metadata={
            "R": R,
            "m": m,
            "direct_margin": direct[-1],
            "direct_holds": bool(direct[-1] >= -tol * eps[-1] ** 2),
            "fd_margin": closed,
            "match": abs(limit - closed),
            "x": tuple(map(float, x)),
            "h": tuple(map(float, h)),
        },
        inconclusive=spread > 10 * tol,
    )
