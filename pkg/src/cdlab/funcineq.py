"""Functional inequalities implied by dimensional contraction.

Entropy-energy and log-Sobolev, Fisher information decay (closed form and
differential), de Bruijn, entropy creation, the metric-speed identity, the
dimensional HWI bound and the entropy regularization it yields.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Sequence

import numpy as np

from .functionals import de_bruijn_residual, entropy, fisher
from .grid import _as_params
from .harness import Space, equivalence_report, density_family, richardson
from .report import CheckReport
from .transport import w2

__all__ = [
    "GateError",
    "HWI_C_ANALYTIC",
    "require_gate",
    "check_entropy_energy",
    "check_log_sobolev",
    "fisher_decay_bound",
    "check_fisher_decay",
    "check_fisher_differential",
    "check_de_bruijn",
    "check_metric_speed",
    "check_entropy_creation",
    "check_hwi",
    "calibrate_hwi_constant",
    "check_hwi_regularization",
    "peaked_density",
]

# sinh(x)^4 >= e^{4x}/32 once 1 - e^{-2x} >= 2^{-1/4}
HWI_C_ANALYTIC = -2.0 * math.log(1.0 - 2.0**-0.25)


class GateError(RuntimeError):
    """The space failed the equivalence suite, so its functional checks are not trusted."""


def require_gate(space: Space, params, times=(0.1, 0.5, 1.0)) -> CheckReport:
    """Run the equivalence suite on the space's reference family; raise unless it passes."""
    rep = equivalence_report(space, params, density_family(space), times)
    if not rep.passed:
        raise GateError(f"equivalence suite failed for {params}: {rep.line()}")
    return rep


def _positive_R(p):
    if not p.R > 0:
        raise ValueError(f"this inequality needs R > 0, got R = {p.R}")


def _tol(space: Space, tol):
    return 5.0 * space.dx if tol is None else tol


def peaked_density(space: Space, centre: float, width: float, floor: float = 0.0) -> np.ndarray:
    """Normalized Gaussian bump (wrapped on circles) plus an optional floor."""
    x = space.grid.nodes
    d = x - centre
    if space.grid.is_circle:
        L = space.grid.length
        d = (d + 0.5 * L) % L - 0.5 * L
    return space.density(np.exp(-0.5 * (d / width) ** 2) + floor)


def check_entropy_energy(space: Space, params, f, tol: float | None = None) -> CheckReport:
    """``Ent(f) <= (m/2) log(1 + I(f) / (m R))``; ``m = inf`` gives ``I / (2R)``."""
    p = _as_params(params)
    _positive_R(p)
    f = space.density(f)
    ent = entropy(space.grid, f)
    info = fisher(space.gen, f)
    u = info * p.inv_m / p.R
    rhs = info / (2 * p.R) if p.inv_m == 0 else 0.5 * p.m * math.log1p(u)
    ls = info / (2 * p.R)
    return CheckReport(
        "entropy_energy", "entropy-energy", ent, rhs, _tol(space, tol),
        metadata={"R": p.R, "m": p.m, "I": info, "u": u, "log_sobolev_rhs": ls, "log_sobolev_margin": ls - ent},
    )


def check_log_sobolev(space: Space, params, f, tol: float | None = None) -> CheckReport:
    p = _as_params(params)
    _positive_R(p)
    f = space.density(f)
    info = fisher(space.gen, f)
    return CheckReport(
        "log_sobolev", "log-sobolev", entropy(space.grid, f), info / (2 * p.R), _tol(space, tol),
        metadata={"R": p.R, "I": info},
    )


def fisher_decay_bound(I0: float, R: float, m: float, t: float) -> float:
    """``m R I / (e^{2Rt}(I + m R) - I)`` with the ``m = inf`` limit ``e^{-2Rt} I``."""
    if math.isinf(m):
        return math.exp(-2 * R * t) * I0
    if I0 == 0:
        return 0.0
    return m * R * I0 / (math.exp(2 * R * t) * (I0 + m * R) - I0)


def check_fisher_decay(space: Space, params, f, times: Sequence[float], tol: float | None = None) -> list[CheckReport]:
    p = _as_params(params)
    _positive_R(p)
    f = space.density(f)
    I0 = fisher(space.gen, f)
    out = []
    for t in times:
        It = fisher(space.gen, space.evolve(f, t))
        out.append(
            CheckReport(
                "fisher_decay", "fisher-decay", It, fisher_decay_bound(I0, p.R, p.m, t), _tol(space, tol), t=t,
                metadata={"R": p.R, "m": p.m, "I0": I0},
            )
        )
    return out


def check_fisher_differential(
    space: Space, params, f, times: Sequence[float], h: float = 1e-3, tol: float | None = None
) -> list[CheckReport]:
    """``dI/dt + 2 R I + (2/m) I^2 <= 0`` with a central difference at each ``t > h``."""
    p = _as_params(params)
    f = space.density(f)
    tol = 5.0 * space.dx + 10.0 * h if tol is None else tol
    out = []
    for t in times:
        if t <= h:
            raise ValueError(f"time {t} too close to 0 for step {h}")
        Im, I0, Ip = (fisher(space.gen, space.evolve(f, t + k * h)) for k in (-1, 0, 1))
        deriv = (Ip - Im) / (2 * h)
        out.append(
            CheckReport(
                "fisher_differential", "fisher-differential", deriv + 2 * p.R * I0 + 2 * p.inv_m * I0**2, 0.0, tol, t=t,
                metadata={"R": p.R, "m": p.m, "I": I0, "dI": deriv},
            )
        )
    return out


def check_de_bruijn(space: Space, f, t: float, du: float | None = None, tol: float | None = None) -> CheckReport:
    """``|Ent(f) - Ent(P_t f) - int_0^t I(P_s f) ds|`` against ``5 dx + 5 du``."""
    f = space.density(f)
    du = t / 64 if du is None else du
    res = de_bruijn_residual(space.gen, space.spec, f, t, du)
    tol = 5.0 * space.dx + 5.0 * du if tol is None else tol
    return CheckReport("de_bruijn", "de-bruijn", res, 0.0, tol, t=t, metadata={"du": du})


def check_metric_speed(
    space: Space, f, t: float, deltas: Sequence[float] = (0.01, 0.005, 0.0025), tol: float | None = None, model: str = "cell"
) -> CheckReport:
    """``W2(P_{t+d} f, P_t f)^2 / d^2 -> I(P_t f)``: extrapolated in ``d``, reported as ``|gap| <= tol``."""
    if not t > 0:
        raise ValueError("the metric-speed identity is only tested at t > 0")
    f = space.density(f)
    ft = space.evolve(f, t)
    q = [w2(space.grid, space.evolve(f, t + d), ft, model) ** 2 / d**2 for d in deltas]
    speed, spread = richardson(q)
    info = fisher(space.gen, ft)
    tol = _tol(space, tol)
    return CheckReport(
        "metric_speed", "metric-speed", abs(speed - info), 0.0, tol, t=t,
        metadata={"speed_sq": speed, "I": info, "raw": q, "relative_gap": abs(speed - info) / max(info, 1e-300)},
        inconclusive=spread > 10 * tol,
    )


def check_entropy_creation(space: Space, params, f, times: Sequence[float], tol: float | None = None) -> list[CheckReport]:
    """``Ent(P_t f) <= (m/2) log(1 / (1 - e^{-2Rt}))``; the right side is infinite at ``t = 0``."""
    p = _as_params(params)
    _positive_R(p)
    f = space.density(f)
    out = []
    for t in times:
        rhs = math.inf if t == 0 else -0.5 * p.m * math.log(-math.expm1(-2 * p.R * t))
        out.append(
            CheckReport(
                "entropy_creation", "entropy-creation", entropy(space.grid, space.evolve(f, t)), rhs, _tol(space, tol), t=t,
                metadata={"R": p.R, "m": p.m},
            )
        )
    return out


def _check_flat_circle(space: Space):
    if not space.grid.is_circle or np.ptp(space.grid.potential) > 0 or not space.grid.normalized:
        raise ValueError("HWI checks need a normalized flat circle")


def check_hwi(space: Space, m: float, f, tol: float | None = None, model: str = "cell") -> CheckReport:
    """``sinh^2(Ent(f) / 2m) <= W2(f mu, mu) sqrt(I(f)) / (4m)`` on the flat circle."""
    _check_flat_circle(space)
    f = space.density(f)
    ent = entropy(space.grid, f)
    info = fisher(space.gen, f)
    tol = _tol(space, tol)
    if math.isinf(info):
        return CheckReport("hwi", "HWI", 0.0, 0.0, tol, metadata={"skipped": "infinite Fisher information"}, inconclusive=True)
    dist = w2(space.grid, f, np.ones(space.grid.n), model)
    return CheckReport(
        "hwi", "HWI", math.sinh(ent / (2 * m)) ** 2, dist * math.sqrt(info) / (4 * m), tol,
        metadata={"m": m, "Ent": ent, "I": info, "W2": dist},
    )


def _hwi_required_constant(space: Space, m: float, f, times, model: str) -> float:
    """Smallest ``C`` for which the regularization bound holds for ``f`` at ``times``."""
    w0 = w2(space.grid, f, np.ones(space.grid.n), model)
    need = 0.0
    for t in times:
        e = 2.0 * entropy(space.grid, space.evolve(f, t)) / m
        if w0 == 0 or e > math.log(w0**2 / (m * t)):
            need = max(need, e)
    return need


@lru_cache(maxsize=8)
def _calibrated(n: int, m: float, model: str) -> tuple[float, tuple]:
    from .harness import reference_space

    space = reference_space("circle", n)
    widths = (0.02, 0.05, 0.1, 0.2, 0.4, 0.8)
    times = (0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0)
    needs = tuple(_hwi_required_constant(space, m, peaked_density(space, 1.0, w), times, model) for w in widths)
    return max(needs), needs


def calibrate_hwi_constant(space: Space, m: float = 1.0, model: str = "cell") -> tuple[float, tuple]:
    """Constant ``C`` making the regularization bound hold on a reference sweep.

    The sweep uses Gaussian bumps of widths 0.02 to 0.8 on a flat circle with
    the same node count, at times from 1e-3 to 3. Returns the calibrated
    value and the per-width requirements; both are cached.
    """
    _check_flat_circle(space)
    return _calibrated(space.grid.n, float(m), model)


def check_hwi_regularization(
    space: Space, m: float, f, times: Sequence[float], C: float | None = None, tol: float | None = None, model: str = "cell"
) -> list[CheckReport]:
    """``Ent(P_t f) <= (m/2) max{C, log(W2(f mu, mu)^2 / (m t))}`` for ``t > 0``.

    ``metadata`` carries the constant used, whether it was calibrated, the
    analytic admissible value ``-2 log(1 - 2^{-1/4})`` and the distance
    monotonicity ``W2(P_t f, 1) <= W2(f, 1)`` used by the derivation.
    """
    _check_flat_circle(space)
    f = space.density(f)
    calibrated = C is None
    if calibrated:
        C, _ = calibrate_hwi_constant(space, m, model)
    tol = _tol(space, tol)
    one = np.ones(space.grid.n)
    w0 = w2(space.grid, f, one, model)
    out = []
    for t in times:
        if not t > 0:
            raise ValueError("regularization bound needs t > 0")
        ft = space.evolve(f, t)
        wt = w2(space.grid, ft, one, model)
        log_term = math.log(w0**2 / (m * t)) if w0 > 0 else -math.inf
        out.append(
            CheckReport(
                "hwi_regularization", "HWI-regularization", entropy(space.grid, ft), 0.5 * m * max(C, log_term), tol, t=t,
                metadata={
                    "C": C,
                    "calibrated": calibrated,
                    "C_analytic": HWI_C_ANALYTIC,
                    "log_regime": log_term > C,
                    "W2_t": wt,
                    "W2_0": w0,
                    "w2_monotone": wt <= w0 + 1e-8,
                },
            )
        )
    return out
