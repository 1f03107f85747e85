"""Run configuration: INI files with space, curvature, density and experiment sections.

Example::

    [run]
    seed = 0
    output = reports

    [space.circle]
    kind = circle
    n = 256

    [curvature.flat]
    R = 0
    m = 1

    [density.sin]
    profile = fourier
    amp = 0.5
    phase = 1.5707963267948966

    [experiment.contract]
    check = contraction-iii
    space = circle
    curvature = flat
    densities = sin, uniform
    times = 0.1, 0.5, 1.0

Density profiles are written in the normalized angle
``theta = 2 pi (x - a) / (b - a)`` (or the fraction ``(x - a) / (b - a)`` for
positions and widths), so one density section can be used on any space.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "CHECKS",
    "GRADFLOW_CHECKS",
    "ConfigError",
    "SpaceSpec",
    "CurvatureSpec",
    "DensitySpec",
    "ExperimentSpec",
    "RunConfig",
    "parse_config",
    "parse_config_string",
]

GRADFLOW_CHECKS = frozenset({"gradflow-convexity", "gradflow-contraction", "gradflow-converse"})

CHECKS = frozenset(
    {
        "pointwise-cd",
        "weak-cd",
        "best-r",
        "contraction-ii",
        "contraction-iii",
        "two-time-eks",
        "evi",
        "evi-integrated",
        "refinement",
        "converse",
        "equivalence",
        "entropy-energy",
        "log-sobolev",
        "fisher-decay",
        "fisher-differential",
        "de-bruijn",
        "metric-speed",
        "entropy-creation",
        "hwi",
        "hwi-regularization",
    }
    | GRADFLOW_CHECKS
)

PROFILES = frozenset({"uniform", "fourier", "bump", "vonmises", "random", "node"})
POTENTIALS = ("zero", "quadratic")


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass(frozen=True)
class SpaceSpec:
    name: str
    kind: str
    n: int
    domain: tuple[float, float]
    potential: str | tuple[float, ...] = "zero"
    normalize: bool = True

    def potential_fn(self):
        if self.potential == "zero":
            return None
        if self.potential == "quadratic":
            return lambda x: 0.5 * np.asarray(x) ** 2
        coef = np.asarray(self.potential, dtype=float)
        return lambda x: np.polynomial.polynomial.polyval(np.asarray(x), coef)


@dataclass(frozen=True)
class CurvatureSpec:
    name: str
    R: float
    m: float = math.inf
    delta: float | None = None
    kappa: float = 10.0


@dataclass(frozen=True)
class DensitySpec:
    name: str
    profile: str
    params: dict = field(default_factory=dict)

    def values(self, grid, seed: int = 0) -> np.ndarray:
        a, b = grid.domain
        frac = (grid.nodes - a) / (b - a)
        th = 2 * math.pi * frac
        p = self.params
        if self.profile == "uniform":
            return np.ones(grid.n)
        if self.profile == "fourier":
            return p.get("offset", 1.0) + p.get("amp", 0.5) * np.cos(p.get("k", 1.0) * th - p.get("phase", 0.0))
        if self.profile == "bump":
            d = frac - p.get("centre", 0.5)
            if grid.is_circle:
                d = (d + 0.5) % 1.0 - 0.5
            return np.exp(-0.5 * (d / p.get("width", 0.05)) ** 2) + p.get("floor", 0.0)
        if self.profile == "vonmises":
            return np.exp(p.get("kappa", 2.0) * np.cos(th - 2 * math.pi * p.get("centre", 0.0)))
        if self.profile == "node":
            v = np.zeros(grid.n)
            v[min(int(p.get("centre", 0.5) * grid.n), grid.n - 1)] = 1.0
            return v
        if self.profile == "random":
            rng = np.random.default_rng([int(seed), int(p.get("seed", 0))])
            modes = int(p.get("modes", 4))
            field_ = np.zeros(grid.n)
            for k in range(1, modes + 1):
                c, s = rng.normal(size=2) * p.get("amp", 0.5) / k
                field_ += c * np.cos(k * th) + s * np.sin(k * th)
            return np.exp(field_)
        raise ValueError(f"unknown profile {self.profile!r}")


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    check: str
    space: str | None = None
    curvature: str | None = None
    densities: tuple[str, ...] = ()
    times: tuple[float, ...] = ()
    expect: str = "pass"
    tol: float | None = None
    options: dict = field(default_factory=dict)


@dataclass
class RunConfig:
    seed: int = 0
    output: str = "reports"
    c_dx: float = 5.0
    c_du: float = 5.0
    spaces: dict[str, SpaceSpec] = field(default_factory=dict)
    curvatures: dict[str, CurvatureSpec] = field(default_factory=dict)
    densities: dict[str, DensitySpec] = field(default_factory=dict)
    experiments: list[ExperimentSpec] = field(default_factory=list)
    source: str | None = None


def _float(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    if t == "pi":
        return math.pi
    if t == "2pi":
        return 2 * math.pi
    return float(t)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(_float(v) for v in text.split(",") if v.strip())


def _names(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


_EXPERIMENT_KEYS = {"check", "space", "curvature", "densities", "times", "expect", "tol"}


def _parse(cp: configparser.ConfigParser, source: str | None) -> RunConfig:
    errors: list[str] = []
    cfg = RunConfig(source=source)

    def get(section, key, conv, default=None, required=False):
        if key not in cp[section]:
            if required:
                errors.append(f"[{section}] missing required key '{key}'")
            return default
        raw = cp[section][key]
        try:
            return conv(raw)
        except (ValueError, TypeError):
            errors.append(f"[{section}] {key} = {raw!r} is not a valid {getattr(conv, '__name__', 'value').lstrip('_')}")
            return default

    if cp.has_section("run"):
        cfg.seed = get("run", "seed", int, 0)
        cfg.output = cp["run"].get("output", "reports")
        cfg.c_dx = get("run", "c_dx", _float, 5.0)
        cfg.c_du = get("run", "c_du", _float, 5.0)

    for sec in cp.sections():
        if sec == "run":
            continue
        kind, _, name = sec.partition(".")
        if not name:
            errors.append(f"[{sec}] section names must look like 'space.NAME', 'experiment.NAME', ...")
            continue
        if kind == "space":
            k = cp[sec].get("kind", "")
            if k not in ("circle", "interval"):
                errors.append(f"[{sec}] kind = {k!r} must be 'circle' or 'interval'")
            n = get(sec, "n", int, None, required=True)
            if n is not None and n < 8:
                errors.append(f"[{sec}] n = {n} must be at least 8")
            default_dom = "0, 2pi" if k == "circle" else "-0.5, 0.5"
            try:
                dom = _floats(cp[sec].get("domain", default_dom))
            except ValueError:
                dom = ()
            if len(dom) != 2 or not dom[1] > dom[0]:
                errors.append(f"[{sec}] domain must be 'a, b' with a < b")
                dom = (0.0, 1.0)
            pot_raw = cp[sec].get("potential", "zero").strip()
            if pot_raw in POTENTIALS:
                pot = pot_raw
            else:
                try:
                    pot = _floats(pot_raw)
                except ValueError:
                    errors.append(f"[{sec}] potential = {pot_raw!r} must be 'zero', 'quadratic' or a coefficient list")
                    pot = "zero"
            norm = True
            try:
                norm = cp[sec].getboolean("normalize", True)
            except ValueError:
                errors.append(f"[{sec}] normalize must be a boolean")
            cfg.spaces[name] = SpaceSpec(name, k, n or 0, tuple(dom), pot, norm)
        elif kind == "curvature":
            R = get(sec, "R", _float, 0.0, required=True)
            m = get(sec, "m", _float, math.inf)
            if m is not None and not m > 0:
                errors.append(f"[{sec}] m = {m} must be positive")
            delta_raw = cp[sec].get("delta", "auto").strip()
            delta = None if delta_raw == "auto" else get(sec, "delta", _float)
            kappa = get(sec, "kappa", _float, 10.0)
            cfg.curvatures[name] = CurvatureSpec(name, R, m, delta, kappa)
        elif kind == "density":
            prof = cp[sec].get("profile", "")
            if prof not in PROFILES:
                errors.append(f"[{sec}] profile = {prof!r} is not one of {sorted(PROFILES)}")
            params = {}
            for key in cp[sec]:
                if key == "profile":
                    continue
                params[key] = get(sec, key, _float)
            cfg.densities[name] = DensitySpec(name, prof, params)
        elif kind == "experiment":
            check = cp[sec].get("check", "")
            if check not in CHECKS:
                errors.append(f"[{sec}] check = {check!r} is not a known check name")
            expect = cp[sec].get("expect", "pass")
            if expect not in ("pass", "fail"):
                errors.append(f"[{sec}] expect = {expect!r} must be 'pass' or 'fail'")
            tol = get(sec, "tol", _float)
            if tol is not None and not tol > 0:
                errors.append(f"[{sec}] tol = {tol} must be positive")
            times = get(sec, "times", _floats, ())
            if times and (any(t < 0 for t in times) or list(times) != sorted(times)):
                errors.append(f"[{sec}] times must be sorted and nonnegative")
            options = {}
            for key in cp[sec]:
                if key in _EXPERIMENT_KEYS:
                    continue
                raw = cp[sec][key]
                try:
                    vals = _floats(raw)
                    options[key] = vals[0] if len(vals) == 1 else vals
                except ValueError:
                    options[key] = raw.strip()
            cfg.experiments.append(
                ExperimentSpec(
                    name,
                    check,
                    cp[sec].get("space"),
                    cp[sec].get("curvature"),
                    _names(cp[sec].get("densities", "")),
                    times or (),
                    expect,
                    tol,
                    options,
                )
            )
        else:
            errors.append(f"[{sec}] unknown section type '{kind}'")

    for e in cfg.experiments:
        where = f"[experiment.{e.name}]"
        if e.check in GRADFLOW_CHECKS:
            if e.curvature is None:
                errors.append(f"{where} gradflow checks need a curvature")
        else:
            if e.space is None:
                errors.append(f"{where} missing required key 'space'")
            elif e.space not in cfg.spaces:
                errors.append(f"{where} space = {e.space!r} is not declared")
        if e.curvature is not None and e.curvature not in cfg.curvatures:
            errors.append(f"{where} curvature = {e.curvature!r} is not declared")
        for d in e.densities:
            if d != "reference" and d not in cfg.densities:
                errors.append(f"{where} density {d!r} is not declared")
        test = e.options.get("test")
        if isinstance(test, str) and test not in cfg.densities:
            errors.append(f"{where} test function {test!r} is not declared")
    if errors:
        raise ConfigError(errors)
    return cfg


def parse_config_string(text: str, source: str | None = None) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"malformed config: {exc}"]) from None
    return _parse(cp, source)


def parse_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config file {str(path)!r} does not exist"])
    return parse_config_string(path.read_text(), str(path))
