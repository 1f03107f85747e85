"""Command-line entry point: run configured experiments and write CSV reports.

Subcommands
-----------
``run CONFIG``      execute every experiment of an INI config
``report DIR``      summarize a finished run
``check-cd``        pointwise curvature-dimension test and best R on a reference space
``contract``        (ii)/(iii) contraction over the reference density family
``evi``             EVI over the reference density family
``gradflow``        convexity, contraction and converse checks for a quadratic potential
``func-ineq``       functional inequalities on a reference space

Functional-inequality experiments that expect to pass first require the
equivalence suite to pass for the same space and curvature.

Exit status: 0 all expectations met, 1 a check failed (or a falsification
experiment passed), 2 inconclusive, 3 configuration error. The environment
variable ``CDLAB_OUTPUT_DIR`` overrides the output directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import math
import os
import sys
from pathlib import Path
from typing import Callable

import numpy as np

from . import funcineq as fi
from . import gradflow as gf
from . import harness as hs
from .config import (
    ConfigError,
    CurvatureSpec,
    DensitySpec,
    ExperimentSpec,
    RunConfig,
    SpaceSpec,
    parse_config,
)
from .grid import CurvatureParams, build_grid, check_pointwise_cd, check_weak_cd, default_test_family, estimate_best_R
from .report import CheckReport, write_reports_csv

__all__ = ["ENV_OUTPUT", "EXIT_PASS", "EXIT_FAIL", "EXIT_INCONCLUSIVE", "EXIT_CONFIG", "run", "main"]

ENV_OUTPUT = "CDLAB_OUTPUT_DIR"
EXIT_PASS, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_CONFIG = 0, 1, 2, 3
REPORT_FILE = "reports.csv"
SUMMARY_FILE = "summary.json"


class Context:
    """Lazily built spaces and resolved densities for one run."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self._spaces: dict[str, hs.Space] = {}
        self._gates: dict[tuple[str, str], str | None] = {}
        self.calibration: dict[str, float] = {}

    def gate(self, space: str, curvature: str) -> None:
        """Raise :class:`GateError` unless the equivalence suite passes; cached per pair."""
        key = (space, curvature)
        if key not in self._gates:
            try:
                fi.require_gate(self.space(space), self.params(curvature))
                self._gates[key] = None
            except fi.GateError as exc:
                self._gates[key] = str(exc)
        if self._gates[key] is not None:
            raise fi.GateError(self._gates[key])

    def space(self, name: str) -> hs.Space:
        if name not in self._spaces:
            s = self.cfg.spaces[name]
            grid = build_grid(s.kind, s.n, s.domain, s.potential_fn(), s.normalize)
            self._spaces[name] = hs.Space.from_grid(grid)
        return self._spaces[name]

    def params(self, name: str) -> CurvatureParams:
        c = self.cfg.curvatures[name]
        return CurvatureParams(c.R, c.m)

    def raw(self, name: str, space: hs.Space) -> np.ndarray:
        return self.cfg.densities[name].values(space.grid, self.cfg.seed)

    def family(self, e: ExperimentSpec, space: hs.Space) -> dict[str, np.ndarray]:
        fam = {}
        for d in e.densities or ("reference",):
            if d == "reference":
                fam.update(hs.density_family(space))
            else:
                fam[d] = space.density(self.raw(d, space))
        return fam


def _pairs(e: ExperimentSpec, fam: dict) -> list[tuple[str, str]]:
    names = list(fam)
    if e.options.get("pairs", "all") == "consecutive":
        return list(zip(names[:-1], names[1:]))
    return list(itertools.combinations(names, 2))


def _opt(e: ExperimentSpec, key: str, default):
    return e.options.get(key, default)


def _tuple(v) -> tuple:
    return v if isinstance(v, tuple) else (v,)


def _experiment(ctx: Context, e: ExperimentSpec, sp: hs.Space, f, g, name: str, times=None) -> hs.ContractionExperiment:
    du = _opt(e, "du", None)
    return hs.ContractionExperiment(
        sp, f, g, ctx.params(e.curvature), e.times if times is None else times, du=du,
        model=_opt(e, "model", "cell"), c_dx=ctx.cfg.c_dx, c_du=ctx.cfg.c_du, name=name,
    )


def _with_tol(reports: list[CheckReport], tol: float | None) -> list[CheckReport]:
    if tol is not None:
        for r in reports:
            r.tol = tol
    return reports


def _h_pointwise(ctx, e):
    sp, p = ctx.space(e.space), ctx.params(e.curvature)
    fam = default_test_family(sp.grid, p.m, int(_opt(e, "max_mode", 4)))
    return [check_pointwise_cd(sp.gen, p, fam, tol=e.tol)]


def _h_weak(ctx, e):
    sp, p = ctx.space(e.space), ctx.params(e.curvature)
    f = ctx.raw(_opt(e, "test", "sin"), sp)
    return [check_weak_cd(sp.gen, p, f, g, tol=e.tol) for g in ctx.family(e, sp).values()]


def _h_best_r(ctx, e):
    sp, p = ctx.space(e.space), ctx.params(e.curvature)
    fam = default_test_family(sp.grid, p.m, int(_opt(e, "max_mode", 1)))
    r_star = estimate_best_R(sp.gen, p.m, fam)
    tol = 5.0 * sp.dx if e.tol is None else e.tol
    return [CheckReport("best_R", "CD-best-R", p.R, r_star, tol, metadata={"m": p.m, "n": sp.grid.n})]


def _contraction(which):
    def handler(ctx, e):
        sp = ctx.space(e.space)
        fam = ctx.family(e, sp)
        out = []
        for a, b in _pairs(e, fam):
            out += which(_experiment(ctx, e, sp, fam[a], fam[b], f"{a}|{b}"))
        return _with_tol(out, e.tol)

    return handler


def _h_evi(ctx, e):
    sp = ctx.space(e.space)
    fam = ctx.family(e, sp)
    h = _opt(e, "h", 1e-3)
    out = []
    for a, b in _pairs(e, fam):
        out += hs.check_evi(_experiment(ctx, e, sp, fam[a], fam[b], f"{a}|{b}"), h=h)
    return _with_tol(out, e.tol)


def _h_evi_integrated(ctx, e):
    sp = ctx.space(e.space)
    fam = ctx.family(e, sp)
    out = []
    for a, b in _pairs(e, fam):
        exp = _experiment(ctx, e, sp, fam[a], fam[b], f"{a}|{b}")
        out += [hs.check_evi_integrated(exp, t, h=_opt(e, "h", 1e-3)) for t in e.times if t > 0]
    return _with_tol(out, e.tol)


def _h_eks(ctx, e):
    sp, p = ctx.space(e.space), ctx.params(e.curvature)
    fam = ctx.family(e, sp)
    s, t = _opt(e, "s", 0.1), _opt(e, "t", 0.4)
    model = _opt(e, "model", "cell")
    return [
        dataclasses.replace(hs.check_two_time_eks(sp, fam[a], fam[b], s, t, p, e.tol, model), name=f"{a}|{b}")
        for a, b in _pairs(e, fam)
    ]


def _h_refinement(ctx, e):
    sp, p = ctx.space(e.space), ctx.params(e.curvature)
    fam = ctx.family(e, sp)
    levels = tuple(int(v) for v in _tuple(_opt(e, "n_refine", (1.0, 2.0, 4.0))))
    out = []
    for a, b in _pairs(e, fam):
        for t in e.times:
            out += hs.geodesic_refinement(sp, fam[a], fam[b], t, p, levels, model=_opt(e, "model", "cell"))
    return _with_tol(out, e.tol)


def _h_converse(ctx, e):
    sp, p = ctx.space(e.space), ctx.params(e.curvature)
    f = ctx.raw(_opt(e, "test", "sin"), sp)
    t = e.times[0] if e.times else _opt(e, "t", 0.3)
    out = []
    for name, g in ctx.family(e, sp).items():
        for r in hs.converse_estimates(sp, g, f, t, p, tuple(_tuple(_opt(e, "s_list", (0.02, 0.01, 0.005)))), tol=e.tol):
            r.name = f"{name}/{r.name}"
            out.append(r)
    return out


def _h_equivalence(ctx, e):
    sp = ctx.space(e.space)
    c = ctx.cfg.curvatures[e.curvature]
    rep = hs.equivalence_report(sp, ctx.params(e.curvature), ctx.family(e, sp), e.times, c.delta, c.kappa)
    rep.metadata.pop("forward", None)
    return [rep]


def _potential(e):
    return gf.quadratic(int(_opt(e, "dim", 2)), _opt(e, "scale", 1.0))


def _box(e, dim):
    lo, hi = _tuple(_opt(e, "box", (-0.5, 0.5)))
    return [[lo, hi]] * dim


def _h_gf_convexity(ctx, e):
    p = ctx.params(e.curvature)
    pot = _potential(e)
    return [
        gf.check_cd_convexity(
            pot, p.R, p.m, _box(e, pot.dim), int(_opt(e, "n_samples", 2000)), seed=ctx.cfg.seed, tol=e.tol
        )
    ]


def _h_gf_contraction(ctx, e):
    p = ctx.params(e.curvature)
    pot = _potential(e)
    return gf.check_flow_contraction(
        pot, p.R, p.m, _opt(e, "x0", (0.5, 0.5)), _opt(e, "y0", (-0.05, 0.0)), _opt(e, "T", 1.0),
        _opt(e, "dt", 1e-3), _opt(e, "du", None), e.times or None, e.tol, box=_box(e, pot.dim),
    )


def _h_gf_converse(ctx, e):
    p = ctx.params(e.curvature)
    pot = _potential(e)
    h = np.asarray(_opt(e, "direction", (0.6, 0.8)), dtype=float)
    return [
        gf.check_converse_taylor(
            pot, p.R, p.m, _opt(e, "point", (0.3, 0.2)), h / np.linalg.norm(h),
            tuple(_tuple(_opt(e, "eps", (0.04, 0.02, 0.01, 0.005)))), tol=e.tol or 1e-4,
        )
    ]


def _per_density(check: Callable):
    def handler(ctx, e):
        sp = ctx.space(e.space)
        out = []
        for name, f in ctx.family(e, sp).items():
            for r in check(ctx, e, sp, f):
                r.name = f"{name}/{r.name}"
                out.append(r)
        return out

    return handler


def _hwi_regularization(ctx, e, sp, f):
    p = ctx.params(e.curvature)
    C = _opt(e, "C", None)
    reps = fi.check_hwi_regularization(sp, p.m, f, e.times, C, e.tol)
    ctx.calibration["hwi_C"] = reps[0].metadata["C"] if reps else C
    ctx.calibration["hwi_C_analytic"] = fi.HWI_C_ANALYTIC
    return reps


# trusted only on spaces whose equivalence suite passes at the same (R, m)
GATED = frozenset(
    {
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
)

HANDLERS: dict[str, Callable] = {
    "pointwise-cd": _h_pointwise,
    "weak-cd": _h_weak,
    "best-r": _h_best_r,
    "contraction-ii": _contraction(hs.check_contraction_ii),
    "contraction-iii": _contraction(hs.check_contraction_iii),
    "two-time-eks": _h_eks,
    "evi": _h_evi,
    "evi-integrated": _h_evi_integrated,
    "refinement": _h_refinement,
    "converse": _h_converse,
    "equivalence": _h_equivalence,
    "gradflow-convexity": _h_gf_convexity,
    "gradflow-contraction": _h_gf_contraction,
    "gradflow-converse": _h_gf_converse,
    "entropy-energy": _per_density(lambda c, e, sp, f: [fi.check_entropy_energy(sp, c.params(e.curvature), f, e.tol)]),
    "log-sobolev": _per_density(lambda c, e, sp, f: [fi.check_log_sobolev(sp, c.params(e.curvature), f, e.tol)]),
    "fisher-decay": _per_density(lambda c, e, sp, f: fi.check_fisher_decay(sp, c.params(e.curvature), f, e.times, e.tol)),
    "fisher-differential": _per_density(
        lambda c, e, sp, f: fi.check_fisher_differential(sp, c.params(e.curvature), f, e.times, tol=e.tol)
    ),
    "de-bruijn": _per_density(lambda c, e, sp, f: [fi.check_de_bruijn(sp, f, t, _opt(e, "du", None), e.tol) for t in e.times]),
    "metric-speed": _per_density(lambda c, e, sp, f: [fi.check_metric_speed(sp, f, t, tol=e.tol) for t in e.times]),
    "entropy-creation": _per_density(
        lambda c, e, sp, f: fi.check_entropy_creation(sp, c.params(e.curvature), f, e.times, e.tol)
    ),
    "hwi": _per_density(lambda c, e, sp, f: [fi.check_hwi(sp, c.params(e.curvature).m, f, e.tol)]),
    "hwi-regularization": _per_density(_hwi_regularization),
}


def _status(e: ExperimentSpec, reports: list[CheckReport]) -> str:
    failed = any(not r.passed and not r.inconclusive for r in reports)
    if e.expect == "fail":
        return "ok" if failed else "unexpected-pass"
    if failed:
        return "fail"
    if any(r.inconclusive for r in reports):
        return "inconclusive"
    return "ok"


def output_dir(cfg: RunConfig, override=None) -> Path:
    if override is not None:
        return Path(override)
    env = os.environ.get(ENV_OUTPUT)
    return Path(env) if env else Path(cfg.output)


def run(cfg: RunConfig, out=None, echo: bool = False) -> int:
    """Execute all experiments in declaration order; write ``reports.csv`` and ``summary.json``."""
    ctx = Context(cfg)
    all_reports: list[CheckReport] = []
    experiments = []
    for e in cfg.experiments:
        try:
            if e.check in GATED and e.expect == "pass":
                ctx.gate(e.space, e.curvature)
            reports = HANDLERS[e.check](ctx, e)
            error = None
        except (ValueError, ArithmeticError, RuntimeError) as exc:
            reports, error = [], f"{type(exc).__name__}: {exc}"
        for r in reports:
            r.name = f"{e.name}/{r.name}"
        status = "error" if error else _status(e, reports)
        experiments.append(
            {
                "name": e.name,
                "check": e.check,
                "expect": e.expect,
                "checks": len(reports),
                "failed": sum(not r.passed and not r.inconclusive for r in reports),
                "inconclusive": sum(r.inconclusive for r in reports),
                "status": status,
                "error": error,
            }
        )
        all_reports += reports
        if echo:
            print(f"{e.name}: {status}" + (f" ({error})" if error else ""))
    statuses = [x["status"] for x in experiments]
    if any(s in ("fail", "unexpected-pass", "error") for s in statuses):
        code = EXIT_FAIL
    elif "inconclusive" in statuses:
        code = EXIT_INCONCLUSIVE
    else:
        code = EXIT_PASS
    target = output_dir(cfg, out)
    target.mkdir(parents=True, exist_ok=True)
    write_reports_csv(all_reports, target / REPORT_FILE)
    summary = {
        "source": cfg.source,
        "seed": cfg.seed,
        "total_checks": len(all_reports),
        "passed": sum(r.passed for r in all_reports),
        "failed": sum(not r.passed and not r.inconclusive for r in all_reports),
        "inconclusive": sum(r.inconclusive for r in all_reports),
        "experiments": experiments,
        "calibration": ctx.calibration,
        "exit_status": code,
    }
    (target / SUMMARY_FILE).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return code


def report(directory) -> int:
    directory = Path(directory)
    summary_path = directory / SUMMARY_FILE
    if not summary_path.is_file():
        print(f"no {SUMMARY_FILE} in {directory}", file=sys.stderr)
        return EXIT_CONFIG
    summary = json.loads(summary_path.read_text())
    for e in summary["experiments"]:
        print(f"{e['status']:>16}  {e['name']} [{e['check']}] checks={e['checks']} failed={e['failed']}")
    print(
        f"total={summary['total_checks']} passed={summary['passed']} failed={summary['failed']} "
        f"inconclusive={summary['inconclusive']} exit={summary['exit_status']}"
    )
    for k, v in sorted(summary.get("calibration", {}).items()):
        print(f"{k} = {v!r}")
    return int(summary["exit_status"])


def _reference_config(space: str, n: int, R: float, m: float, checks, times=(0.1, 0.5, 1.0), **options) -> RunConfig:
    if space == "circle":
        spec = SpaceSpec("ref", "circle", n, (0.0, 2 * math.pi))
    else:
        spec = SpaceSpec("ref", "interval", n, (-0.5, 0.5), "quadratic")
    exps = [
        ExperimentSpec(c, c, "ref", "claim", ("reference",), tuple(times), options=dict(options.get(c, {})))
        for c in checks
    ]
    return RunConfig(
        spaces={"ref": spec},
        curvatures={"claim": CurvatureSpec("claim", R, m)},
        densities={"sin": DensitySpec("sin", "fourier", {"offset": 0.0, "amp": 1.0, "phase": math.pi / 2})},
        experiments=exps,
        source="<command line>",
    )


def _inflate(cfg: RunConfig, dR: float) -> RunConfig:
    cfg.curvatures = {k: dataclasses.replace(c, R=c.R + dR) for k, c in cfg.curvatures.items()}
    return cfg


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cdlab", description="Curvature-dimension and Wasserstein contraction checks.")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="execute a config file")
    p.add_argument("config")
    p.add_argument("--output", default=None)
    p.add_argument("--inflate-R", type=float, default=0.0, help="add this to every curvature R")
    p = sub.add_parser("report", help="summarize a finished run")
    p.add_argument("directory")
    for name in ("check-cd", "contract", "evi", "func-ineq"):
        p = sub.add_parser(name)
        p.add_argument("--space", choices=("circle", "interval"), default="circle")
        p.add_argument("--n", type=int, default=256)
        p.add_argument("--R", type=float, default=None)
        p.add_argument("--m", type=float, default=None)
        p.add_argument("--times", type=float, nargs="+", default=[0.1, 0.5, 1.0])
        p.add_argument("--output", default=None)
    p = sub.add_parser("gradflow")
    p.add_argument("--R", type=float, default=0.5)
    p.add_argument("--m", type=float, default=2.0)
    p.add_argument("--output", default=None)
    return ap


def _defaults(args):
    R = args.R if args.R is not None else (0.0 if args.space == "circle" else 0.7)
    m = args.m if args.m is not None else (1.0 if args.space == "circle" else 2.0)
    return R, m


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "report":
            return report(args.directory)
        if args.command == "run":
            cfg = _inflate(parse_config(args.config), args.inflate_R)
        elif args.command == "gradflow":
            cfg = RunConfig(
                curvatures={"claim": CurvatureSpec("claim", args.R, args.m)},
                experiments=[ExperimentSpec(c, c, curvature="claim") for c in sorted(gf_checks())],
                source="<command line>",
            )
        else:
            R, m = _defaults(args)
            checks = {
                "check-cd": ("pointwise-cd", "best-r"),
                "contract": ("contraction-ii", "contraction-iii"),
                "evi": ("evi",),
                "func-ineq": _funcineq_checks(args.space, R),
            }[args.command]
            # peaked densities have a fast Fisher transient; resolve it in time
            opts = {"de-bruijn": {"du": 0.00025}} if args.command == "func-ineq" else {}
            cfg = _reference_config(args.space, args.n, R, m, checks, args.times, **opts)
    except ConfigError as exc:
        for line in exc.errors:
            print(f"config error: {line}", file=sys.stderr)
        return EXIT_CONFIG
    code = run(cfg, args.output, echo=True)
    print(f"exit status {code}; reports in {output_dir(cfg, args.output)}")
    return code


def gf_checks():
    from .config import GRADFLOW_CHECKS

    return GRADFLOW_CHECKS


def _funcineq_checks(space: str, R: float) -> tuple[str, ...]:
    checks = ["de-bruijn", "metric-speed", "fisher-differential"]
    if R > 0:
        checks += ["entropy-energy", "log-sobolev", "fisher-decay", "entropy-creation"]
    if space == "circle":
        checks += ["hwi", "hwi-regularization"]
    return tuple(checks)


if __name__ == "__main__":
    sys.exit(main())
