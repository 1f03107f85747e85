"""Check records shared by every verification routine, plus CSV serialization."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

CSV_COLUMNS = ("name", "anchor", "t", "LHS", "RHS", "margin", "tol", "pass")

# Equation tags a report anchor may carry.
KNOWN_ANCHORS = frozenset(
    {
        "CD-pointwise",
        "CD-weak",
        "CD-best-R",
        "contraction-ii",
        "contraction-iii",
        "two-time-EKS",
        "EVI",
        "EVI-integrated",
        "refinement-chain",
        "converse-first",
        "converse-second",
        "converse-third",
        "equivalence",
        "gradflow-convexity",
        "gradflow-contraction",
        "gradflow-converse",
        "entropy-energy",
        "log-sobolev",
        "fisher-decay",
        "fisher-differential",
        "de-bruijn",
        "metric-speed",
        "entropy-creation",
        "HWI",
        "HWI-regularization",
    }
)


@dataclass
class CheckReport:
    """Outcome of one inequality check.

    The checked inequality is always written ``lhs <= rhs`` so that
    ``margin = rhs - lhs`` is nonnegative when it holds. ``passed`` is
    ``margin >= -tol``. ``inconclusive`` marks limits whose numerical
    extrapolation did not settle; such reports never count as failures.
    """

    name: str
    anchor: str
    lhs: float
    rhs: float
    tol: float
    t: float | None = None
    metadata: dict[str, Any] = field(default_factory=dict)
    inconclusive: bool = False

    def __post_init__(self):
        if not self.anchor:
            raise ValueError("report anchor must be nonempty")
        self.lhs = float(self.lhs)
        self.rhs = float(self.rhs)
        self.tol = float(self.tol)

    @property
    def margin(self) -> float:
        if math.isinf(self.rhs) and self.rhs > 0 and not math.isinf(self.lhs):
            return math.inf
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return bool(self.margin >= -self.tol)

    def line(self) -> str:
        status = "INCONCLUSIVE" if self.inconclusive else ("PASS" if self.passed else "FAIL")
        t = "" if self.t is None else f" t={self.t:g}"
        return (
            f"[{status}] {self.name} ({self.anchor}){t}: "
            f"lhs={self.lhs:.6g} rhs={self.rhs:.6g} margin={self.margin:.3e} tol={self.tol:.3e}"
        )


def all_passed(reports: Iterable[CheckReport]) -> bool:
    return all(r.passed for r in reports)


def any_failed(reports: Iterable[CheckReport]) -> bool:
    return any(not r.passed and not r.inconclusive for r in reports)


def worst(reports: Sequence[CheckReport]) -> CheckReport:
    """Report with the smallest tolerance-normalized margin."""
    return min(reports, key=lambda r: r.margin + r.tol)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    return repr(float(x))


def report_rows(reports: Iterable[CheckReport]) -> list[list[str]]:
    return [
        [r.name, r.anchor, _fmt(r.t), _fmt(r.lhs), _fmt(r.rhs), _fmt(r.margin), _fmt(r.tol), _fmt(r.passed)]
        for r in reports
    ]


def reports_to_csv(reports: Iterable[CheckReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(report_rows(reports))
    return buf.getvalue()


def write_reports_csv(reports: Iterable[CheckReport], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(reports_to_csv(reports))


def read_reports_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
