"""Rate sweeps, regression of the eps*log(1/eps) coefficient and bound checks.

The fitted model is ``gap / eps = C * log(1/eps) + b`` where
``gap = MOT_eps - MOT_0``; both values are computed on the same grid.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .analysis import KappaEstimate, kappa_estimate, sample_points
from .config import DEFAULT_SLACK, DEFAULT_WINDOW, Problem, RunConfig, build_problem
from .entropic import eps_scaling_solve
from .errors import InvariantViolation
from .exact import LPSolution, lp_solve

log = logging.getLogger(__name__)

CSV_HEADER = ["epsilon", "mot_eps", "mot_0", "gap", "sweeps", "marginal_error"]
TABLE_TOL = 1e-7


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class RateRow:
    epsilon: float
    mot_eps: float
    mot_0: float
    gap: float
    sweeps: int
    marginal_error: float
    converged: bool = True


@dataclass(frozen=True)
class RateTable:
    rows: tuple
    cost_scale: float = 1.0
    tolerance: float = 1e-9

    def __post_init__(self):
        rows = tuple(sorted(self.rows, key=lambda r: -r.epsilon))
        object.__setattr__(self, "rows", rows)
        good = [r for r in rows if r.converged]
        for r in good:
            if r.gap < -TABLE_TOL:
                raise InvariantViolation(
                    f"MOT_eps below MOT_0 by {-r.gap:.3g} at epsilon={r.epsilon:g}"
                )
        for a, b in zip(good, good[1:]):
            if b.gap > a.gap + TABLE_TOL:
                raise InvariantViolation(
                    f"gap increases from {a.gap:.6g} to {b.gap:.6g} as epsilon "
                    f"decreases {a.epsilon:g} -> {b.epsilon:g}"
                )

    @property
    def epsilons(self) -> np.ndarray:
        return np.array([r.epsilon for r in self.rows])

    @property
    def gaps(self) -> np.ndarray:
        return np.array([r.gap for r in self.rows])


@dataclass(frozen=True)
class RateFit:
    C: float
    b: float
    residual_rms: float
    eps_window: tuple
    n_rows: int
    epsilons_used: tuple = field(default=())


@dataclass(frozen=True)
class BoundCheck:
    C: float
    lower_bound: float
    upper_bound: float
    slack: float
    lower_ok: bool
    upper_ok: bool
    matching: bool

    @property
    def passed(self) -> bool:
        return self.lower_ok and self.upper_ok


def rate_sweep(config: RunConfig, problem: Problem | None = None,
               lp: LPSolution | None = None) -> tuple[RateTable, LPSolution]:
    """MOT_0 once by LP, then MOT_eps along the descending epsilon list."""
    problem = problem or build_problem(config)
    eps_list = sorted((float(e) for e in config.eps_list), reverse=True)
    if not eps_list:
        raise ValueError("rate sweep needs a non-empty eps_list")
    if lp is None:
        lp = lp_solve(problem.space, problem.cost, pivot=config.lp_pivot)
    if lp.status != "optimal":
        raise RuntimeError(f"LP did not reach optimality (status {lp.status})")
    base = config.sinkhorn_config(eps_list[0])
    sols = eps_scaling_solve(problem.space, problem.cost, eps_list, base)
    rows = []
    for s in sols:
        if not s.converged:
            log.warning("epsilon=%g not converged; excluded from fits", s.epsilon)
        rows.append(RateRow(s.epsilon, s.dual_value, lp.value, s.dual_value - lp.value,
                            s.sweeps, max(s.marginal_errors), s.converged))
    scale = max(problem.cost_scale, 1e-300)
    tol = max(1e-9, base.marginal_tol * scale)
    return RateTable(tuple(rows), scale, tol), lp


def default_window(table: RateTable) -> tuple[float, float]:
    return (DEFAULT_WINDOW[0] * table.cost_scale, DEFAULT_WINDOW[1] * table.cost_scale)


def fit_rate(table: RateTable, eps_window: Sequence[float] | None = None) -> RateFit:
    """Least squares of gap/eps against log(1/eps) inside the window."""
    lo, hi = default_window(table) if eps_window is None else tuple(eps_window)
    floor = 10.0 * table.tolerance
    rows = [r for r in table.rows
            if r.converged and lo <= r.epsilon <= hi and r.gap > floor]
    if len(rows) < 4:
        raise InsufficientData(
            f"only {len(rows)} usable rows in window [{lo:g}, {hi:g}]; need 4"
        )
    eps = np.array([r.epsilon for r in rows])
    y = np.array([r.gap for r in rows]) / eps
    x = np.log(1.0 / eps)
    A = np.stack([x, np.ones_like(x)], axis=1)
    (C, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ np.array([C, b])
    return RateFit(float(C), float(b), float(math.sqrt(np.mean(res ** 2))),
                   (float(lo), float(hi)), len(rows), tuple(eps.tolist()))


def compare_bounds(fit: RateFit, dims: Sequence[int], kappa: int,
                   slack: float = DEFAULT_SLACK) -> BoundCheck:
    lower = kappa / 2.0
    upper = (sum(dims) - max(dims)) / 2.0
    return BoundCheck(
        C=fit.C,
        lower_bound=lower,
        upper_bound=upper,
        slack=slack,
        lower_ok=bool(lower - slack <= fit.C),
        upper_ok=bool(fit.C <= upper + slack),
        matching=bool(kappa == sum(dims) - max(dims)),
    )


def estimate_kappa(problem: Problem, lp: LPSolution | None, config: RunConfig) -> KappaEstimate:
    support = lp.support() if lp is not None else None
    pts = sample_points(problem.space, config.samples, support, rng=config.seed)
    return kappa_estimate(problem.cost_model, pts, config.weight_samples, rng=config.seed)


def write_csv(table: RateTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for r in table.rows:
            w.writerow([repr(r.epsilon), repr(r.mot_eps), repr(r.mot_0), repr(r.gap),
                        r.sweeps, repr(r.marginal_error)])


def report_dict(table: RateTable, fit: RateFit | None, bounds: BoundCheck | None = None,
                kappa: KappaEstimate | None = None) -> dict:
    out = {
        "rows": [asdict(r) for r in table.rows],
        "cost_scale": table.cost_scale,
        "note": "MOT_0 and MOT_eps share the grid; below the fit window finite-grid "
                "effects bend the curve toward the discrete O(eps) regime",
    }
    if fit is not None:
        out["fit"] = asdict(fit)
    if bounds is not None:
        out["bounds"] = asdict(bounds) | {"passed": bounds.passed}
    if kappa is not None:
        out["kappa"] = {"kappa": kappa.kappa, "strategy": kappa.strategy,
                        "lower_estimate": True, "upper_bound": kappa.upper_bound}
    return out


def emit_outputs(table: RateTable, fit: RateFit | None, csv_path, json_path=None,
                 svg_path=None, bounds: BoundCheck | None = None,
                 kappa: KappaEstimate | None = None) -> list[Path]:
    """Write the CSV table, the JSON fit record and optionally the chart."""
    written = []
    write_csv(table, csv_path)
    written.append(Path(csv_path))
    if json_path:
        with open(json_path, "w") as fh:
            json.dump(report_dict(table, fit, bounds, kappa), fh, indent=2)
        written.append(Path(json_path))
    if svg_path:
        from .plotting import plot_rate

        plot_rate(table, fit, bounds, svg_path)
        written.append(Path(svg_path))
    return written


@dataclass
class RateRun:
    table: RateTable
    fit: RateFit
    kappa: KappaEstimate
    bounds: BoundCheck
    lp: LPSolution


def run_rate(config: RunConfig, problem: Problem | None = None) -> RateRun:
    problem = problem or build_problem(config)
    table, lp = rate_sweep(config, problem)
    fit = fit_rate(table, config.eps_window)
    kappa = estimate_kappa(problem, lp, config)
    bounds = compare_bounds(fit, problem.space.dims, kappa.kappa, config.slack)
    return RateRun(table, fit, kappa, bounds, lp)
