"""Scenario execution: simulate, predict, compare, and write CSV artifacts.

Outputs under the chosen directory:

* ``comparison.csv`` / ``comparison.txt`` -- one row per (scenario, start)
  with measured and predicted drift, the divergence-curl residual summary
  and the period report.
* ``<scenario id>/drift_checkpoints.csv`` -- columns
  (scenario_id, start_index, t, X_1..X_d, drift_1..drift_d).
* ``<scenario id>/measure_s<k>.csv`` -- (bin multi-index, center, weight).
* ``<scenario id>/residuals_s<k>.csv`` -- (psi_id, t, residual, bound).

CSV bodies are deterministic for fixed scenario files; the generation
timestamp lives in a leading comment line only.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from . import __version__ as _version
from .analytic import predict_drift
from .ergodic import drift_estimate, empirical_measure
from .errors import TorusDriftError
from .fields import DirectionField, OneDField, RectifiedField, classify_direction
from .flow import PeriodReport, detect_torus_period, integrate
from .invariance import divcurl_residual, random_test_panel
from .scenario import SCHEMA_VERSION, Scenario

PERIOD_TOL = 1e-6


@dataclass(frozen=True)
class StartResult:
    """Everything measured for one (scenario, start) task."""
    scenario_id: str
    start_index: int
    checkpoint_times: Tuple[float, ...]
    checkpoint_states: np.ndarray
    drift_values: np.ndarray
    measured: np.ndarray
    measure_indices: np.ndarray
    measure_centers: np.ndarray
    measure_weights: np.ndarray
    residual_rows: Tuple[Tuple[str, float, float, float], ...]
    period: Optional[PeriodReport]
    stationary: bool
    failure: Optional[str] = None


@dataclass(frozen=True)
class ComparisonRow:
    scenario_id: str
    start_index: int
    dim: int
    case_tag: str
    measured: Optional[Tuple[float, ...]]
    predicted: Optional[Tuple[float, ...]]
    abs_error: Optional[Tuple[float, ...]]
    tol_abs: float
    tol_rel: float
    residual_max: Optional[float]
    period: Optional[PeriodReport]
    verdict: str  # "pass" | "fail" | "FAILED" | "no-prediction"


@dataclass(frozen=True)
class RunReport:
    rows: Tuple[ComparisonRow, ...]
    results: Tuple[StartResult, ...]

    @property
    def all_pass(self) -> bool:
        return all(r.verdict in ("pass", "no-prediction") for r in self.rows)


def _direction_class_for(scenario: Scenario):
    spec = scenario.spec
    if isinstance(spec, (DirectionField, RectifiedField)):
        return classify_direction(spec.xi, scenario.search_bound)
    return None


def _run_start(scenario: Scenario, start_index: int) -> StartResult:
    spec = scenario.spec
    x0 = scenario.starts[start_index]
    traj = integrate(spec, x0, scenario.t_end, scenario.rtol, scenario.atol,
                     dense_dt=scenario.dense_dt)
    est = drift_estimate(traj)
    mu = empirical_measure(traj, scenario.grid_n)
    panel = random_test_panel(scenario.dim, count=10, seed=scenario.panel_seed)
    residual_rows = []
    for i, psi in enumerate(panel):
        res = divcurl_residual(spec, mu, psi)
        bound = 2.0 * psi.sup_bound() / traj.t_end
        residual_rows.append((f"psi{i:02d}", traj.t_end, res, bound))
    period = None
    if isinstance(spec, (DirectionField, OneDField, RectifiedField)):
        period = detect_torus_period(spec, x0, tau_max=min(100.0, scenario.t_end),
                                     tol=PERIOD_TOL,
                                     search_bound=scenario.search_bound)
    return StartResult(
        scenario_id=scenario.id,
        start_index=start_index,
        checkpoint_times=tuple(est.times),
        checkpoint_states=traj.checkpoint_states[traj.checkpoint_times > 0.0],
        drift_values=est.values,
        measured=est.final,
        measure_indices=mu.indices(),
        measure_centers=mu.centers(),
        measure_weights=mu.weights.ravel(),
        residual_rows=tuple(residual_rows),
        period=period,
        stationary=traj.stationary_exit is not None,
    )


def _run_start_safe(scenario: Scenario, start_index: int) -> StartResult:
    try:
        return _run_start(scenario, start_index)
    except TorusDriftError as exc:
        return StartResult(scenario.id, start_index, (), np.zeros((0, 0)),
                           np.zeros((0, 0)), np.zeros(0), np.zeros((0, 0)),
                           np.zeros((0, 0)), np.zeros(0), (), None, False,
                           failure=f"{type(exc).__name__}: {exc}")


def _compare(scenario: Scenario, result: StartResult) -> ComparisonRow:
    if result.failure is not None:
        return ComparisonRow(scenario.id, result.start_index, scenario.dim,
                             "error", None, None, None, scenario.tol_abs,
                             scenario.tol_rel, None, None,
                             verdict=f"FAILED: {result.failure}")
    x0 = scenario.starts[result.start_index]
    if scenario.expected is not None:
        predicted = np.asarray(scenario.expected, dtype=np.float64)
        tag = "explicit"
    else:
        prediction = predict_drift(scenario.spec, x0,
                                   _direction_class_for(scenario))
        tag = prediction.case_tag
        predicted = prediction.vector if prediction.supported else None
    residual_max = max((abs(r[2]) for r in result.residual_rows), default=None)
    if predicted is None:
        return ComparisonRow(scenario.id, result.start_index, scenario.dim, tag,
                             tuple(result.measured.tolist()), None, None,
                             scenario.tol_abs, scenario.tol_rel,
                             residual_max, result.period, "no-prediction")
    err = np.abs(result.measured - predicted)
    allowed = scenario.tol_abs + scenario.tol_rel * np.linalg.norm(predicted)
    verdict = "pass" if float(np.max(err)) <= allowed else "fail"
    return ComparisonRow(scenario.id, result.start_index, scenario.dim, tag,
                         tuple(result.measured.tolist()),
                         tuple(predicted.tolist()),
                         tuple(err.tolist()), scenario.tol_abs, scenario.tol_rel,
                         residual_max, result.period, verdict)


def run(scenarios, out_dir, jobs: int = 1) -> RunReport:
    """Execute all scenarios and write CSV artifacts under ``out_dir``.

    Tasks are (scenario, start) pairs; with ``jobs > 1`` they execute in a
    process pool.  Report assembly and file writing happen afterwards in a
    deterministic (scenario order, start index) order.
    """
    tasks = [(sc, j) for sc in scenarios for j in range(len(sc.starts))]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_start_safe,
                                    [t[0] for t in tasks], [t[1] for t in tasks]))
    else:
        results = [_run_start_safe(sc, j) for sc, j in tasks]

    by_id = {sc.id: sc for sc in scenarios}
    rows = tuple(_compare(by_id[r.scenario_id], r) for r in results)
    report = RunReport(rows=rows, results=tuple(results))
    if out_dir is not None:
        write_artifacts(scenarios, report, Path(out_dir))
    return report


def predict_only(scenarios) -> Tuple[ComparisonRow, ...]:
    """Analytic predictions per (scenario, start), no integration."""
    rows = []
    for sc in scenarios:
        dclass = _direction_class_for(sc)
        for j, x0 in enumerate(sc.starts):
            if sc.expected is not None:
                predicted, tag = tuple(sc.expected.tolist()), "explicit"
            else:
                p = predict_drift(sc.spec, x0, dclass)
                tag = p.case_tag
                predicted = p.value if p.supported else None
            rows.append(ComparisonRow(sc.id, j, sc.dim, tag, None, predicted,
                                      None, sc.tol_abs, sc.tol_rel, None, None,
                                      "no-prediction" if predicted is None
                                      else "predicted"))
    return tuple(rows)


# ---------------------------------------------------------------------------
# CSV artifacts
# ---------------------------------------------------------------------------

def _header_lines(fh):
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    fh.write(f"# torusdrift {_version} schema_version={SCHEMA_VERSION} "
             f"generated={stamp}\n")


def _fmt(x: float) -> str:
    return repr(float(x))


def _vec(v) -> str:
    return " ".join(_fmt(x) for x in v)


def write_artifacts(scenarios, report: RunReport, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    by_id = {sc.id: sc for sc in scenarios}

    grouped = {}
    for res in report.results:
        grouped.setdefault(res.scenario_id, []).append(res)

    for sc in scenarios:
        sdir = out_dir / sc.id
        sdir.mkdir(exist_ok=True)
        results = sorted(grouped.get(sc.id, []), key=lambda r: r.start_index)
        d = sc.dim
        with open(sdir / "drift_checkpoints.csv", "w", newline="") as fh:
            _header_lines(fh)
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["scenario_id", "start_index", "t"]
                       + [f"X{i+1}" for i in range(d)]
                       + [f"drift{i+1}" for i in range(d)])
            for res in results:
                if res.failure:
                    continue
                for t, X, v in zip(res.checkpoint_times, res.checkpoint_states,
                                   res.drift_values):
                    w.writerow([sc.id, res.start_index, _fmt(t)]
                               + [_fmt(x) for x in X] + [_fmt(x) for x in v])
        for res in results:
            if res.failure:
                continue
            with open(sdir / f"measure_s{res.start_index}.csv", "w",
                      newline="") as fh:
                _header_lines(fh)
                w = csv.writer(fh, lineterminator="\n")
                w.writerow([f"i{j+1}" for j in range(d)]
                           + [f"c{j+1}" for j in range(d)] + ["weight"])
                for idx, ctr, wt in zip(res.measure_indices,
                                        res.measure_centers,
                                        res.measure_weights):
                    w.writerow([int(v) for v in idx]
                               + [_fmt(v) for v in ctr] + [_fmt(wt)])
            with open(sdir / f"residuals_s{res.start_index}.csv", "w",
                      newline="") as fh:
                _header_lines(fh)
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["psi_id", "t", "residual", "bound"])
                for psi_id, t, resv, bound in res.residual_rows:
                    w.writerow([psi_id, _fmt(t), _fmt(resv), _fmt(bound)])

    with open(out_dir / "comparison.csv", "w", newline="") as fh:
        _header_lines(fh)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario_id", "start_index", "dim", "case_tag",
                    "measured", "predicted", "abs_error", "tol_abs", "tol_rel",
                    "residual_max", "period_found", "period_tau", "period_k",
                    "period_residual", "verdict"])
        for row in report.rows:
            p = row.period
            w.writerow([
                row.scenario_id, row.start_index, row.dim, row.case_tag,
                _vec(row.measured) if row.measured is not None else "",
                _vec(row.predicted) if row.predicted is not None else "",
                _vec(row.abs_error) if row.abs_error is not None else "",
                _fmt(row.tol_abs), _fmt(row.tol_rel),
                _fmt(row.residual_max) if row.residual_max is not None else "",
                "" if p is None else str(bool(p.found)).lower(),
                "" if p is None or not p.found else _fmt(p.tau),
                "" if p is None or not p.found else " ".join(str(v) for v in p.k),
                "" if p is None or not p.found else _fmt(p.residual),
                row.verdict,
            ])

    with open(out_dir / "comparison.txt", "w") as fh:
        fh.write(format_report(report))


def format_report(report: RunReport) -> str:
    lines = ["scenario, start: verdict | tag | measured | predicted | max_err"]
    for row in report.rows:
        meas = _vec(row.measured) if row.measured is not None else "-"
        pred = _vec(row.predicted) if row.predicted is not None else "-"
        err = (max(row.abs_error) if row.abs_error else math.nan)
        lines.append(f"{row.scenario_id}, {row.start_index}: {row.verdict}"
                     f" | {row.case_tag} | {meas} | {pred}"
                     f" | {err if not math.isnan(err) else '-'}")
    status = "ALL PASS" if report.all_pass else "FAILURES PRESENT"
    lines.append(status)
    return "\n".join(lines) + "\n"
