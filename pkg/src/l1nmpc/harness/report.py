"""Speed sweeps, controller comparisons and the metrics tables they write.

Tables are written as comma-separated files with a fixed column order.
Wall-clock solve times go to a separate ``timing.csv`` so that ``metrics.csv``
and the per-run logs are byte-identical across reruns of the same inputs.
"""
import csv
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from .config import CONTROLLERS
from .metrics import compute_metrics, percent_reduction
from .sim import FlightLog, run_scenario

log = logging.getLogger(__name__)

BASELINE = "nmpc"
METRIC_COLUMNS = [
    "scenario", "controller", "v_peak", "status", "position_rmse", "reduction_pct",
    "steady_state_z_error", "max_position_error", "saturation_fraction", "steps",
]
TIMING_COLUMNS = ["scenario", "controller", "v_peak", "mean_solve_time", "max_solve_time"]

_LOG_NAME = re.compile(r"^(?P<scenario>.+?)__(?P<controller>[a-z0-9_]+?)(?:__v(?P<v>[-+0-9.e]+))?$")


@dataclass
class RunResult:
    """One cell of a sweep: a scenario flown by one controller at one speed."""

    scenario: str
    controller: str
    v_peak: float
    status: str
    metrics: object = None
    log: FlightLog = None
    error: str = ""

    @property
    def log_stem(self):
        stem = f"{self.scenario}__{self.controller}"
        return stem if self.v_peak is None else f"{stem}__v{self.v_peak:g}"


def _v_peak(cfg):
    return cfg.trajectory.circle.v_peak if cfg.trajectory.kind == "circle" else None


def run_one(cfg):
    """Fly ``cfg`` and wrap the outcome; exceptions become ``status='error'``."""
    try:
        flight = run_scenario(cfg)
    except Exception as exc:  # a failed run is a table entry, never an abort
        log.error("%s/%s failed: %s", cfg.name, cfg.controller, exc)
        return RunResult(cfg.name, cfg.controller, _v_peak(cfg), "error", error=str(exc))
    metrics = compute_metrics(flight)
    status = "crash" if flight.crashed else "ok"
    log.info("%s/%s v=%s: %s, rmse %.4g m", cfg.name, cfg.controller, _v_peak(cfg),
             status, metrics.position_rmse)
    return RunResult(cfg.name, cfg.controller, _v_peak(cfg), status, metrics, flight)


def compare(cfg, controllers=CONTROLLERS):
    """Fly the same scenario with each controller."""
    return [run_one(cfg.with_controller(c)) for c in controllers]


def sweep(template, v_peaks, controllers=CONTROLLERS):
    """Fly ``template`` at each peak speed with every controller, same gains throughout."""
    if template.trajectory.kind != "circle":
        raise ConfigError("a speed sweep needs a circle trajectory")
    results = []
    for v in v_peaks:
        results.extend(compare(template.with_speed(v), controllers))
    return results


def _key(r):
    return (r.scenario, r.v_peak)


def reductions(results):
    """Percentage RMSE reduction of every result against the plain NMPC run of its cell."""
    base = {_key(r): r for r in results if r.controller == BASELINE}
    out = []
    for r in results:
        b = base.get(_key(r))
        if b is None or b.metrics is None or r.metrics is None:
            out.append(float("nan"))
        else:
            out.append(percent_reduction(b.metrics.position_rmse, r.metrics.position_rmse))
    return out


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.6g}"
    return str(v)


def metric_rows(results):
    rows = []
    for r, red in zip(results, reductions(results)):
        m = r.metrics
        rows.append([
            r.scenario, r.controller, r.v_peak, r.status,
            m.position_rmse if m else float("nan"), red,
            m.steady_state_z_error if m else float("nan"),
            m.max_position_error if m else float("nan"),
            m.saturation_fraction if m else float("nan"),
            m.steps if m else 0,
        ])
    return rows


def _write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_report(results, out_dir, write_logs=True):
    """Write ``metrics.csv``, ``timing.csv`` and, optionally, one log per run.

    Raises ``OSError`` when ``out_dir`` cannot be created or written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_table(out / "metrics.csv", METRIC_COLUMNS, metric_rows(results))
    timing = []
    for r in results:
        m = r.metrics
        if m is not None and np.isfinite(m.mean_solve_time):
            timing.append([r.scenario, r.controller, r.v_peak, m.mean_solve_time, m.max_solve_time])
    _write_table(out / "timing.csv", TIMING_COLUMNS, timing)
    if write_logs:
        for r in results:
            if r.log is not None:
                r.log.write_csv(out / f"{r.log_stem}.csv")
                r.log.write_timing_csv(out / f"{r.log_stem}_timing.csv")
    return out / "metrics.csv"


def load_results(log_dir):
    """Rebuild results from flight logs previously written by :func:`write_report`.

    Solve times are re-attached from the ``*_timing.csv`` companions when present.
    """
    d = Path(log_dir)
    if not d.is_dir():
        raise FileNotFoundError(f"{d} is not a directory")
    results = []
    for path in sorted(d.glob("*.csv")):
        stem = path.stem
        if stem.endswith("_timing") or stem in ("metrics", "timing"):
            continue
        m = _LOG_NAME.match(stem)
        scenario, controller, v = (m["scenario"], m["controller"], m["v"]) if m else (stem, "", None)
        flight = FlightLog.read_csv(path, name=scenario)
        timing = path.with_name(f"{stem}_timing.csv")
        if timing.exists():
            with open(timing, newline="") as fh:
                flight.solve_time = np.array([float(r[1]) for r in list(csv.reader(fh))[1:]])
        metrics = compute_metrics(flight) if len(flight) else None
        status = "crash" if flight.crashed else "ok"
        results.append(RunResult(scenario, controller, None if v is None else float(v),
                                 status, metrics, flight))
    results.sort(key=lambda r: (r.scenario, -1.0 if r.v_peak is None else r.v_peak,
                                _controller_rank(r.controller)))
    return results


def _controller_rank(c):
    return CONTROLLERS.index(c) if c in CONTROLLERS else len(CONTROLLERS)


def report(log_dir, out_dir=None):
    """Recompute the metrics tables for every flight log in ``log_dir``."""
    results = load_results(log_dir)
    return write_report(results, out_dir or log_dir, write_logs=False)


def format_table(results):
    """Fixed-width text rendering of :func:`metric_rows` for the terminal."""
    header = ["scenario", "controller", "v_peak", "status", "rmse [m]", "%down", "ss z [m]", "sat"]
    rows = [[r[0], r[1], _fmt(r[2]), r[3], _fmt(r[4]), _fmt(r[5]), _fmt(r[6]), _fmt(r[8])]
            for r in metric_rows(results)]
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    lines = ["  ".join(str(x).ljust(w) for x, w in zip(row, widths)).rstrip()
             for row in [header] + rows]
    return "\n".join(lines)
