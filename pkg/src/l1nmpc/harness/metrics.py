"""Tracking metrics over a flight log."""
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import InvalidArgument

STEADY_FRACTION = 0.2


@dataclass(frozen=True)
class Metrics:
    position_rmse: float
    steady_state_z_error: float
    max_position_error: float
    saturation_fraction: float
    mean_solve_time: float
    max_solve_time: float
    crashed: bool
    steps: int

    def as_dict(self):
        return asdict(self)


def rmse(errors):
    """Root mean square of per-step error norms (or scalars)."""
    e = np.asarray(errors, dtype=float)
    if e.ndim == 2:
        e = np.linalg.norm(e, axis=1)
    return float(np.sqrt(np.mean(e * e)))


def compute_metrics(log):
    """Tracking metrics; RMSE and steady-state error are NaN for crashed runs.

    ``steady_state_z_error`` is the magnitude of the mean signed altitude
    error over the final fifth of the run.
    """
    if len(log) == 0:
        raise InvalidArgument("empty flight log")
    err = log.position - log.ref_position
    norms = np.linalg.norm(err, axis=1)
    n_tail = max(1, int(round(STEADY_FRACTION * len(log))))
    crashed = log.crashed
    solve = np.asarray(log.solve_time, dtype=float)
    return Metrics(
        position_rmse=float("nan") if crashed else rmse(norms),
        steady_state_z_error=float("nan") if crashed else float(abs(np.mean(err[-n_tail:, 2]))),
        max_position_error=float(norms.max()),
        saturation_fraction=float(np.mean(log.saturated)),
        mean_solve_time=float(solve.mean()) if solve.size else float("nan"),
        max_solve_time=float(solve.max()) if solve.size else float("nan"),
        crashed=crashed,
        steps=len(log),
    )


def percent_reduction(baseline, candidate):
    """``100 (1 - candidate / baseline)``; NaN when either run is missing."""
    if not (np.isfinite(baseline) and np.isfinite(candidate)) or baseline == 0:
        return float("nan")
    return 100.0 * (1.0 - candidate / baseline)
