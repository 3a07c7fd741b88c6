"""Closed-loop simulation: plant at ``sim_dt``, controller at ``control_dt``."""
import csv
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..controllers import Controller
from ..disturbance import apply_mismatch, external_force
from ..errors import IntegrationDiverged, InvalidArgument
from ..rigid_body import rk4_array
from ..trajectory import reference_window

log = logging.getLogger(__name__)

STATE_NAMES = ["px", "py", "pz", "qw", "qx", "qy", "qz", "vx", "vy", "vz", "wx", "wy", "wz"]
NUMERIC_COLUMNS = (
    ["t"] + STATE_NAMES + ["ref_" + n for n in STATE_NAMES]
    + [f"cmd{i}" for i in range(4)] + [f"mpc{i}" for i in range(4)]
    + [f"l1_{i}" for i in range(4)] + [f"sigma_m{i}" for i in range(4)]
    + ["sigma_um0", "sigma_um1"] + [f"z_tilde{i}" for i in range(6)] + ["saturated"]
)
COLUMNS = NUMERIC_COLUMNS + ["qp_status", "status"]

_POS = slice(1, 4)
_REF_POS = slice(14, 17)
_SAT = NUMERIC_COLUMNS.index("saturated")


@dataclass
class FlightLog:
    """Per-control-step record. Wall-clock solve times are kept beside the
    table (``solve_time``) so the table itself stays replayable byte for byte."""

    data: np.ndarray
    qp_status: list
    status: list
    solve_time: np.ndarray = field(default_factory=lambda: np.zeros(0))
    name: str = "run"

    def __len__(self):
        return len(self.status)

    @property
    def crashed(self):
        return bool(self.status) and self.status[-1] == "crash"

    def column(self, name):
        return self.data[:, NUMERIC_COLUMNS.index(name)]

    @property
    def t(self):
        return self.data[:, 0]

    @property
    def position(self):
        return self.data[:, _POS]

    @property
    def ref_position(self):
        return self.data[:, _REF_POS]

    @property
    def saturated(self):
        return self.data[:, _SAT] > 0.5

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COLUMNS)
            for row, qs, st in zip(self.data, self.qp_status, self.status):
                w.writerow([repr(float(v)) for v in row] + [qs, st])

    def write_timing_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "solve_time"])
            for t, s in zip(self.t, self.solve_time):
                w.writerow([repr(float(t)), repr(float(s))])

    @classmethod
    def read_csv(cls, path, name=None):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != COLUMNS:
            raise InvalidArgument(f"{path}: not a flight log")
        body = rows[1:]
        n = len(NUMERIC_COLUMNS)
        data = np.array([[float(v) for v in r[:n]] for r in body]).reshape(len(body), n)
        return cls(data, [r[n] for r in body], [r[n + 1] for r in body],
                   name=name or str(path))


def run_scenario(cfg, plant_hook=None):
    """Fly ``cfg`` and return its :class:`FlightLog`.

    The run ends early with a ``crash`` row when the position error exceeds
    ``crash_distance`` or the vehicle drops below ``ground_altitude``.
    ``plant_hook(k, plant_params)``, when given, may return replacement plant
    parameters before step ``k``; the controller never sees them.
    """
    nominal = cfg.nominal_params
    plant = apply_mismatch(nominal, cfg.mismatch)
    traj = cfg.trajectory.build(nominal)
    ctrl = Controller(cfg.controller, nominal, cfg.ocp, cfg.l1, cfg.control_dt)
    rng = np.random.default_rng(cfg.seed)
    noise = np.asarray(cfg.measurement_noise_std)
    noisy = bool(np.any(noise > 0))

    n_steps = int(math.floor(traj.duration / cfg.control_dt + 1e-9))
    substeps = cfg.substeps
    horizon, node_dt = cfg.ocp.horizon_steps, cfg.ocp.dt
    x = traj.sample(0.0)[0].as_array()

    rows, qp_status, status, timing = [], [], [], []
    for k in range(n_steps + 1):
        t = k * cfg.control_dt
        if plant_hook is not None:
            plant = plant_hook(k, plant) or plant
        ref = reference_window(traj, t, horizon, node_dt)
        meas = x
        if noisy:
            meas = x + noise * rng.standard_normal(13)
            meas[3:7] /= np.linalg.norm(meas[3:7])

        t0 = time.perf_counter()
        out = ctrl.compute(meas, ref)
        timing.append(time.perf_counter() - t0)

        rows.append(np.concatenate([[t], x, ref.states[0], out.cmd, out.u_mpc, out.u_l1,
                                    out.sigma_m, out.sigma_um, out.z_tilde, [float(out.saturated)]]))
        qp_status.append(out.qp_status)
        err = np.linalg.norm(x[0:3] - ref.states[0, 0:3])
        if not err <= cfg.crash_distance:
            status.append("crash")
            log.info("%s: crashed at t=%.2f s (position error %.1f m)", cfg.name, t, err)
            break
        if cfg.ground_altitude is not None and x[2] < cfg.ground_altitude:
            status.append("crash")
            log.info("%s: hit the ground at t=%.2f s", cfg.name, t)
            break
        status.append("ok")
        if k == n_steps:
            break
        try:
            for s in range(substeps):
                f = external_force(t + s * cfg.sim_dt, x, cfg.wind)
                x = rk4_array(x, out.cmd, plant, cfg.sim_dt, f)
        except IntegrationDiverged:
            status[-1] = "crash"
            break

    return FlightLog(np.array(rows), qp_status, status, np.array(timing), name=cfg.name)
