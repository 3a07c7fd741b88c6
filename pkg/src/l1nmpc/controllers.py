"""Closed-loop controllers compared by the harness: NMPC, NMPC+I, L1-NMPC."""
import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import L1NMPCError
from .l1_adaptive import L1Adaptive, clamp_sum
from .nmpc import NMPC

log = logging.getLogger(__name__)


@dataclass
class ControlOutput:
    cmd: np.ndarray
    u_mpc: np.ndarray
    u_l1: np.ndarray
    sigma_m: np.ndarray
    sigma_um: np.ndarray
    z_tilde: np.ndarray
    saturated: bool
    qp_status: str


_ZERO4 = np.zeros(4)
_ZERO2 = np.zeros(2)
_ZERO6 = np.zeros(6)


class Controller:
    """NMPC with optional position integrator and optional L1 augmentation.

    Only the nominal parameters passed here are ever visible to the
    controller; the plant copy lives in the simulator.
    """

    def __init__(self, kind, params, ocp, l1_cfg, control_dt):
        self.kind = kind
        self.params = params
        if kind == "nmpc_i":
            ocp = replace(ocp, integrator_enabled=True)
        elif kind == "nmpc":
            ocp = replace(ocp, integrator_enabled=False)
        self.nmpc = NMPC(params, ocp, control_dt)
        self.l1 = L1Adaptive(params, l1_cfg) if kind == "l1_nmpc" else None
        self._last = None

    def compute(self, x, ref):
        try:
            sol = self.nmpc.step(x, ref)
            u_mpc = sol.inputs[0].copy()
            status = sol.qp_status
        except L1NMPCError as exc:
            # hold the previous command, keep flying
            log.warning("NMPC failed: %s", exc)
            if self._last is None:
                raise
            u_mpc = self._last.u_mpc
            status = "solver_error"
            self.nmpc.warm = None

        if self.l1 is None:
            sat = bool(np.any(u_mpc >= self.params.thrust_max) or np.any(u_mpc <= self.params.thrust_min))
            out = ControlOutput(u_mpc, u_mpc, _ZERO4, _ZERO4, _ZERO2, _ZERO6, sat, status)
        else:
            u_l1, sigma, z_tilde, _ = self.l1.adapt(x, u_mpc)
            cmd, sat = clamp_sum(u_mpc, u_l1, self.params.thrust_min, self.params.thrust_max)
            # the predictor sees what actually reached the rotors
            self.l1.observe(cmd - u_mpc)
            out = ControlOutput(cmd, u_mpc, u_l1, sigma[:4], sigma[4:], z_tilde, sat, status)
        self._last = out
        return out
