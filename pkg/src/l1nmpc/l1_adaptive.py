"""L1 adaptive augmentation at the rotor-thrust level.

The reduced state is ``z = [v_WB, omega_B]``. Matched uncertainty lives in
the span of the rotor-thrust effectiveness ``g_mat`` (units of rotor thrust,
N), unmatched uncertainty along the body x/y force directions ``g_perp``.
Estimates are piecewise constant over the adaptation period ``Ts`` and the
filtered negative matched estimate is added to the NMPC thrusts.
"""
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import BasisSingular, InvalidArgument, ObserverDiverged
from .rigid_body import RotorCommand

log = logging.getLogger(__name__)

COND_LIMIT = 1e8
EVENT_LOG_SIZE = 256
_ZERO3 = np.zeros(3)


@dataclass(frozen=True)
class L1Config:
    as_diag: tuple
    cutoff: tuple
    ts: float
    sigma_clip: tuple

    def __post_init__(self):
        for name, n in (("as_diag", 6), ("cutoff", 4), ("sigma_clip", 6)):
            v = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (n,))
            object.__setattr__(self, name, tuple(v.tolist()))
        object.__setattr__(self, "ts", float(self.ts))
        if max(self.as_diag) >= 0:
            raise InvalidArgument("A_s must be Hurwitz: every diagonal entry < 0")
        if min(self.cutoff) <= 0:
            raise InvalidArgument("cutoff frequencies must be positive")
        if not self.ts > 0:
            raise InvalidArgument("Ts must be positive")
        if min(self.sigma_clip) <= 0:
            raise InvalidArgument("sigma_clip must be positive")

    @property
    def exp_as(self):
        return np.exp(np.asarray(self.as_diag) * self.ts)

    @property
    def phi(self):
        """Diagonal of ``A_s^-1 (e^{A_s Ts} - I)``."""
        a = np.asarray(self.as_diag)
        return (self.exp_as - 1.0) / a

    @property
    def adaptation_gain(self):
        """Diagonal of ``Phi^-1 e^{A_s Ts}``."""
        return self.exp_as / self.phi

    @property
    def filter_decay(self):
        return np.exp(-np.asarray(self.cutoff) * self.ts)


@dataclass
class L1State:
    z_hat: np.ndarray
    sigma_m: np.ndarray = field(default_factory=lambda: np.zeros(4))
    sigma_um: np.ndarray = field(default_factory=lambda: np.zeros(2))
    u_l1_prev: np.ndarray = field(default_factory=lambda: np.zeros(4))


@dataclass(frozen=True, eq=False)
class UncertaintyBasis:
    g_mat: np.ndarray   # 6 x 4
    g_perp: np.ndarray  # 6 x 2
    f_vec: np.ndarray   # 6

    @property
    def G(self):
        return np.hstack([self.g_mat, self.g_perp])


class Adaptation(NamedTuple):
    sigma_m: np.ndarray
    sigma_um: np.ndarray
    saturated: bool


def reduced_state(x):
    """``z = [velocity, body rates]`` from a 13-dim state array."""
    x = np.asarray(x)
    return np.concatenate([x[7:10], x[10:13]])


def build_basis(state, u_mpc, params, ts=None):
    """Nominal drift ``f`` and input maps at ``state`` under the NMPC thrusts.

    With ``ts`` given, ``f`` is the average rate of the RK4 step over one
    period instead of the instantaneous derivative, so a predictor driven by
    it reproduces the nominal model exactly when there is no uncertainty.
    """
    x = state.as_array()
    u = u_mpc.thrusts if isinstance(u_mpc, RotorCommand) else np.asarray(u_mpc, dtype=float)
    rot = state.attitude.rotation_matrix()
    m, j = params.mass, params.inertia
    p_alloc = params.allocation_matrix()
    v, w = x[7:10], x[10:13]

    f_v = np.array([0.0, 0.0, -params.gravity]) + u.sum() / m * rot[:, 2] \
        - np.asarray(params.drag_matrix_diag) * v
    f_w = (p_alloc @ u - np.cross(w, j * w)) / j
    if ts is not None:
        x_next = kernels.rk4(x, u, params.packed, float(ts), _ZERO3, _ZERO3, False)
        f_v, f_w = (x_next[7:10] - v) / ts, (x_next[10:13] - w) / ts

    g_mat = np.vstack([np.tile(rot[:, 2:3] / m, (1, 4)), p_alloc / j[:, None]])
    g_perp = np.vstack([rot[:, 0:2] / m, np.zeros((3, 2))])
    return UncertaintyBasis(g_mat, g_perp, np.concatenate([f_v, f_w]))


def adapt(z_hat, z_measured, basis, cfg):
    """Piecewise-constant estimate ``-G^-1 Phi^-1 e^{A_s Ts} z_tilde``, clamped."""
    G = basis.G
    cond = np.linalg.cond(G)
    if not cond < COND_LIMIT:
        raise BasisSingular(f"uncertainty basis condition number {cond:.3g}")
    z_tilde = np.asarray(z_hat, dtype=float) - np.asarray(z_measured, dtype=float)
    mu = cfg.exp_as * z_tilde
    raw = -np.linalg.solve(G, mu / cfg.phi)
    clip = np.asarray(cfg.sigma_clip)
    sigma = np.clip(raw, -clip, clip)
    return Adaptation(sigma[:4], sigma[4:], bool(np.any(sigma != raw)))


def filter_step(u_prev, sigma_m, cfg):
    """Discrete first-order low-pass of ``-sigma_m``, one factor per channel."""
    decay = cfg.filter_decay
    return np.asarray(u_prev, dtype=float) * decay - np.asarray(sigma_m, dtype=float) * (1.0 - decay)


def observer_step(st, basis, u_l1, z_measured, cfg):
    z_tilde = st.z_hat - np.asarray(z_measured, dtype=float)
    dz = (basis.f_vec + basis.g_mat @ (np.asarray(u_l1, dtype=float) + st.sigma_m)
          + basis.g_perp @ st.sigma_um + np.asarray(cfg.as_diag) * z_tilde)
    z_next = st.z_hat + dz * cfg.ts
    if not np.all(np.isfinite(z_next)):
        raise ObserverDiverged("state predictor produced non-finite values")
    return z_next


def clamp_sum(u_mpc, u_l1, thrust_min, thrust_max):
    """Array form of :func:`augment`: ``(clamped u_mpc + u_l1, saturated)``."""
    total = u_mpc + u_l1
    cmd = np.minimum(np.maximum(total, thrust_min), thrust_max)
    return cmd, bool((cmd != total).any())


def augment(u_mpc, u_l1, params):
    u = u_mpc.thrusts if isinstance(u_mpc, RotorCommand) else np.asarray(u_mpc, dtype=float)
    cmd, sat = clamp_sum(u, np.asarray(u_l1, dtype=float), params.thrust_min, params.thrust_max)
    return RotorCommand(cmd), sat


def _rotation_free_basis(params):
    """``G`` at identity attitude; ``G(R) = blockdiag(R, I) @ G0``."""
    j = params.inertia
    m = params.mass
    g0 = np.zeros((6, 6))
    g0[2, 0:4] = 1.0 / m
    g0[3:6, 0:4] = params.allocation_matrix() / j[:, None]
    g0[0, 4] = g0[1, 5] = 1.0 / m
    return g0


class L1Adaptive:
    """Stateful L1 loop used inside the closed-loop controller.

    Call :meth:`adapt` once per period with the measured state and the NMPC
    thrusts, apply (and possibly clamp) the returned ``u_l1``, then call
    :meth:`observe` with the contribution that actually reached the rotors.
    """

    def __init__(self, params, cfg):
        self.params = params
        self.cfg = cfg
        g0 = _rotation_free_basis(params)
        cond = np.linalg.cond(g0)
        if not cond < COND_LIMIT:
            raise BasisSingular(f"uncertainty basis condition number {cond:.3g}")
        self._g0_inv = np.ascontiguousarray(np.linalg.inv(g0))
        self._gain = np.ascontiguousarray(cfg.adaptation_gain)
        self._decay = np.ascontiguousarray(cfg.filter_decay)
        self._clip = np.ascontiguousarray(cfg.sigma_clip, dtype=float)
        self._as = np.ascontiguousarray(cfg.as_diag, dtype=float)
        self.state = None
        self.events = deque(maxlen=EVENT_LOG_SIZE)
        self._pending = None

    def reset(self, z=None):
        self.state = None if z is None else L1State(np.array(z, dtype=float))
        self._pending = None

    def adapt(self, x, u_mpc):
        """Update the estimates from the measured state ``x`` (13-array).

        Returns ``(u_l1, sigma(6), z_tilde(6), clipped)``.
        """
        z = np.ascontiguousarray(reduced_state(x))
        if self.state is None:
            self.state = L1State(z.copy())
        st = self.state
        quat = np.ascontiguousarray(x[3:7])
        sigma, u_l1, z_tilde, clipped = kernels.l1_adapt(
            st.z_hat, z, quat, st.u_l1_prev, self._g0_inv, self._gain, self._decay, self._clip)
        if clipped:
            log.debug("sigma estimate clamped: %s", sigma)
            self.events.append(("sigma_clip", sigma.copy()))
        st.sigma_m, st.sigma_um = sigma[:4], sigma[4:]
        st.u_l1_prev = u_l1
        self._pending = (z, quat, np.ascontiguousarray(u_mpc, dtype=float), sigma, z_tilde)
        return u_l1, sigma, z_tilde, clipped

    def observe(self, u_l1_applied):
        z, quat, u_mpc, sigma, z_tilde = self._pending
        z_next = kernels.l1_observe(self.state.z_hat, z, quat, u_mpc,
                                    np.ascontiguousarray(u_l1_applied, dtype=float),
                                    sigma, self.params.packed, self._as, z_tilde, self.cfg.ts)
        if not np.all(np.isfinite(z_next)):
            log.warning("L1 observer diverged; resetting the predictor to the measurement")
            self.events.append(("observer_reset", None))
            z_next = z.copy()
        self.state.z_hat = z_next
        self._pending = None
        return z_next
