"""Multiple-shooting Gauss-Newton SQP in a real-time iteration scheme.

Each control step shifts the previous solution, rolls the shifted inputs out
from the measured state with the RK4 model, linearizes every node by finite
differences, condenses the QP into the inputs and solves it under the thrust
box constraints. A backtracking line search on the rolled-out cost keeps
accepted steps non-increasing.
"""
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import InvalidArgument, LinearizationFailed, SolverError
from .qp import solve_box_qp
from .rigid_body import RotorCommand, VehicleState

NX, NU = 13, 4
QUAT = slice(3, 7)


@dataclass(frozen=True)
class OcpConfig:
    horizon_steps: int
    horizon_time: float
    state_weights: tuple
    input_weights: tuple
    integrator_enabled: bool = False
    integrator_weight: tuple = (0.0, 0.0, 0.0)
    integrator_leak: float = 0.0
    sqp_iters_per_step: int = 1
    qp_tolerance: float = 1e-10
    qp_max_iter: int = 50

    def __post_init__(self):
        sw = np.asarray(self.state_weights, dtype=float)
        if sw.size == 4:  # position, attitude, velocity, rate groups
            sw = np.repeat(sw, (3, 4, 3, 3))
        object.__setattr__(self, "state_weights", tuple(sw.tolist()))
        iw = np.broadcast_to(np.asarray(self.input_weights, dtype=float), (NU,))
        object.__setattr__(self, "input_weights", tuple(iw.tolist()))
        kw = np.broadcast_to(np.asarray(self.integrator_weight, dtype=float), (3,))
        object.__setattr__(self, "integrator_weight", tuple(kw.tolist()))
        if self.horizon_steps < 2:
            raise InvalidArgument("horizon_steps must be at least 2")
        if not self.horizon_time > 0:
            raise InvalidArgument("horizon_time must be positive")
        if len(self.state_weights) != NX:
            raise InvalidArgument("state_weights needs 13 entries (or 4 groups)")
        if min(self.state_weights) < 0 or min(self.input_weights) < 0:
            raise InvalidArgument("weights must be non-negative")
        if max(self.state_weights) <= 0:
            raise InvalidArgument("at least one state weight must be positive")
        if self.sqp_iters_per_step < 1:
            raise InvalidArgument("sqp_iters_per_step must be >= 1")

    @property
    def dt(self):
        return self.horizon_time / self.horizon_steps


@dataclass(frozen=True, eq=False)
class ReferenceWindow:
    """Reference states (N+1 x 13) and feedforward inputs (N x 4)."""

    states: np.ndarray
    inputs: np.ndarray

    @classmethod
    def from_samples(cls, states, inputs):
        return cls(np.array([s.as_array() for s in states]),
                   np.array([u.thrusts for u in inputs]))

    @classmethod
    def constant(cls, state, cmd, horizon_steps):
        return cls(np.tile(state.as_array(), (horizon_steps + 1, 1)),
                   np.tile(cmd.thrusts, (horizon_steps, 1)))

    def offset_positions(self, delta):
        states = self.states.copy()
        states[:, 0:3] += delta
        return replace(self, states=states)


@dataclass(frozen=True, eq=False)
class Solution:
    inputs: np.ndarray   # N x 4
    states: np.ndarray   # N+1 x 13
    kkt_residual: float = np.inf
    qp_status: str = "optimal"
    cost: float = np.nan

    @property
    def first_input(self):
        return RotorCommand(self.inputs[0])

    def state(self, k):
        return VehicleState.from_array(self.states[k])


def _as_array(v, n):
    if isinstance(v, VehicleState):
        return v.as_array()
    if isinstance(v, RotorCommand):
        return v.thrusts
    a = np.ascontiguousarray(v, dtype=float)
    if a.shape != (n,):
        raise InvalidArgument(f"expected {n} entries, got shape {a.shape}")
    return a


def linearize(x, u, dt, params):
    """Forward-difference Jacobians ``(A, B)`` of the RK4 step."""
    a, b = kernels.linearize(_as_array(x, NX), _as_array(u, NU), params.packed, float(dt))
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise LinearizationFailed("non-finite sensitivities")
    return a, b


def _shift(a, fraction):
    nxt = np.concatenate([a[1:], a[-1:]])
    if fraction == 1.0:
        return nxt
    return (1.0 - fraction) * a + fraction * nxt


def shift_warm_start(prev, fraction=1.0):
    """Advance a solution by ``fraction`` of a node, duplicating the tail.

    ``fraction=1`` is the plain one-node shift; smaller values interpolate
    linearly between neighbouring nodes (control period below node spacing).
    """
    if not 0.0 < fraction <= 1.0:
        raise InvalidArgument("shift fraction must be in (0, 1]")
    return replace(prev, inputs=_shift(prev.inputs, fraction), states=_shift(prev.states, fraction))


def integrator_update(int_state, pos_error, dt, cfg):
    """Leaky rectangle-rule accumulation of position error."""
    int_state = np.asarray(int_state, dtype=float)
    return int_state + np.asarray(pos_error, dtype=float) * dt - cfg.integrator_leak * int_state * dt


def _residuals(states, ref_states):
    r = states - ref_states
    # compare against whichever of +q_ref / -q_ref is closer
    flip = np.einsum("ij,ij->i", states[:, QUAT], ref_states[:, QUAT]) < 0.0
    r[flip, QUAT] = states[flip, QUAT] + ref_states[flip, QUAT]
    return r


def tracking_cost(states, inputs, ref, cfg):
    q = np.asarray(cfg.state_weights)
    rw = np.asarray(cfg.input_weights)
    r = _residuals(states, ref.states)
    du = inputs - ref.inputs
    return float(np.sum(q * r * r) + np.sum(rw * du * du))


def _rollout(x0, inputs, params, dt):
    states = kernels.rollout(x0, np.ascontiguousarray(inputs), params.packed, dt)
    if not np.all(np.isfinite(states)):
        raise SolverError("non-finite rollout")
    return states


def condense(a, b):
    """Sensitivities of states 1..N w.r.t. the stacked inputs: (N, 13, 4N)."""
    n = a.shape[0]
    gam = np.zeros((n + 1, NX, NU * n))
    for k in range(n):
        gam[k + 1] = a[k] @ gam[k]
        gam[k + 1][:, NU * k:NU * (k + 1)] += b[k]
    return gam[1:]


class CondensedQP(NamedTuple):
    """``min 0.5 d'Hd + g'd`` s.t. ``lb <= d <= ub`` over the stacked input step."""

    hess: np.ndarray
    grad: np.ndarray
    lb: np.ndarray
    ub: np.ndarray


def condensed_qp(x0, inputs, ref, cfg, params, states=None):
    """Gauss-Newton QP of one SQP iteration around the rollout of ``inputs``."""
    dt = cfg.dt
    if states is None:
        states = _rollout(x0, inputs, params, dt)
    a, b = kernels.linearize_traj(states, np.ascontiguousarray(inputs), params.packed, dt)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise LinearizationFailed("non-finite sensitivities")

    n = cfg.horizon_steps
    gam = condense(a, b).reshape(n * NX, n * NU)
    qd = np.tile(cfg.state_weights, n)
    rd = np.tile(cfg.input_weights, n)
    res = _residuals(states, ref.states)[1:].reshape(-1)
    du_ref = (inputs - ref.inputs).reshape(-1)

    hess = gam.T @ (qd[:, None] * gam)
    hess[np.diag_indices_from(hess)] += rd
    grad = gam.T @ (qd * res) + rd * du_ref
    u_flat = inputs.reshape(-1)
    return CondensedQP(hess, grad, params.thrust_min - u_flat, params.thrust_max - u_flat)


def _sqp_iteration(x0, inputs, ref, cfg, params, dt):
    states = _rollout(x0, inputs, params, dt)
    cost0 = tracking_cost(states, inputs, ref, cfg)
    hess, grad, lb, ub = condensed_qp(x0, inputs, ref, cfg, params, states)
    n = cfg.horizon_steps
    u_flat = inputs.reshape(-1)
    qp = solve_box_qp(hess, grad, lb, ub, max_iter=cfg.qp_max_iter, tol=cfg.qp_tolerance)
    step = qp.x

    # projected gradient at the linearization point
    pg = np.where((u_flat <= params.thrust_min) & (grad > 0), 0.0, grad)
    pg = np.where((u_flat >= params.thrust_max) & (pg < 0), 0.0, pg)
    kkt = float(np.abs(pg).max())

    slope = float(grad @ step)
    alpha = 1.0
    while alpha >= 2.0**-8:
        trial = np.clip((u_flat + alpha * step).reshape(n, NU), params.thrust_min, params.thrust_max)
        trial_states = _rollout(x0, trial, params, dt)
        cost = tracking_cost(trial_states, trial, ref, cfg)
        if cost <= cost0 + 1e-4 * alpha * min(slope, 0.0):
            return trial, trial_states, cost, kkt, qp.status
        alpha *= 0.5
    return inputs, states, cost0, kkt, qp.status


def solve(x0, ref, warm, cfg, params):
    """Run ``cfg.sqp_iters_per_step`` SQP iterations from the shifted guess.

    ``warm`` is the (already shifted) previous solution or ``None``, in which
    case the feedforward inputs clipped to the thrust box seed the guess.
    """
    x0 = _as_array(x0, NX)
    if not np.all(np.isfinite(x0)):
        raise SolverError("non-finite initial state")
    n, dt = cfg.horizon_steps, cfg.dt
    if ref.states.shape != (n + 1, NX) or ref.inputs.shape != (n, NU):
        raise InvalidArgument("reference window does not match the horizon")
    if warm is None:
        inputs = ref.inputs.copy()
    else:
        inputs = warm.inputs.copy()
    inputs = np.clip(inputs, params.thrust_min, params.thrust_max)

    status = "optimal"
    for _ in range(cfg.sqp_iters_per_step):
        inputs, states, cost, kkt, qp_status = _sqp_iteration(x0, inputs, ref, cfg, params, dt)
        if qp_status != "optimal":
            status = qp_status
    return Solution(inputs=inputs, states=states, kkt_residual=kkt, qp_status=status, cost=cost)


class NMPC:
    """Receding-horizon controller owning its warm start.

    With ``cfg.integrator_enabled`` the controller accumulates position error
    and shifts the position reference by ``-integrator_weight * integral``.
    """

    def __init__(self, params, cfg, control_dt):
        self.params = params
        self.cfg = cfg
        self.control_dt = control_dt
        self.reset()

    def reset(self):
        self.warm = None
        self.integral = np.zeros(3)

    def step(self, x, ref):
        x = _as_array(x, NX)
        if self.cfg.integrator_enabled:
            self.integral = integrator_update(self.integral, x[0:3] - ref.states[0, 0:3],
                                              self.control_dt, self.cfg)
            ref = ref.offset_positions(-np.asarray(self.cfg.integrator_weight) * self.integral)
        warm = None
        if self.warm is not None:
            warm = shift_warm_start(self.warm, min(1.0, self.control_dt / self.cfg.dt))
        sol = solve(x, ref, warm, self.cfg, self.params)
        self.warm = sol
        return sol
