"""Quaternion algebra, quadrotor rigid-body dynamics and the RK4 step.

The same RK4 map is shared by the simulator, the NMPC prediction model and
the L1 observer; all three go through :mod:`l1nmpc.kernels`.
"""
from dataclasses import dataclass, field, fields
from functools import cached_property

import numpy as np

from . import kernels
from .errors import IntegrationDiverged, InvalidArgument

_ZERO3 = np.zeros(3)


@dataclass(frozen=True)
class Quaternion:
    """Hamilton quaternion ``w + xi + yj + zk``."""

    w: float = 1.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    @classmethod
    def from_array(cls, a):
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    @classmethod
    def from_axis_angle(cls, axis, angle):
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        s = np.sin(0.5 * angle)
        return cls(np.cos(0.5 * angle), *(s * axis)).normalized()

    @classmethod
    def from_yaw(cls, yaw):
        return cls.from_axis_angle((0.0, 0.0, 1.0), yaw)

    def as_array(self):
        return np.array([self.w, self.x, self.y, self.z])

    def norm(self):
        return float(np.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2))

    def normalized(self):
        """Unit quaternion in canonical form (``w >= 0``)."""
        n = self.norm()
        if not np.isfinite(n) or n == 0.0:
            raise InvalidArgument("cannot normalize a zero or non-finite quaternion")
        if self.w < 0.0:
            n = -n
        return Quaternion(self.w / n, self.x / n, self.y / n, self.z / n)

    def conjugate(self):
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def __mul__(self, other):
        a, b = self, other
        return Quaternion(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )

    def rotation_matrix(self):
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ])

    def yaw(self):
        return float(np.arctan2(2 * (self.w * self.z + self.x * self.y),
                                1 - 2 * (self.y**2 + self.z**2)))


def quat_rotate(q, v):
    """Rotate ``v`` by ``q`` as ``q * [0, v] * conj(q)``."""
    if abs(q.norm() - 1.0) > 1e-6:
        raise InvalidArgument(f"quaternion is not unit-norm (|q| = {q.norm():.3g})")
    v = np.asarray(v, dtype=float)
    r = q * Quaternion(0.0, v[0], v[1], v[2]) * q.conjugate()
    return np.array([r.x, r.y, r.z])


def _vec(v, n, name):
    a = np.array(v, dtype=float).reshape(-1)
    if a.shape != (n,):
        raise InvalidArgument(f"{name} must have {n} entries, got {a.shape}")
    return a


@dataclass(frozen=True)
class VehicleState:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    attitude: Quaternion = Quaternion()
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    body_rates: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "position", _vec(self.position, 3, "position"))
        object.__setattr__(self, "velocity", _vec(self.velocity, 3, "velocity"))
        object.__setattr__(self, "body_rates", _vec(self.body_rates, 3, "body_rates"))

    def as_array(self):
        return np.concatenate([self.position, self.attitude.as_array(),
                               self.velocity, self.body_rates])

    @classmethod
    def from_array(cls, x):
        x = np.asarray(x, dtype=float)
        return cls(x[0:3], Quaternion.from_array(x[3:7]), x[7:10], x[10:13])

    def is_finite(self):
        return bool(np.all(np.isfinite(self.as_array())))

    def __eq__(self, other):
        if not isinstance(other, VehicleState):
            return NotImplemented
        return bool(np.array_equal(self.as_array(), other.as_array()))

    __hash__ = None


@dataclass(frozen=True)
class RotorCommand:
    thrusts: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def __post_init__(self):
        t = _vec(self.thrusts, 4, "thrusts")
        if not np.all(np.isfinite(t)):
            raise InvalidArgument("rotor thrusts must be finite")
        object.__setattr__(self, "thrusts", t)

    @property
    def collective(self):
        return float(self.thrusts.sum())

    def __eq__(self, other):
        if not isinstance(other, RotorCommand):
            return NotImplemented
        return bool(np.array_equal(self.thrusts, other.thrusts))

    __hash__ = None


@dataclass(frozen=True)
class StateDerivative:
    d_position: np.ndarray
    d_attitude: np.ndarray
    d_velocity: np.ndarray
    d_body_rates: np.ndarray

    def as_array(self):
        return np.concatenate([self.d_position, self.d_attitude,
                               self.d_velocity, self.d_body_rates])


@dataclass(frozen=True)
class VehicleParams:
    """Physical parameters of the vehicle.

    ``arm_x[i]`` is the distance of rotor ``i`` to the body x axis and
    ``arm_y[i]`` its distance to the body y axis. Rotor order and torque
    signs follow the allocation matrix in :func:`allocation_matrix`.
    """

    mass: float
    inertia_diag: tuple
    arm_x: tuple
    arm_y: tuple
    drag_torque_coeff: float
    drag_matrix_diag: tuple
    thrust_max: float
    gravity: float = 9.81
    thrust_min: float = 0.0

    def __post_init__(self):
        for name, n in (("inertia_diag", 3), ("arm_x", 4), ("arm_y", 4), ("drag_matrix_diag", 3)):
            object.__setattr__(self, name, tuple(float(v) for v in _vec(getattr(self, name), n, name)))
        for name in ("mass", "drag_torque_coeff", "gravity", "thrust_min", "thrust_max"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not np.all(np.isfinite(self.packed)):
            raise InvalidArgument("vehicle parameters must be finite")
        if self.mass <= 0:
            raise InvalidArgument("mass must be positive")
        if min(self.inertia_diag) <= 0:
            raise InvalidArgument("inertia entries must be positive")
        if not 0 <= self.thrust_min < self.thrust_max:
            raise InvalidArgument("need 0 <= thrust_min < thrust_max")
        if min(self.drag_matrix_diag) < 0:
            raise InvalidArgument("drag coefficients must be non-negative")
        if np.linalg.matrix_rank(self.allocation_matrix()) < 3:
            raise InvalidArgument("allocation matrix is rank deficient")

    def allocation_matrix(self):
        dx, dy, c = self.arm_x, self.arm_y, self.drag_torque_coeff
        return np.array([
            [-dx[0], -dx[1], dx[2], dx[3]],
            [dy[0], -dy[1], -dy[2], dy[3]],
            [-c, c, -c, c],
        ])

    @property
    def inertia(self):
        return np.array(self.inertia_diag)

    @property
    def hover_thrust(self):
        """Per-rotor thrust that balances gravity."""
        return self.mass * self.gravity / 4.0

    @cached_property
    def packed(self):
        p = np.concatenate([[self.mass], self.inertia_diag, self.arm_x, self.arm_y,
                            [self.drag_torque_coeff], self.drag_matrix_diag, [self.gravity]])
        p.setflags(write=False)
        return p

    def to_dict(self):
        return {f.name: (list(getattr(self, f.name)) if isinstance(getattr(self, f.name), tuple)
                         else getattr(self, f.name)) for f in fields(self)}


def allocation(thrusts, params):
    """Collective thrust and body torque produced by four rotor thrusts."""
    t = thrusts.thrusts if isinstance(thrusts, RotorCommand) else np.asarray(thrusts, dtype=float)
    return float(t.sum()), params.allocation_matrix() @ t


def _thrust_array(cmd):
    return cmd.thrusts if isinstance(cmd, RotorCommand) else _vec(cmd, 4, "thrusts")


def dynamics(state, cmd, params, ext_force=None, ext_torque=None):
    x = state.as_array()
    fe = _ZERO3 if ext_force is None else _vec(ext_force, 3, "ext_force")
    te = _ZERO3 if ext_torque is None else _vec(ext_torque, 3, "ext_torque")
    xd = kernels.dynamics(x, _thrust_array(cmd), params.packed, fe, te)
    return StateDerivative(xd[0:3], xd[3:7], xd[7:10], xd[10:13])


def rk4_array(x, u, params, dt, ext_force=_ZERO3, ext_torque=_ZERO3):
    """Array-level RK4 step with renormalized, canonical attitude."""
    out = kernels.rk4(x, u, params.packed, dt, ext_force, ext_torque, True)
    if not np.all(np.isfinite(out)):
        raise IntegrationDiverged("non-finite state after RK4 step")
    return out


def rk4_step(state, cmd, params, dt, ext_force=None, ext_torque=None):
    if not dt > 0:
        raise InvalidArgument("dt must be positive")
    fe = _ZERO3 if ext_force is None else _vec(ext_force, 3, "ext_force")
    te = _ZERO3 if ext_torque is None else _vec(ext_torque, 3, "ext_torque")
    return VehicleState.from_array(
        rk4_array(state.as_array(), _thrust_array(cmd), params, float(dt), fe, te))
