"""Reference trajectories sampled into NMPC reference windows."""
import csv
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, ParseError
from .nmpc import ReferenceWindow
from .rigid_body import Quaternion, RotorCommand, VehicleState


def hover_feedforward(params):
    return RotorCommand(np.full(4, params.hover_thrust))


@dataclass(frozen=True)
class CircleSpec:
    radius: float
    v_peak: float
    ramp_time: float
    center: tuple
    altitude: float
    duration: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != 3:
            raise InvalidArgument("center needs 3 entries")
        if not self.radius > 0 or not self.v_peak > 0:
            raise InvalidArgument("radius and v_peak must be positive")
        if self.ramp_time < 0 or not self.duration > 0:
            raise InvalidArgument("need ramp_time >= 0 and duration > 0")


class CircleTrajectory:
    """Horizontal circle with a linear speed ramp and yaw along the velocity."""

    def __init__(self, spec, params):
        self.spec = spec
        self.duration = spec.duration
        self._ff = hover_feedforward(params)

    def speed(self, t):
        s = self.spec
        if s.ramp_time > 0 and t < s.ramp_time:
            return s.v_peak * t / s.ramp_time
        return s.v_peak

    def angle(self, t):
        s = self.spec
        if s.ramp_time > 0 and t < s.ramp_time:
            return s.v_peak * t * t / (2.0 * s.ramp_time * s.radius)
        return (s.v_peak * s.ramp_time / 2.0 + s.v_peak * (t - s.ramp_time)) / s.radius

    def sample(self, t):
        if not 0.0 <= t <= self.duration:
            raise InvalidArgument(f"t={t} outside [0, {self.duration}]")
        return self.evaluate(t)

    def evaluate(self, t):
        """Sample without the range check; the circle continues past its end."""
        states, _ = self.evaluate_many(np.array([float(t)]))
        return VehicleState.from_array(states[0]), self._ff

    def evaluate_many(self, times):
        """Stacked ``(len(times), 13)`` states for a vector of sample times."""
        s = self.spec
        t = np.asarray(times, dtype=float)
        ramp = (t < s.ramp_time) if s.ramp_time > 0 else np.zeros(t.shape, bool)
        tr = max(s.ramp_time, 1e-300)
        v = np.where(ramp, s.v_peak * t / tr, s.v_peak)
        th = np.where(ramp, s.v_peak * t * t / (2.0 * tr * s.radius),
                      (s.v_peak * s.ramp_time / 2.0 + s.v_peak * (t - s.ramp_time)) / s.radius)
        c, sn = np.cos(th), np.sin(th)
        out = np.zeros((t.size, 13))
        out[:, 0] = s.center[0] + s.radius * c
        out[:, 1] = s.center[1] + s.radius * sn
        out[:, 2] = s.center[2] + s.altitude
        half = 0.5 * (th + 0.5 * np.pi)
        q = np.stack([np.cos(half), np.zeros_like(half), np.zeros_like(half), np.sin(half)], axis=1)
        q[q[:, 0] < 0] *= -1.0
        out[:, 3:7] = q
        out[:, 7] = -v * sn
        out[:, 8] = v * c
        out[:, 12] = v / s.radius
        return out, np.tile(self._ff.thrusts, (t.size, 1))


class HoverTrajectory:
    def __init__(self, point, duration, params):
        self.point = np.asarray(point, dtype=float)
        self.duration = float(duration)
        self._ff = hover_feedforward(params)
        self._state = VehicleState(self.point, Quaternion(), np.zeros(3), np.zeros(3))

    def sample(self, t):
        return self._state, self._ff

    evaluate = sample

    def evaluate_many(self, times):
        n = np.asarray(times).size
        return np.tile(self._state.as_array(), (n, 1)), np.tile(self._ff.thrusts, (n, 1))


def hover_sample(point, t, params):
    return HoverTrajectory(point, max(t, 0.0), params).sample(t)


def circle_sample(spec, t, params):
    return CircleTrajectory(spec, params).sample(t)


def slerp(q0, q1, f):
    a = q0.as_array()
    b = q1.as_array()
    d = float(a @ b)
    if d < 0.0:
        b, d = -b, -d
    if d > 1.0 - 1e-12:
        out = a + f * (b - a)
    else:
        th = np.arccos(min(d, 1.0))
        out = (np.sin((1.0 - f) * th) * a + np.sin(f * th) * b) / np.sin(th)
    return Quaternion.from_array(out).normalized()


TRACK_COLUMNS = {
    "position": ("px", "py", "pz"),
    "velocity": ("vx", "vy", "vz"),
    "attitude": ("qw", "qx", "qy", "qz"),
    "body_rates": ("wx", "wy", "wz"),
    "thrusts": ("T0", "T1", "T2", "T3"),
}


class TrackTrajectory:
    """Piecewise reference loaded from a comma-separated track file.

    Positions, velocities and rates are interpolated linearly, attitude by
    slerp, thrusts are held from the preceding row. Queries outside the
    file's time range are clamped to it.
    """

    def __init__(self, t, position, velocity, attitude, body_rates, thrusts):
        self.t = t
        self.position = position
        self.velocity = velocity
        self.attitude = attitude
        self.body_rates = body_rates
        self.thrusts = thrusts
        self.duration = float(t[-1])

    def sample(self, t):
        t = min(max(float(t), 0.0), self.duration)
        i = int(np.searchsorted(self.t, t, side="right")) - 1
        i = min(max(i, 0), len(self.t) - 1)
        if self.t[i] == t or i == len(self.t) - 1:
            state = VehicleState(self.position[i], self.attitude[i], self.velocity[i], self.body_rates[i])
            return state, RotorCommand(self.thrusts[i])
        f = (t - self.t[i]) / (self.t[i + 1] - self.t[i])

        def lerp(a):
            return a[i] + f * (a[i + 1] - a[i])

        state = VehicleState(lerp(self.position), slerp(self.attitude[i], self.attitude[i + 1], f),
                             lerp(self.velocity), lerp(self.body_rates))
        return state, RotorCommand(self.thrusts[i])

    evaluate = sample


def load_track(path, params):
    """Parse a track file into a :class:`TrackTrajectory`.

    Required columns are ``t, px, py, pz``; velocity (``vx..vz``), attitude
    (``qw..qz``), rates (``wx..wz``) and thrusts (``T0..T3``) are optional and
    default to finite-difference velocity, identity, zero and hover thrust.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty track file", 1) from None
        missing = [c for c in ("t",) + TRACK_COLUMNS["position"] if c not in header]
        if missing:
            raise ParseError(f"missing required columns {missing}", 1)
        col = {name: header.index(name) for name in header}
        groups = {g: all(c in col for c in cols) for g, cols in TRACK_COLUMNS.items()}
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", lineno)
            try:
                values = [float(c) for c in row]
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if not np.all(np.isfinite(values)):
                raise ParseError("non-finite value", lineno)
            if rows and values[col["t"]] <= rows[-1][1][col["t"]]:
                raise ParseError("time must be strictly increasing", lineno)
            if not rows and values[col["t"]] != 0.0:
                raise ParseError("first row must have t = 0", lineno)
            rows.append((lineno, values))
    if len(rows) < 2:
        raise ParseError("track needs at least two rows", None)

    data = np.array([v for _, v in rows])

    def take(group):
        return data[:, [col[c] for c in TRACK_COLUMNS[group]]]

    t = data[:, col["t"]]
    position = take("position")
    velocity = take("velocity") if groups["velocity"] else np.gradient(position, t, axis=0)
    rates = take("body_rates") if groups["body_rates"] else np.zeros((len(t), 3))
    thrusts = take("thrusts") if groups["thrusts"] else np.full((len(t), 4), params.hover_thrust)
    if groups["attitude"]:
        attitude = []
        for (lineno, _), q in zip(rows, take("attitude")):
            try:
                attitude.append(Quaternion.from_array(q).normalized())
            except InvalidArgument as exc:
                raise ParseError(str(exc), lineno) from None
    else:
        attitude = [Quaternion()] * len(t)
    return TrackTrajectory(t, position, velocity, attitude, rates, thrusts)


def reference_window(traj, t, horizon_steps, dt):
    """Sample ``traj`` at ``t + k dt`` for k = 0..N.

    Nodes past the end of the trajectory follow ``traj.evaluate``: analytic
    references continue, track files hold their last row.
    """
    times = t + dt * np.arange(horizon_steps + 1)
    if hasattr(traj, "evaluate_many"):
        states, inputs = traj.evaluate_many(times)
        return ReferenceWindow(states, inputs[:-1])
    states, inputs = [], []
    for k in range(horizon_steps + 1):
        s, u = traj.evaluate(t + k * dt)
        states.append(s.as_array())
        if k < horizon_steps:
            inputs.append(u.thrusts)
    return ReferenceWindow(np.array(states), np.array(inputs))
