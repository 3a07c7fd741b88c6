"""Plant-side model mismatch and external force fields.

Controllers always keep the nominal :class:`VehicleParams`; the simulator
integrates the copy returned by :func:`apply_mismatch` plus the force from
:func:`external_force`.
"""
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidArgument, InvalidMismatch

WIND_MODES = ("none", "constant", "fan_zone")


@dataclass(frozen=True)
class ParamMismatch:
    mass_delta: float = 0.0
    inertia_scale: tuple = (1.0, 1.0, 1.0)
    arm_scale: tuple = (1.0, 1.0, 1.0, 1.0)
    drag_scale: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "mass_delta", float(self.mass_delta))
        for name, n in (("inertia_scale", 3), ("arm_scale", 4), ("drag_scale", 3)):
            v = tuple(float(s) for s in np.ravel(getattr(self, name)))
            if len(v) != n:
                raise InvalidMismatch(f"{name} needs {n} entries")
            object.__setattr__(self, name, v)

    @property
    def is_identity(self):
        return self == ParamMismatch()


@dataclass(frozen=True)
class WindField:
    mode: str = "none"
    force: tuple = (0.0, 0.0, 0.0)
    zone_center: tuple = (0.0, 0.0, 0.0)
    zone_radius: float = 1.0
    zone_force: tuple = (0.0, 0.0, 0.0)
    seed: int = 0  # reserved for stochastic fields

    def __post_init__(self):
        if self.mode not in WIND_MODES:
            raise InvalidArgument(f"unknown wind mode {self.mode!r}")
        for name in ("force", "zone_center", "zone_force"):
            v = tuple(float(s) for s in np.ravel(getattr(self, name)))
            if len(v) != 3:
                raise InvalidArgument(f"{name} needs 3 entries")
            object.__setattr__(self, name, v)
        object.__setattr__(self, "zone_radius", float(self.zone_radius))
        if self.mode == "fan_zone" and not self.zone_radius > 0:
            raise InvalidArgument("fan zone radius must be positive")


def apply_mismatch(nominal, m):
    """Return the plant parameters; ``nominal`` is left untouched.

    ``arm_scale`` is a per-rotor length scale applied to both of that rotor's
    distances to the body axes.
    """
    arm = np.asarray(m.arm_scale)
    try:
        return replace(
            nominal,
            mass=nominal.mass + m.mass_delta,
            inertia_diag=tuple(np.asarray(nominal.inertia_diag) * m.inertia_scale),
            arm_x=tuple(np.asarray(nominal.arm_x) * arm),
            arm_y=tuple(np.asarray(nominal.arm_y) * arm),
            drag_matrix_diag=tuple(np.asarray(nominal.drag_matrix_diag) * m.drag_scale),
        )
    except InvalidArgument as exc:
        raise InvalidMismatch(f"mismatch yields invalid plant: {exc}") from exc


def external_force(t, state, w):
    """World-frame disturbance force [N] acting on the plant at time ``t``."""
    if w.mode == "constant":
        return np.array(w.force)
    if w.mode == "fan_zone":
        pos = state.position if hasattr(state, "position") else np.asarray(state)[:3]
        if np.linalg.norm(pos - np.asarray(w.zone_center)) < w.zone_radius:
            return np.array(w.zone_force)
    return np.zeros(3)
