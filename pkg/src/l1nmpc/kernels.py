"""Backend selection for the numerical hot paths.

The compiled extension is used when it imports; setting ``L1NMPC_PURE=1``
forces the numpy fallback. Both expose the same functions.

Packed parameter vector (length 17)::

    0       mass
    1..3    inertia diagonal Jx, Jy, Jz
    4..7    d_x of rotors 0..3 (distance to the body x axis)
    8..11   d_y of rotors 0..3 (distance to the body y axis)
    12      rotor drag-torque coefficient
    13..15  linear drag diagonal
    16      gravity magnitude
"""
import os

from . import _kernels_py as python_backend

NPARAMS = 17

compiled_backend = None
if os.environ.get("L1NMPC_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND_NAME = "compiled" if compiled_backend is not None else "python"

dynamics = backend.dynamics
rk4 = backend.rk4
rollout = backend.rollout
linearize = backend.linearize
linearize_traj = backend.linearize_traj
l1_adapt = backend.l1_adapt
l1_observe = backend.l1_observe
