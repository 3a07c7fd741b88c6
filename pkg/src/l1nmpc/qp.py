"""Dense box-constrained convex QP via a primal active-set method.

Solves ``min 0.5 x'Hx + g'x  s.t.  lb <= x <= ub`` for symmetric positive
definite ``H``. Iterates stay feasible, so a capped run still returns a
usable point.
"""
from typing import NamedTuple

import numpy as np

FREE, LOWER, UPPER = 0, -1, 1


class BoxQPResult(NamedTuple):
    x: np.ndarray
    status: str        # "optimal" or "max_iter"
    iterations: int
    active: np.ndarray  # FREE / LOWER / UPPER per variable


def _equality_target(H, g, x, free):
    """Minimizer over the free variables with the others held at ``x``."""
    target = x.copy()
    if free.any():
        fixed = ~free
        rhs = -g[free]
        if fixed.any():
            rhs -= H[np.ix_(free, fixed)] @ x[fixed]
        target[free] = np.linalg.solve(H[np.ix_(free, free)], rhs)
    return target


def solve_box_qp(H, g, lb, ub, x0=None, max_iter=50, tol=1e-10):
    n = len(g)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    if x0 is None:
        # clipped unconstrained minimizer: a good initial working set
        x0 = np.linalg.solve(H, -g)
    x = np.clip(x0, lb, ub)
    active = np.full(n, FREE)
    active[x <= lb] = LOWER
    active[x >= ub] = UPPER

    scale = 1.0 + np.abs(g).max(initial=0.0)
    for it in range(1, max_iter + 1):
        free = active == FREE
        target = _equality_target(H, g, x, free)
        p = target - x
        if np.abs(p).max(initial=0.0) <= tol * (1.0 + np.abs(x).max(initial=0.0)):
            grad = H @ x + g
            # multiplier of a bound: grad at LOWER must be >= 0, at UPPER <= 0
            mult = np.where(active == LOWER, grad, np.where(active == UPPER, -grad, np.inf))
            worst = int(np.argmin(mult))
            if mult[worst] >= -tol * scale:
                return BoxQPResult(target, "optimal", it, active)
            active[worst] = FREE
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(p < 0, (lb - x) / p, np.where(p > 0, (ub - x) / p, np.inf))
        ratio[~free] = np.inf
        block = int(np.argmin(ratio))
        if ratio[block] < 1.0:
            x = x + max(ratio[block], 0.0) * p
            if p[block] < 0:
                active[block], x[block] = LOWER, lb[block]
            else:
                active[block], x[block] = UPPER, ub[block]
        else:
            x = target
    return BoxQPResult(np.clip(x, lb, ub), "max_iter", max_iter, active)
