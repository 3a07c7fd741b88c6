"""Pure numpy implementations of the compiled kernels.

Every function mirrors :mod:`l1nmpc._kernels` argument for argument. The
right-hand side is vectorized over leading axes so finite-difference
linearization of a whole horizon runs as one batched RK4.
"""
import numpy as np

NX = 13
NU = 4


def _rhs(x, u, p, fext, text):
    qw, qx, qy, qz = x[..., 3], x[..., 4], x[..., 5], x[..., 6]
    wx, wy, wz = x[..., 10], x[..., 11], x[..., 12]
    m, jx, jy, jz = p[0], p[1], p[2], p[3]
    thrust = u[..., 0] + u[..., 1] + u[..., 2] + u[..., 3]

    out = np.empty(np.broadcast_shapes(x.shape, u.shape[:-1] + (NX,)))
    out[..., 0:3] = x[..., 7:10]
    out[..., 3] = 0.5 * (-qx * wx - qy * wy - qz * wz)
    out[..., 4] = 0.5 * (qw * wx + qy * wz - qz * wy)
    out[..., 5] = 0.5 * (qw * wy - qx * wz + qz * wx)
    out[..., 6] = 0.5 * (qw * wz + qx * wy - qy * wx)

    out[..., 7] = 2.0 * (qx * qz + qw * qy) * thrust / m - p[13] * x[..., 7] + fext[0] / m
    out[..., 8] = 2.0 * (qy * qz - qw * qx) * thrust / m - p[14] * x[..., 8] + fext[1] / m
    out[..., 9] = ((qw * qw - qx * qx - qy * qy + qz * qz) * thrust / m - p[16]
                   - p[15] * x[..., 9] + fext[2] / m)

    u0, u1, u2, u3 = u[..., 0], u[..., 1], u[..., 2], u[..., 3]
    tx = -p[4] * u0 - p[5] * u1 + p[6] * u2 + p[7] * u3 + text[0]
    ty = p[8] * u0 - p[9] * u1 - p[10] * u2 + p[11] * u3 + text[1]
    tz = p[12] * (-u0 + u1 - u2 + u3) + text[2]
    out[..., 10] = (tx - (wy * jz * wz - wz * jy * wy)) / jx
    out[..., 11] = (ty - (wz * jx * wx - wx * jz * wz)) / jy
    out[..., 12] = (tz - (wx * jy * wy - wy * jx * wx)) / jz
    return out


def _normalize(x, canonical):
    n = np.sqrt(np.sum(x[..., 3:7] ** 2, axis=-1))
    if canonical:
        n = np.where(x[..., 3] < 0.0, -n, n)
    x[..., 3:7] /= n[..., None]
    return x


_Z3 = np.zeros(3)


def _rk4(x, u, p, dt, fext=_Z3, text=_Z3, canonical=False):
    k1 = _rhs(x, u, p, fext, text)
    k2 = _rhs(x + 0.5 * dt * k1, u, p, fext, text)
    k3 = _rhs(x + 0.5 * dt * k2, u, p, fext, text)
    k4 = _rhs(x + dt * k3, u, p, fext, text)
    out = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return _normalize(out, canonical)


def _rhs1(x, u, p, fe, te):
    # single state on plain floats; numpy overhead dominates at this size
    qw, qx, qy, qz = x[3], x[4], x[5], x[6]
    wx, wy, wz = x[10], x[11], x[12]
    m, jx, jy, jz = p[0], p[1], p[2], p[3]
    u0, u1, u2, u3 = u
    thrust = u0 + u1 + u2 + u3
    tx = -p[4] * u0 - p[5] * u1 + p[6] * u2 + p[7] * u3 + te[0]
    ty = p[8] * u0 - p[9] * u1 - p[10] * u2 + p[11] * u3 + te[1]
    tz = p[12] * (-u0 + u1 - u2 + u3) + te[2]
    return [
        x[7], x[8], x[9],
        0.5 * (-qx * wx - qy * wy - qz * wz),
        0.5 * (qw * wx + qy * wz - qz * wy),
        0.5 * (qw * wy - qx * wz + qz * wx),
        0.5 * (qw * wz + qx * wy - qy * wx),
        2.0 * (qx * qz + qw * qy) * thrust / m - p[13] * x[7] + fe[0] / m,
        2.0 * (qy * qz - qw * qx) * thrust / m - p[14] * x[8] + fe[1] / m,
        (qw * qw - qx * qx - qy * qy + qz * qz) * thrust / m - p[16] - p[15] * x[9] + fe[2] / m,
        (tx - (wy * jz * wz - wz * jy * wy)) / jx,
        (ty - (wz * jx * wx - wx * jz * wz)) / jy,
        (tz - (wx * jy * wy - wy * jx * wx)) / jz,
    ]


def _rk4_1(x, u, p, dt, fe, te, canonical):
    x, u, p, fe, te = list(x), list(u), list(p), list(fe), list(te)
    k1 = _rhs1(x, u, p, fe, te)
    k2 = _rhs1([a + 0.5 * dt * b for a, b in zip(x, k1)], u, p, fe, te)
    k3 = _rhs1([a + 0.5 * dt * b for a, b in zip(x, k2)], u, p, fe, te)
    k4 = _rhs1([a + dt * b for a, b in zip(x, k3)], u, p, fe, te)
    out = np.array([a + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
                    for a, b1, b2, b3, b4 in zip(x, k1, k2, k3, k4)])
    return _normalize(out, canonical)


def dynamics(x, u, p, fext, text):
    return _rhs(np.asarray(x, float), np.asarray(u, float), p, fext, text)


def rk4(x, u, p, dt, fext, text, canonical=True):
    x, u = np.asarray(x, float), np.asarray(u, float)
    if x.ndim == 1 and u.ndim == 1:
        return _rk4_1(x, u, p, dt, fext, text, canonical)
    return _rk4(x, u, p, dt, fext, text, canonical)


def rollout(x0, inputs, p, dt):
    n = inputs.shape[0]
    out = np.empty((n + 1, NX))
    out[0] = x0
    for k in range(n):
        out[k + 1] = _rk4_1(out[k], inputs[k], p, dt, _Z3, _Z3, False)
    return out


def _steps(v):
    return np.maximum(1e-6, 1e-6 * np.abs(v))


def linearize_traj(states, inputs, p, dt):
    n = inputs.shape[0]
    x = states[:n]
    hx = _steps(x)
    hu = _steps(inputs)
    # batch layout per node: [nominal, 13 state perturbations, 4 input perturbations]
    xb = np.repeat(x[:, None, :], 1 + NX + NU, axis=1)
    ub = np.repeat(inputs[:, None, :], 1 + NX + NU, axis=1)
    idx = np.arange(NX)
    xb[:, 1 + idx, idx] += hx
    iu = np.arange(NU)
    ub[:, 1 + NX + iu, iu] += hu
    f = _rk4(xb, ub, p, dt)
    f0 = f[:, :1, :]
    a = ((f[:, 1:1 + NX, :] - f0) / hx[:, :, None]).transpose(0, 2, 1)
    b = ((f[:, 1 + NX:, :] - f0) / hu[:, :, None]).transpose(0, 2, 1)
    return np.ascontiguousarray(a), np.ascontiguousarray(b)


def linearize(x, u, p, dt):
    a, b = linearize_traj(np.asarray(x, float)[None, :], np.asarray(u, float)[None, :], p, dt)
    return a[0], b[0]


def _rotation(q):
    qw, qx, qy, qz = q
    return np.array([
        [1.0 - 2.0 * (qy * qy + qz * qz), 2.0 * (qx * qy - qw * qz), 2.0 * (qx * qz + qw * qy)],
        [2.0 * (qx * qy + qw * qz), 1.0 - 2.0 * (qx * qx + qz * qz), 2.0 * (qy * qz - qw * qx)],
        [2.0 * (qx * qz - qw * qy), 2.0 * (qy * qz + qw * qx), 1.0 - 2.0 * (qx * qx + qy * qy)],
    ])


def l1_adapt(z_hat, z_meas, quat, u_prev, g0_inv, gain, decay, clip):
    r = _rotation(quat)
    z_tilde = z_hat - z_meas
    w = gain * z_tilde
    wb = np.concatenate([r.T @ w[:3], w[3:]])
    raw = -(g0_inv @ wb)
    sigma = np.clip(raw, -clip, clip)
    clipped = bool(np.any(sigma != raw))
    u_l1 = u_prev * decay - sigma[:4] * (1.0 - decay)
    return sigma, u_l1, z_tilde, clipped


def l1_observe(z_hat, z_meas, quat, u_mpc, u_l1, sigma, p, as_diag, z_tilde, ts):
    x = np.concatenate([_Z3, quat, z_meas])
    nominal = _rk4_1(x, u_mpc, p, ts, _Z3, _Z3, False)[7:13] - z_meas
    r = _rotation(quat)
    um = u_l1 + sigma[:4]
    dv = (r[:, 2] * um.sum() + r[:, 0] * sigma[4] + r[:, 1] * sigma[5]) / p[0]
    tau = np.array([
        -p[4] * um[0] - p[5] * um[1] + p[6] * um[2] + p[7] * um[3],
        p[8] * um[0] - p[9] * um[1] - p[10] * um[2] + p[11] * um[3],
        p[12] * (-um[0] + um[1] - um[2] + um[3]),
    ])
    return z_hat + nominal + (np.concatenate([dv, tau / p[1:4]]) + as_diag * z_tilde) * ts
