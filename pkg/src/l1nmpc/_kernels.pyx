# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False, language_level=3
"""Compiled kernels for the quadrotor model.

State layout is ``[p(3), q(4) as w,x,y,z, v(3), omega(3)]``; the packed
parameter vector layout is documented in :mod:`l1nmpc.kernels`.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()

DEF NX = 13
DEF NU = 4


cdef inline void _rhs(const double* x, const double* u, const double* p,
                      const double* fext, const double* text, double* out) noexcept nogil:
    cdef double qw = x[3], qx = x[4], qy = x[5], qz = x[6]
    cdef double wx = x[10], wy = x[11], wz = x[12]
    cdef double m = p[0], jx = p[1], jy = p[2], jz = p[3]
    cdef double thrust = u[0] + u[1] + u[2] + u[3]
    cdef double tx, ty, tz

    out[0] = x[7]
    out[1] = x[8]
    out[2] = x[9]

    out[3] = 0.5 * (-qx * wx - qy * wy - qz * wz)
    out[4] = 0.5 * (qw * wx + qy * wz - qz * wy)
    out[5] = 0.5 * (qw * wy - qx * wz + qz * wx)
    out[6] = 0.5 * (qw * wz + qx * wy - qy * wx)

    # q [0, 0, 0, T] q_conj, third column of the (homogeneous) rotation matrix
    out[7] = 2.0 * (qx * qz + qw * qy) * thrust / m - p[13] * x[7] + fext[0] / m
    out[8] = 2.0 * (qy * qz - qw * qx) * thrust / m - p[14] * x[8] + fext[1] / m
    out[9] = ((qw * qw - qx * qx - qy * qy + qz * qz) * thrust / m - p[16]
              - p[15] * x[9] + fext[2] / m)

    tx = -p[4] * u[0] - p[5] * u[1] + p[6] * u[2] + p[7] * u[3] + text[0]
    ty = p[8] * u[0] - p[9] * u[1] - p[10] * u[2] + p[11] * u[3] + text[1]
    tz = p[12] * (-u[0] + u[1] - u[2] + u[3]) + text[2]

    out[10] = (tx - (wy * jz * wz - wz * jy * wy)) / jx
    out[11] = (ty - (wz * jx * wx - wx * jz * wz)) / jy
    out[12] = (tz - (wx * jy * wy - wy * jx * wx)) / jz


cdef inline void _normalize_quat(double* x, bint canonical) noexcept nogil:
    cdef double n = sqrt(x[3] * x[3] + x[4] * x[4] + x[5] * x[5] + x[6] * x[6])
    cdef int i
    if canonical and x[3] < 0.0:
        n = -n
    for i in range(3, 7):
        x[i] = x[i] / n


cdef inline void _rk4(const double* x, const double* u, const double* p, double dt,
                      const double* fext, const double* text, bint canonical,
                      double* out) noexcept nogil:
    cdef double k1[NX]
    cdef double k2[NX]
    cdef double k3[NX]
    cdef double k4[NX]
    cdef double tmp[NX]
    cdef int i
    _rhs(x, u, p, fext, text, k1)
    for i in range(NX):
        tmp[i] = x[i] + 0.5 * dt * k1[i]
    _rhs(tmp, u, p, fext, text, k2)
    for i in range(NX):
        tmp[i] = x[i] + 0.5 * dt * k2[i]
    _rhs(tmp, u, p, fext, text, k3)
    for i in range(NX):
        tmp[i] = x[i] + dt * k3[i]
    _rhs(tmp, u, p, fext, text, k4)
    for i in range(NX):
        out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    _normalize_quat(out, canonical)


cdef double _ZERO3[3]
_ZERO3[0] = 0.0
_ZERO3[1] = 0.0
_ZERO3[2] = 0.0


def dynamics(const double[::1] x, const double[::1] u, const double[::1] p,
             const double[::1] fext, const double[::1] text):
    out = np.empty(NX)
    cdef double[::1] o = out
    _rhs(&x[0], &u[0], &p[0], &fext[0], &text[0], &o[0])
    return out


def rk4(const double[::1] x, const double[::1] u, const double[::1] p, double dt,
        const double[::1] fext, const double[::1] text, bint canonical=True):
    out = np.empty(NX)
    cdef double[::1] o = out
    _rk4(&x[0], &u[0], &p[0], dt, &fext[0], &text[0], canonical, &o[0])
    return out


def rollout(const double[::1] x0, const double[:, ::1] inputs, const double[::1] p, double dt):
    """Chain RK4 steps from ``x0`` over ``inputs`` (N x 4); returns (N+1) x 13."""
    cdef Py_ssize_t n = inputs.shape[0]
    out = np.empty((n + 1, NX))
    cdef double[:, ::1] s = out
    cdef Py_ssize_t k, i
    for i in range(NX):
        s[0, i] = x0[i]
    with nogil:
        for k in range(n):
            _rk4(&s[k, 0], &inputs[k, 0], &p[0], dt, _ZERO3, _ZERO3, False, &s[k + 1, 0])
    return out


cdef inline double _step_size(double v) noexcept nogil:
    cdef double h = 1e-6 * fabs(v)
    return h if h > 1e-6 else 1e-6


cdef void _linearize(const double* x, const double* u, const double* p, double dt,
                     double* a, double* b) noexcept nogil:
    # a: 13x13 row-major, b: 13x4 row-major; forward differences
    cdef double f0[NX]
    cdef double f1[NX]
    cdef double xp[NX]
    cdef double up[NU]
    cdef double h
    cdef int i, j
    _rk4(x, u, p, dt, _ZERO3, _ZERO3, False, f0)
    for i in range(NX):
        xp[i] = x[i]
    for j in range(NX):
        h = _step_size(x[j])
        xp[j] = x[j] + h
        _rk4(xp, u, p, dt, _ZERO3, _ZERO3, False, f1)
        xp[j] = x[j]
        for i in range(NX):
            a[i * NX + j] = (f1[i] - f0[i]) / h
    for i in range(NU):
        up[i] = u[i]
    for j in range(NU):
        h = _step_size(u[j])
        up[j] = u[j] + h
        _rk4(x, up, p, dt, _ZERO3, _ZERO3, False, f1)
        up[j] = u[j]
        for i in range(NX):
            b[i * NU + j] = (f1[i] - f0[i]) / h


def linearize(const double[::1] x, const double[::1] u, const double[::1] p, double dt):
    a = np.empty((NX, NX))
    b = np.empty((NX, NU))
    cdef double[:, ::1] av = a
    cdef double[:, ::1] bv = b
    with nogil:
        _linearize(&x[0], &u[0], &p[0], dt, &av[0, 0], &bv[0, 0])
    return a, b


def linearize_traj(const double[:, ::1] states, const double[:, ::1] inputs, const double[::1] p, double dt):
    """Jacobians at every node; returns (N x 13 x 13, N x 13 x 4)."""
    cdef Py_ssize_t n = inputs.shape[0]
    a = np.empty((n, NX, NX))
    b = np.empty((n, NX, NU))
    cdef double[:, :, ::1] av = a
    cdef double[:, :, ::1] bv = b
    cdef Py_ssize_t k
    with nogil:
        for k in range(n):
            _linearize(&states[k, 0], &inputs[k, 0], &p[0], dt, &av[k, 0, 0], &bv[k, 0, 0])
    return a, b


cdef inline void _rotation(const double* q, double* r) noexcept nogil:
    cdef double qw = q[0], qx = q[1], qy = q[2], qz = q[3]
    r[0] = 1.0 - 2.0 * (qy * qy + qz * qz)
    r[1] = 2.0 * (qx * qy - qw * qz)
    r[2] = 2.0 * (qx * qz + qw * qy)
    r[3] = 2.0 * (qx * qy + qw * qz)
    r[4] = 1.0 - 2.0 * (qx * qx + qz * qz)
    r[5] = 2.0 * (qy * qz - qw * qx)
    r[6] = 2.0 * (qx * qz - qw * qy)
    r[7] = 2.0 * (qy * qz + qw * qx)
    r[8] = 1.0 - 2.0 * (qx * qx + qy * qy)


def l1_adapt(const double[::1] z_hat, const double[::1] z_meas, const double[::1] quat,
             const double[::1] u_prev, const double[:, ::1] g0_inv, const double[::1] gain,
             const double[::1] decay, const double[::1] clip):
    """Piecewise-constant adaptation followed by the discrete low-pass filter.

    ``gain`` is the diagonal of Phi^-1 e^{As Ts}, ``decay`` the per-channel
    factor e^{-w_co Ts}. Returns (sigma(6), u_l1(4), z_tilde(6), clipped).
    """
    cdef double r[9]
    cdef double w[6]
    cdef double wb[6]
    cdef double s
    cdef int i, j
    cdef bint clipped = False
    sigma = np.empty(6)
    u_l1 = np.empty(4)
    z_tilde = np.empty(6)
    cdef double[::1] sg = sigma
    cdef double[::1] ul = u_l1
    cdef double[::1] zt = z_tilde

    _rotation(&quat[0], r)
    for i in range(6):
        zt[i] = z_hat[i] - z_meas[i]
        w[i] = gain[i] * zt[i]
    # G = blockdiag(R, I) G0, so G^-1 w = G0^-1 blockdiag(R^T, I) w
    for i in range(3):
        wb[i] = r[i] * w[0] + r[3 + i] * w[1] + r[6 + i] * w[2]
        wb[3 + i] = w[3 + i]
    for i in range(6):
        s = 0.0
        for j in range(6):
            s = s + g0_inv[i, j] * wb[j]
        s = -s
        if s > clip[i]:
            s = clip[i]
            clipped = True
        elif s < -clip[i]:
            s = -clip[i]
            clipped = True
        sg[i] = s
    for i in range(4):
        ul[i] = u_prev[i] * decay[i] - sg[i] * (1.0 - decay[i])
    return sigma, u_l1, z_tilde, clipped


def l1_observe(const double[::1] z_hat, const double[::1] z_meas, const double[::1] quat,
               const double[::1] u_mpc, const double[::1] u_l1, const double[::1] sigma,
               const double[::1] p, const double[::1] as_diag, const double[::1] z_tilde, double ts):
    """Propagate the state predictor over one period.

    The nominal motion under ``u_mpc`` is the shared RK4 step; ``u_l1``, the
    estimates and the error feedback enter as rates held over the period.
    """
    cdef double r[9]
    cdef double um[4]
    cdef double dz[6]
    cdef double x[NX]
    cdef double xn[NX]
    cdef double m = p[0], tsum = 0.0
    cdef int i
    for i in range(3):
        x[i] = 0.0
    for i in range(4):
        x[3 + i] = quat[i]
    for i in range(6):
        x[7 + i] = z_meas[i]
    _rk4(x, &u_mpc[0], &p[0], ts, _ZERO3, _ZERO3, False, xn)
    _rotation(&quat[0], r)
    for i in range(4):
        um[i] = u_l1[i] + sigma[i]
        tsum = tsum + um[i]
    for i in range(3):
        dz[i] = (r[3 * i + 2] * tsum + r[3 * i] * sigma[4] + r[3 * i + 1] * sigma[5]) / m
    dz[3] = (-p[4] * um[0] - p[5] * um[1] + p[6] * um[2] + p[7] * um[3]) / p[1]
    dz[4] = (p[8] * um[0] - p[9] * um[1] - p[10] * um[2] + p[11] * um[3]) / p[2]
    dz[5] = p[12] * (-um[0] + um[1] - um[2] + um[3]) / p[3]
    out = np.empty(6)
    cdef double[::1] o = out
    for i in range(6):
        o[i] = z_hat[i] + (xn[7 + i] - z_meas[i]) + (dz[i] + as_diag[i] * z_tilde[i]) * ts
    return out
