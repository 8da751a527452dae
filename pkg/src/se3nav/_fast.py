"""Compiled inner loop of the Lie-group integrator.

Same arithmetic as the numpy fallback in :mod:`se3nav.engine`
(``_step_arrays_numpy``); an equivalence test keeps the two in lockstep.
Importing this module triggers (cached) JIT compilation.
"""

import math

import numpy as np
from numba import njit

_SMALL = 1e-4


@njit(cache=True, fastmath=False)
def _cross(a, b, out):
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


@njit(cache=True, fastmath=False)
def _xi_rate(J, Jinv, mass, xi, wrench, out):
    om = xi[:3]
    v = xi[3:]
    mu = J @ om
    tmp = np.empty(3)
    _cross(mu, om, tmp)
    tmp += wrench[:3]
    out[:3] = Jinv @ tmp
    _cross(om, v, tmp)
    for k in range(3):
        out[3 + k] = wrench[3 + k] / mass - tmp[k]


@njit(cache=True, fastmath=False)
def _bracket(u, p, out):
    tmp = np.empty(3)
    _cross(u[:3], p[:3], tmp)
    out[0] = tmp[0]
    out[1] = tmp[1]
    out[2] = tmp[2]
    _cross(u[:3], p[3:], tmp)
    out[3] = tmp[0]
    out[4] = tmp[1]
    out[5] = tmp[2]
    _cross(p[:3], u[3:], tmp)
    out[3] -= tmp[0]
    out[4] -= tmp[1]
    out[5] -= tmp[2]


@njit(cache=True, fastmath=False)
def _dexpinv_body(u, p, out):
    c1 = np.empty(6)
    c2 = np.empty(6)
    _bracket(u, p, c1)
    _bracket(u, c1, c2)
    for k in range(6):
        out[k] = p[k] + 0.5 * c1[k] + c2[k] / 12.0


@njit(cache=True, fastmath=False)
def _exp6(sig, R_out, q_out):
    om = sig[:3]
    v = sig[3:]
    th2 = om[0] * om[0] + om[1] * om[1] + om[2] * om[2]
    th = math.sqrt(th2)
    if th < _SMALL:
        a = 1.0 - th2 / 6.0
        b = 0.5 - th2 / 24.0
        c = 1.0 / 6.0 - th2 / 120.0
    else:
        s = math.sin(th)
        co = math.cos(th)
        a = s / th
        b = (1.0 - co) / th2
        c = (th - s) / (th2 * th)
    W = np.zeros((3, 3))
    W[0, 1] = -om[2]
    W[0, 2] = om[1]
    W[1, 0] = om[2]
    W[1, 2] = -om[0]
    W[2, 0] = -om[1]
    W[2, 1] = om[0]
    W2 = W @ W
    for r in range(3):
        for cidx in range(3):
            eye = 1.0 if r == cidx else 0.0
            R_out[r, cidx] = eye + a * W[r, cidx] + b * W2[r, cidx]
    V0 = np.empty((3, 3))
    for r in range(3):
        for cidx in range(3):
            eye = 1.0 if r == cidx else 0.0
            V0[r, cidx] = eye + b * W[r, cidx] + c * W2[r, cidx]
    q_out[:] = V0 @ v


@njit(cache=True, fastmath=False)
def step_kernel(R, q, xi, wrench, J, Jinv, mass, dt, rkmk4):
    s = R.shape[0]
    R_new = np.empty_like(R)
    q_new = np.empty_like(q)
    xi_new = np.empty_like(xi)
    sig = np.empty(6)
    eR = np.empty((3, 3))
    eq = np.empty(3)
    for i in range(s):
        w = wrench[i]
        x0 = xi[i]
        if rkmk4:
            k1x = np.empty(6)
            k2x = np.empty(6)
            k3x = np.empty(6)
            k4x = np.empty(6)
            k2s = np.empty(6)
            k3s = np.empty(6)
            k4s = np.empty(6)
            stage = np.empty(6)
            arg = np.empty(6)
            _xi_rate(J[i], Jinv[i], mass[i], x0, w, k1x)
            # stage 2
            for k in range(6):
                stage[k] = x0[k] + 0.5 * dt * k1x[k]
            _xi_rate(J[i], Jinv[i], mass[i], stage, w, k2x)
            for k in range(6):
                arg[k] = 0.5 * dt * x0[k]
            _dexpinv_body(arg, stage, k2s)
            # stage 3
            for k in range(6):
                stage[k] = x0[k] + 0.5 * dt * k2x[k]
            _xi_rate(J[i], Jinv[i], mass[i], stage, w, k3x)
            for k in range(6):
                arg[k] = 0.5 * dt * k2s[k]
            _dexpinv_body(arg, stage, k3s)
            # stage 4
            for k in range(6):
                stage[k] = x0[k] + dt * k3x[k]
            _xi_rate(J[i], Jinv[i], mass[i], stage, w, k4x)
            for k in range(6):
                arg[k] = dt * k3s[k]
            _dexpinv_body(arg, stage, k4s)
            for k in range(6):
                sig[k] = dt / 6.0 * (x0[k] + 2.0 * k2s[k] + 2.0 * k3s[k] + k4s[k])
                xi_new[i, k] = x0[k] + dt / 6.0 * (
                    k1x[k] + 2.0 * k2x[k] + 2.0 * k3x[k] + k4x[k]
                )
        else:
            rate = np.empty(6)
            _xi_rate(J[i], Jinv[i], mass[i], x0, w, rate)
            for k in range(6):
                sig[k] = dt * x0[k]
                xi_new[i, k] = x0[k] + dt * rate[k]

        _exp6(sig, eR, eq)
        R_new[i] = R[i] @ eR
        q_new[i] = R[i] @ eq + q[i]

        # orthonormality drift check (polar fix happens outside, rarely)
        drift = 0.0
        for r in range(3):
            for cidx in range(3):
                dot = 0.0
                for k in range(3):
                    dot += R_new[i, k, r] * R_new[i, k, cidx]
                eye = 1.0 if r == cidx else 0.0
                drift += abs(dot - eye)
        if drift > 1e-9:
            U, _, Vt = np.linalg.svd(R_new[i])
            D = np.eye(3)
            D[2, 2] = np.sign(np.linalg.det(U @ Vt))
            R_new[i] = U @ D @ Vt
    return R_new, q_new, xi_new
