# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled fast path for the fine-grid RK4 hot loop.

Mirrors :mod:`cablempc.fdm_numpy` (same stencils, same stage structure);
cross-checked against it in the test suite.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

from .errors import SingularConfigurationError
from .params import Mode

cnp.import_array()

ctypedef cnp.float64_t f64


cdef int _chain_accels(
    f64[:, ::1] r, f64[:, ::1] rt, f64[:, ::1] acc,
    int n_nodes, int mode, int top_kind,
    f64 fx, f64 fy, f64 fz,            # force or prescribed accel, per top_kind
    f64 h, f64 rho, f64 EA, f64 b_c, f64 b_p,
    f64 m_b, f64 m_p, f64 g0,
    f64[:, ::1] unit,                   # scratch (n_nodes-1, 3)
) except -1:
    cdef int i, k, n = n_nodes - 1
    cdef f64 dx, dy, dz, slen, inv, v2, vn, h2 = h * h
    cdef f64 tiny = 1e-12 * h

    for i in range(n):
        dx = r[i + 1, 0] - r[i, 0]
        dy = r[i + 1, 1] - r[i, 1]
        dz = r[i + 1, 2] - r[i, 2]
        slen = sqrt(dx * dx + dy * dy + dz * dz)
        if slen < tiny:
            raise SingularConfigurationError(
                f"coincident adjacent nodes (first offending segment index {i})"
            )
        inv = 1.0 / slen
        unit[i, 0] = dx * inv
        unit[i, 1] = dy * inv
        unit[i, 2] = dz * inv

    # interior nodes 1..n-1
    for i in range(1, n):
        vn = sqrt(rt[i, 0] * rt[i, 0] + rt[i, 1] * rt[i, 1] + rt[i, 2] * rt[i, 2])
        for k in range(3):
            acc[i, k] = (
                EA * (
                    (r[i + 1, k] - 2.0 * r[i, k] + r[i - 1, k]) / h2
                    + (unit[i - 1, k] - unit[i, k]) / h
                ) / rho
                - (b_c / rho) * vn * rt[i, k]
            )
        acc[i, 2] -= g0

    cdef f64 n1x, n1y, n1z, fac, den
    cdef f64 v0n, v1n, vNn, vNm1n
    cdef f64 gx, gy, gz, lx, ly, lz, gn

    # top boundary
    if top_kind == 1:
        acc[0, 0] = fx
        acc[0, 1] = fy
        acc[0, 2] = fz
    else:
        # contact force at node 1 from the central-difference tangent
        dx = (r[2, 0] - r[0, 0]) / (2.0 * h)
        dy = (r[2, 1] - r[0, 1]) / (2.0 * h)
        dz = (r[2, 2] - r[0, 2]) / (2.0 * h)
        slen = sqrt(dx * dx + dy * dy + dz * dz)
        if slen < 1e-12:
            raise SingularConfigurationError("zero-norm tangent vector")
        fac = EA * (1.0 - 1.0 / slen)
        n1x = fac * dx
        n1y = fac * dy
        n1z = fac * dz
        v0n = sqrt(rt[0, 0] * rt[0, 0] + rt[0, 1] * rt[0, 1] + rt[0, 2] * rt[0, 2])
        v1n = sqrt(rt[1, 0] * rt[1, 0] + rt[1, 1] * rt[1, 1] + rt[1, 2] * rt[1, 2])
        den = m_b + 0.5 * rho * h
        acc[0, 0] = (fx - 0.5 * h * (b_c * (v0n * rt[0, 0] + v1n * rt[1, 0]) + rho * acc[1, 0]) + n1x) / den
        acc[0, 1] = (fy - 0.5 * h * (b_c * (v0n * rt[0, 1] + v1n * rt[1, 1]) + rho * acc[1, 1]) + n1y) / den
        acc[0, 2] = (fz - (m_b + rho * h) * g0 - 0.5 * h * (b_c * (v0n * rt[0, 2] + v1n * rt[1, 2]) + rho * acc[1, 2]) + n1z) / den

    # tip boundary
    vNn = sqrt(rt[n, 0] * rt[n, 0] + rt[n, 1] * rt[n, 1] + rt[n, 2] * rt[n, 2])
    if mode == 0:
        # ghost node enforcing zero tip strain
        gx = r[n - 1, 0] + 2.0 * h * unit[n - 1, 0]
        gy = r[n - 1, 1] + 2.0 * h * unit[n - 1, 1]
        gz = r[n - 1, 2] + 2.0 * h * unit[n - 1, 2]
        lx = gx - r[n, 0]
        ly = gy - r[n, 1]
        lz = gz - r[n, 2]
        gn = sqrt(lx * lx + ly * ly + lz * lz)
        acc[n, 0] = (
            EA * ((gx - 2.0 * r[n, 0] + r[n - 1, 0]) / h2 + (unit[n - 1, 0] - lx / gn) / h) / rho
            - (b_c / rho) * vNn * rt[n, 0]
        )
        acc[n, 1] = (
            EA * ((gy - 2.0 * r[n, 1] + r[n - 1, 1]) / h2 + (unit[n - 1, 1] - ly / gn) / h) / rho
            - (b_c / rho) * vNn * rt[n, 1]
        )
        acc[n, 2] = (
            EA * ((gz - 2.0 * r[n, 2] + r[n - 1, 2]) / h2 + (unit[n - 1, 2] - lz / gn) / h) / rho
            - (b_c / rho) * vNn * rt[n, 2] - g0
        )
    else:
        # contact force at node n-1 from the central-difference tangent
        dx = (r[n, 0] - r[n - 2, 0]) / (2.0 * h)
        dy = (r[n, 1] - r[n - 2, 1]) / (2.0 * h)
        dz = (r[n, 2] - r[n - 2, 2]) / (2.0 * h)
        slen = sqrt(dx * dx + dy * dy + dz * dz)
        if slen < 1e-12:
            raise SingularConfigurationError("zero-norm tangent vector")
        fac = EA * (1.0 - 1.0 / slen)
        vNm1n = sqrt(rt[n - 1, 0] * rt[n - 1, 0] + rt[n - 1, 1] * rt[n - 1, 1] + rt[n - 1, 2] * rt[n - 1, 2])
        den = m_p + 0.5 * rho * h
        acc[n, 0] = (
            -fac * dx
            - (0.5 * h * b_c + b_p) * vNn * rt[n, 0]
            - 0.5 * h * (b_c * vNm1n * rt[n - 1, 0] + rho * acc[n - 1, 0])
        ) / den
        acc[n, 1] = (
            -fac * dy
            - (0.5 * h * b_c + b_p) * vNn * rt[n, 1]
            - 0.5 * h * (b_c * vNm1n * rt[n - 1, 1] + rho * acc[n - 1, 1])
        ) / den
        acc[n, 2] = (
            -fac * dz
            - (0.5 * h * b_c + b_p) * vNn * rt[n, 2]
            - 0.5 * h * (b_c * vNm1n * rt[n - 1, 2] + rho * acc[n - 1, 2])
            - (m_p + rho * h) * g0
        ) / den
    return 0


def rk4_step_arrays(r_in, rt_in, mode, p_pos, p_vel, f_cmd, double dt, params, top_accel=None):
    """One RK4 step on raw arrays, in place; mode held constant."""
    cdef f64[:, ::1] r = r_in
    cdef f64[:, ::1] rt = rt_in
    cdef int n_nodes = r.shape[0]
    cdef int imode = int(mode)
    cdef int top_kind = 0
    cdef f64 ax = 0.0, ay = 0.0, az = 0.0

    cdef f64 h = params.h_s
    cdef f64 rho = params.rho_lin
    cdef f64 EA = params.EA
    cdef f64 b_c = params.b_c
    cdef f64 b_p = params.b_p
    cdef f64 m_b = params.m_b
    cdef f64 m_p = params.m_p
    cdef f64 g0 = params.g0

    if top_accel is not None:
        top_kind = 1
        ax = top_accel[0]
        ay = top_accel[1]
        az = top_accel[2]
    else:
        ax = f_cmd[0]
        ay = f_cmd[1]
        az = f_cmd[2]

    cdef cnp.ndarray scratch = np.empty((8, n_nodes, 3), dtype=np.float64)
    cdef f64[:, ::1] k1v = scratch[0]
    cdef f64[:, ::1] k2v = scratch[1]
    cdef f64[:, ::1] k3v = scratch[2]
    cdef f64[:, ::1] k4v = scratch[3]
    cdef f64[:, ::1] rs = scratch[4]
    cdef f64[:, ::1] vs2 = scratch[5]
    cdef f64[:, ::1] vs3 = scratch[6]
    cdef f64[:, ::1] unit = scratch[7]   # one row unused
    cdef f64[:, ::1] vs4 = np.empty((n_nodes, 3), dtype=np.float64)

    cdef int i, k
    cdef f64 half = 0.5 * dt, sixth = dt / 6.0

    _chain_accels(r, rt, k1v, n_nodes, imode, top_kind, ax, ay, az,
                  h, rho, EA, b_c, b_p, m_b, m_p, g0, unit)
    for i in range(n_nodes):
        for k in range(3):
            rs[i, k] = r[i, k] + half * rt[i, k]
            vs2[i, k] = rt[i, k] + half * k1v[i, k]
    _chain_accels(rs, vs2, k2v, n_nodes, imode, top_kind, ax, ay, az,
                  h, rho, EA, b_c, b_p, m_b, m_p, g0, unit)
    for i in range(n_nodes):
        for k in range(3):
            rs[i, k] = r[i, k] + half * vs2[i, k]
            vs3[i, k] = rt[i, k] + half * k2v[i, k]
    _chain_accels(rs, vs3, k3v, n_nodes, imode, top_kind, ax, ay, az,
                  h, rho, EA, b_c, b_p, m_b, m_p, g0, unit)
    for i in range(n_nodes):
        for k in range(3):
            rs[i, k] = r[i, k] + dt * vs3[i, k]
            vs4[i, k] = rt[i, k] + dt * k3v[i, k]
    _chain_accels(rs, vs4, k4v, n_nodes, imode, top_kind, ax, ay, az,
                  h, rho, EA, b_c, b_p, m_b, m_p, g0, unit)
    for i in range(n_nodes):
        for k in range(3):
            r[i, k] = r[i, k] + sixth * (rt[i, k] + 2.0 * vs2[i, k] + 2.0 * vs3[i, k] + vs4[i, k])
            rt[i, k] = rt[i, k] + sixth * (k1v[i, k] + 2.0 * k2v[i, k] + 2.0 * k3v[i, k] + k4v[i, k])

    # detached payload: ballistic fall with quadratic drag; a payload exactly
    # at rest sits on its support and is not integrated
    cdef f64 pvx, pvy, pvz, vn
    cdef f64 a1x, a1y, a1z, a2x, a2y, a2z, a3x, a3y, a3z, a4x, a4y, a4z
    cdef f64 v2x, v2y, v2z, v3x, v3y, v3z, v4x, v4y, v4z
    cdef f64 c = b_p / m_p
    if imode == 0 and p_pos is not None and (
        p_vel[0] != 0.0 or p_vel[1] != 0.0 or p_vel[2] != 0.0
    ):
        pvx = p_vel[0]; pvy = p_vel[1]; pvz = p_vel[2]
        vn = sqrt(pvx * pvx + pvy * pvy + pvz * pvz)
        a1x = -c * vn * pvx; a1y = -c * vn * pvy; a1z = -c * vn * pvz - g0
        v2x = pvx + half * a1x; v2y = pvy + half * a1y; v2z = pvz + half * a1z
        vn = sqrt(v2x * v2x + v2y * v2y + v2z * v2z)
        a2x = -c * vn * v2x; a2y = -c * vn * v2y; a2z = -c * vn * v2z - g0
        v3x = pvx + half * a2x; v3y = pvy + half * a2y; v3z = pvz + half * a2z
        vn = sqrt(v3x * v3x + v3y * v3y + v3z * v3z)
        a3x = -c * vn * v3x; a3y = -c * vn * v3y; a3z = -c * vn * v3z - g0
        v4x = pvx + dt * a3x; v4y = pvy + dt * a3y; v4z = pvz + dt * a3z
        vn = sqrt(v4x * v4x + v4y * v4y + v4z * v4z)
        a4x = -c * vn * v4x; a4y = -c * vn * v4y; a4z = -c * vn * v4z - g0
        p_pos[0] = p_pos[0] + sixth * (pvx + 2.0 * v2x + 2.0 * v3x + v4x)
        p_pos[1] = p_pos[1] + sixth * (pvy + 2.0 * v2y + 2.0 * v3y + v4y)
        p_pos[2] = p_pos[2] + sixth * (pvz + 2.0 * v2z + 2.0 * v3z + v4z)
        p_vel[0] = pvx + sixth * (a1x + 2.0 * a2x + 2.0 * a3x + a4x)
        p_vel[1] = pvy + sixth * (a1y + 2.0 * a2y + 2.0 * a3y + a4y)
        p_vel[2] = pvz + sixth * (a1z + 2.0 * a2z + 2.0 * a3z + a4z)
