"""Pure-numpy fallback for the fine-grid integration kernel.

Mirrors the API of the compiled extension ``_fdm_kernel``: one classic RK4
step of the full chain (+ optional detached payload) on raw arrays. Arrays
are updated in place.
"""

from __future__ import annotations

import numpy as np

from . import dynamics
from .params import CableParams, Mode


def rk4_step_arrays(
    r: np.ndarray,
    r_t: np.ndarray,
    mode: int,
    p_pos,
    p_vel,
    f_cmd: np.ndarray,
    dt: float,
    params: CableParams,
    top_accel=None,
) -> None:
    """Advance (r, r_t[, p_pos, p_vel]) in place by one RK4 step.

    The discrete mode is held constant during the step. ``top_accel``, when
    given, kinematically prescribes the node-0 acceleration instead of the
    force-driven UAV equation.
    """
    m = Mode(mode)
    # a detached payload exactly at rest sits on its support; only a moving
    # payload flies ballistically
    has_payload = (
        m == Mode.FREE and p_pos is not None and float(np.dot(p_vel, p_vel)) > 0.0
    )
    h = params.h_s

    def acc(rr, vv):
        if top_accel is not None:
            return dynamics.chain_accels(rr, vv, m, params, h, top_accel=top_accel)
        return dynamics.chain_accels(rr, vv, m, params, h, f_cmd=f_cmd)

    k1v = acc(r, r_t)
    k1r = r_t
    r2 = r + 0.5 * dt * k1r
    v2 = r_t + 0.5 * dt * k1v
    k2v = acc(r2, v2)
    r3 = r + 0.5 * dt * v2
    v3 = r_t + 0.5 * dt * k2v
    k3v = acc(r3, v3)
    r4 = r + dt * v3
    v4 = r_t + dt * k3v
    k4v = acc(r4, v4)
    r_new = r + (dt / 6.0) * (k1r + 2.0 * v2 + 2.0 * v3 + v4)
    v_new = r_t + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    r[...] = r_new
    r_t[...] = v_new

    if has_payload:
        pa1 = dynamics.payload_accel(p_vel, params)
        pv2 = p_vel + 0.5 * dt * pa1
        pa2 = dynamics.payload_accel(pv2, params)
        pv3 = p_vel + 0.5 * dt * pa2
        pa3 = dynamics.payload_accel(pv3, params)
        pv4 = p_vel + dt * pa3
        pa4 = dynamics.payload_accel(pv4, params)
        p_new = p_pos + (dt / 6.0) * (p_vel + 2.0 * pv2 + 2.0 * pv3 + pv4)
        v_new = p_vel + (dt / 6.0) * (pa1 + 2.0 * pa2 + 2.0 * pa3 + pa4)
        p_pos[...] = p_new
        p_vel[...] = v_new
