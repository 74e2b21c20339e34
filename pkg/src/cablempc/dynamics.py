"""Spatially discretized dynamics of the extensible string.

All functions here are the pure reference implementation: vectorized numpy,
grid-generic (the reduced model reuses them on its coarse grid), and safe
for complex-step differentiation (norms are written as sqrt(sum(v*v))).
A compiled fast path for the fine-grid hot loop lives in ``_fdm_kernel``.

Node arrays have shape (..., n+1, 3): leading axes broadcast, so a batch of
configurations can be evaluated in one call.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidTransitionError, SingularConfigurationError
from .params import CableParams, Mode

EZ = np.array([0.0, 0.0, 1.0])

# Adjacent nodes closer than this fraction of the grid step count as coincident.
_SEGMENT_TINY = 1e-12


def _norm(v: np.ndarray) -> np.ndarray:
    """Euclidean norm along the last axis, keeping dims; complex-step safe."""
    return np.sqrt(np.sum(v * v, axis=-1, keepdims=True))


def _check_segments(slen: np.ndarray, h: float):
    if np.any(slen.real < _SEGMENT_TINY * h):
        idx = int(np.argmax(slen.real < _SEGMENT_TINY * h))
        raise SingularConfigurationError(
            f"coincident adjacent nodes (first offending segment index {idx})"
        )


def contact_force(r_s: np.ndarray, params: CableParams) -> np.ndarray:
    """Constitutive law: internal force transmitted through a cross-section.

    ``r_s`` is the spatial tangent; unit stretch gives zero force, stretch
    beyond 1 is tensile, below 1 compressive.
    """
    mag = _norm(r_s)
    if np.any(mag.real < _SEGMENT_TINY):
        raise SingularConfigurationError("zero-norm tangent vector")
    return params.EA * (1.0 - 1.0 / mag) * r_s


def contact_force_at(r: np.ndarray, i: int, h: float, params: CableParams) -> np.ndarray:
    """Contact force at interior node i from the central-difference tangent."""
    r_s = (r[..., i + 1, :] - r[..., i - 1, :]) / (2.0 * h)
    return contact_force(r_s, params)


def interior_accels(
    r: np.ndarray, r_t: np.ndarray, params: CableParams, h: float
) -> np.ndarray:
    """Accelerations of nodes 1..n-1 under gravity, quadratic drag, and the
    three-term contact-force divergence stencil.

    Returns shape (..., n-1, 3).
    """
    seg = r[..., 1:, :] - r[..., :-1, :]
    slen = _norm(seg)
    _check_segments(slen, h)
    unit = seg / slen
    lap = (r[..., 2:, :] - 2.0 * r[..., 1:-1, :] + r[..., :-2, :]) / (h * h)
    n_s = params.EA * (lap + (unit[..., :-1, :] - unit[..., 1:, :]) / h)
    v = r_t[..., 1:-1, :]
    rho = params.rho_lin
    return -params.g0 * EZ - (params.b_c / rho) * _norm(v) * v + n_s / rho


def top_boundary_accel(
    r: np.ndarray,
    r_t: np.ndarray,
    r_tt_1: np.ndarray,
    f_cmd: np.ndarray,
    params: CableParams,
    h: float,
) -> np.ndarray:
    """Closed-form acceleration of node 0 (UAV point mass + half lumped cable).

    ``r_tt_1`` is the already-computed acceleration of node 1.
    """
    rho = params.rho_lin
    n1 = contact_force_at(r, 1, h, params)
    v0 = r_t[..., 0, :]
    v1 = r_t[..., 1, :]
    drag = params.b_c * (_norm(v0) * v0 + _norm(v1) * v1)
    num = (
        f_cmd
        - (params.m_b + rho * h) * params.g0 * EZ
        - 0.5 * h * (drag + rho * r_tt_1)
        + n1
    )
    return num / (params.m_b + 0.5 * rho * h)


def tip_accel_free(
    r: np.ndarray, r_t: np.ndarray, params: CableParams, h: float
) -> np.ndarray:
    """Free-end acceleration of node n via the zero-strain ghost node."""
    last = r[..., -1, :]
    prev = r[..., -2, :]
    seg = last - prev
    slen = _norm(seg)
    _check_segments(slen, h)
    u = seg / slen
    ghost = prev + 2.0 * h * u
    gseg = ghost - last
    gu = gseg / _norm(gseg)
    lap = (ghost - 2.0 * last + prev) / (h * h)
    n_s = params.EA * (lap + (u - gu) / h)
    v = r_t[..., -1, :]
    rho = params.rho_lin
    return -params.g0 * EZ - (params.b_c / rho) * _norm(v) * v + n_s / rho


def tip_accel_slung(
    r: np.ndarray,
    r_t: np.ndarray,
    r_tt_nm1: np.ndarray,
    params: CableParams,
    h: float,
) -> np.ndarray:
    """Tip acceleration with an attached payload (point mass + half lumped cable).

    ``r_tt_nm1`` is the already-computed acceleration of node n-1.
    """
    rho = params.rho_lin
    n_nm1 = contact_force_at(r, r.shape[-2] - 2, h, params)
    vN = r_t[..., -1, :]
    vNm1 = r_t[..., -2, :]
    num = (
        -n_nm1
        - (0.5 * h * params.b_c + params.b_p) * _norm(vN) * vN
        - 0.5 * h * (params.b_c * _norm(vNm1) * vNm1 + rho * r_tt_nm1)
        - (params.m_p + rho * h) * params.g0 * EZ
    )
    return num / (params.m_p + 0.5 * rho * h)


def chain_accels(
    r: np.ndarray,
    r_t: np.ndarray,
    mode: Mode,
    params: CableParams,
    h: float,
    f_cmd: Optional[np.ndarray] = None,
    top_accel: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Accelerations of every node of one cable chain on a uniform grid.

    The top boundary is either force-driven (``f_cmd``, UAV dynamics) or
    kinematically prescribed (``top_accel``); exactly one must be given.
    Interior accelerations are computed first because both boundary closed
    forms consume them.
    """
    if (f_cmd is None) == (top_accel is None):
        raise ValueError("provide exactly one of f_cmd / top_accel")
    acc_int = interior_accels(r, r_t, params, h)
    if top_accel is not None:
        a0 = np.broadcast_to(top_accel, r[..., 0, :].shape)
    else:
        a0 = top_boundary_accel(r, r_t, acc_int[..., 0, :], f_cmd, params, h)
    if mode == Mode.SLUNG:
        aN = tip_accel_slung(r, r_t, acc_int[..., -1, :], params, h)
    else:
        aN = tip_accel_free(r, r_t, params, h)
    return np.concatenate(
        [a0[..., None, :], acc_int, aN[..., None, :]], axis=-2
    )


def payload_accel(v: np.ndarray, params: CableParams) -> np.ndarray:
    """Ballistic acceleration of a detached payload under gravity and drag."""
    return -params.g0 * EZ - (params.b_p / params.m_p) * _norm(v) * v


@dataclass
class FullState:
    """Fine-grid state: nodal positions/velocities, discrete mode, and the
    state of a detached payload (present only in FREE mode)."""

    r: np.ndarray
    r_t: np.ndarray
    mode: Mode = Mode.FREE
    payload_pos: Optional[np.ndarray] = None
    payload_vel: Optional[np.ndarray] = None

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.r_t = np.asarray(self.r_t, dtype=float)
        if self.r.shape != self.r_t.shape or self.r.ndim != 2 or self.r.shape[1] != 3:
            raise ValueError("r and r_t must both have shape (N+1, 3)")
        if self.payload_pos is not None:
            self.payload_pos = np.asarray(self.payload_pos, dtype=float)
            self.payload_vel = np.asarray(self.payload_vel, dtype=float)

    @property
    def n_nodes(self) -> int:
        return self.r.shape[0]

    def copy(self) -> "FullState":
        return FullState(
            self.r.copy(),
            self.r_t.copy(),
            self.mode,
            None if self.payload_pos is None else self.payload_pos.copy(),
            None if self.payload_vel is None else self.payload_vel.copy(),
        )

    def is_finite(self) -> bool:
        ok = np.all(np.isfinite(self.r)) and np.all(np.isfinite(self.r_t))
        if self.payload_pos is not None:
            ok = ok and np.all(np.isfinite(self.payload_pos))
            ok = ok and np.all(np.isfinite(self.payload_vel))
        return bool(ok)


def full_rhs(state: FullState, f_cmd: np.ndarray, params: CableParams):
    """Time derivative of a FullState.

    Returns (r_t, r_tt, payload_vel, payload_acc); the payload pair is None
    when no detached payload exists.
    """
    acc = chain_accels(
        state.r, state.r_t, state.mode, params, params.h_s, f_cmd=np.asarray(f_cmd, dtype=float)
    )
    if state.mode == Mode.FREE and state.payload_pos is not None:
        p_acc = payload_accel(state.payload_vel, params)
        return state.r_t, acc, state.payload_vel, p_acc
    return state.r_t, acc, None, None


def attach_reset(state: FullState, params: CableParams) -> FullState:
    """Inelastic pickup: momentum-conserving tip velocity reset, mode 0 -> 1."""
    if state.mode != Mode.FREE:
        raise InvalidTransitionError("attach requires FREE mode")
    if state.payload_pos is None:
        raise InvalidTransitionError("attach requires a detached payload")
    mu = 0.5 * params.rho_lin * params.h_s
    new = state.copy()
    new.r_t[-1] = (params.m_p * state.payload_vel + mu * state.r_t[-1]) / (params.m_p + mu)
    new.mode = Mode.SLUNG
    new.payload_pos = None
    new.payload_vel = None
    return new


def detach_reset(state: FullState) -> FullState:
    """Release: continuous state unchanged, payload inherits the tip state."""
    if state.mode != Mode.SLUNG:
        raise InvalidTransitionError("detach requires SLUNG mode")
    new = state.copy()
    new.mode = Mode.FREE
    new.payload_pos = state.r[-1].copy()
    new.payload_vel = state.r_t[-1].copy()
    return new


def mechanical_energy(state: FullState, params: CableParams) -> float:
    """Kinetic plus quadratic elastic energy of the chain (per-segment strain).

    Boundary lumped masses follow the discretization: m_b + rho*h/2 at the
    top, rho*h/2 (+ m_p when slung) at the tip.
    """
    h = params.h_s
    rho = params.rho_lin
    v2 = np.sum(state.r_t * state.r_t, axis=-1)
    m = np.full(state.n_nodes, rho * h)
    m[0] = params.m_b + 0.5 * rho * h
    m[-1] = 0.5 * rho * h + (params.m_p if state.mode == Mode.SLUNG else 0.0)
    kinetic = 0.5 * float(np.dot(m, v2))
    seg = state.r[1:] - state.r[:-1]
    lam = np.linalg.norm(seg, axis=-1) / h
    elastic = 0.5 * params.EA * h * float(np.sum((lam - 1.0) ** 2))
    potential = params.g0 * float(np.dot(m, state.r[:, 2]))
    if state.mode == Mode.FREE and state.payload_pos is not None:
        kinetic += 0.5 * params.m_p * float(np.dot(state.payload_vel, state.payload_vel))
        potential += params.m_p * params.g0 * float(state.payload_pos[2])
    return kinetic + elastic + potential
