"""Oracle tests for the continuous dynamics primitives."""

import numpy as np
import pytest

from cablempc import dynamics
from cablempc.dynamics import (
    FullState,
    attach_reset,
    chain_accels,
    contact_force,
    detach_reset,
    mechanical_energy,
    payload_accel,
    tip_accel_free,
)
from cablempc.errors import InvalidTransitionError, SingularConfigurationError
from cablempc.params import CableParams, Mode
from cablempc.simulator import hanging_state, rk4_step


def hover_force(params, mode):
    w = params.m_b + params.rho_lin * params.L
    if mode == Mode.SLUNG:
        w += params.m_p
    return np.array([0.0, 0.0, w * params.g0])


def test_contact_force_zero_at_unit_stretch(params):
    r_s = np.array([0.0, 0.0, -1.0])
    assert np.allclose(contact_force(r_s, params), 0.0)


def test_contact_force_straight_stretch_oracle(params):
    # straight stretch lam: |n| = EA*(lam - 1), aligned with the tangent
    lam = 1.3
    r_s = lam * np.array([0.0, 1.0, 0.0])
    n = contact_force(r_s, params)
    assert np.allclose(n, params.EA * (lam - 1.0) * np.array([0.0, 1.0, 0.0]))
    lam = 0.8  # compression points against the tangent
    n = contact_force(lam * np.array([1.0, 0.0, 0.0]), params)
    assert n[0] < 0.0


def test_contact_force_rejects_degenerate_tangent(params):
    with pytest.raises(SingularConfigurationError):
        contact_force(np.zeros(3), params)


@pytest.mark.parametrize("mode", [Mode.FREE, Mode.SLUNG])
def test_hanging_equilibrium(params, mode):
    """The stretched hanging state is a discrete equilibrium under hover thrust."""
    state = hanging_state(params, mode=mode)
    acc = chain_accels(state.r, state.r_t, mode, params, params.h_s,
                       f_cmd=hover_force(params, mode))
    assert np.max(np.abs(acc)) < 5e-2 * params.g0
    # and it stays put over a full second of integration
    s = state.copy()
    f = hover_force(params, mode)
    for _ in range(2000):
        s = rk4_step(s, f, 5e-4, params)
    assert np.max(np.abs(s.r - state.r)) < 5e-3


def test_free_end_boundary_force(params):
    """The ghost-node construction transmits no force through the free end."""
    state = hanging_state(params, mode=Mode.FREE)
    r = state.r
    seg = r[-1] - r[-2]
    u = seg / np.linalg.norm(seg)
    ghost = r[-2] + 2.0 * params.h_s * u
    tangent = (ghost - r[-2]) / (2.0 * params.h_s)
    n_tip = contact_force(tangent, params)
    assert np.max(np.abs(n_tip)) < 1e-10 * params.EA


def test_energy_conservation_undamped():
    """Without drag and with the top held fixed, mechanical energy is conserved."""
    p = CableParams(b_c=1e-12, b_p=1e-12)  # drag must be positive; make it negligible
    state = hanging_state(p, mode=Mode.FREE)
    # swing it: rigid rotation of the hanging shape about the top node
    th = 0.4
    c, s = np.cos(th), np.sin(th)
    rel = state.r - state.r[0]
    state.r = state.r[0] + rel @ np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]]).T
    e0 = mechanical_energy(state, p)
    zero = np.zeros(3)
    st = state
    for _ in range(2000):
        st = rk4_step(st, zero, 5e-4, p, top_accel=zero)
    drift = abs(mechanical_energy(st, p) - e0) / abs(e0)
    assert drift < 5e-3


def test_rk4_convergence_order(params):
    """Halving dt should shrink the endpoint error by about 2**4."""
    state = hanging_state(params, mode=Mode.FREE)
    state.r_t[:, 0] = np.linspace(0.0, 0.5, state.n_nodes)  # smooth initial motion
    accel = np.array([1.0, 0.0, 0.5])
    T = 0.02

    def endpoint(dt):
        s = state.copy()
        for _ in range(int(round(T / dt))):
            s = rk4_step(s, np.zeros(3), dt, params, top_accel=accel)
        return s.r

    ref = endpoint(T / 320)
    e1 = np.max(np.abs(endpoint(T / 20) - ref))
    e2 = np.max(np.abs(endpoint(T / 40) - ref))
    order = np.log2(e1 / e2)
    assert abs(order - 4.0) < 0.3


def test_attach_momentum_conservation(params):
    state = hanging_state(params, mode=Mode.FREE)
    state.r_t[-1] = np.array([0.3, -0.1, 0.2])
    state.payload_pos = state.r[-1].copy()
    state.payload_vel = np.array([-0.2, 0.4, 0.0])
    mu = 0.5 * params.rho_lin * params.h_s
    p_before = params.m_p * state.payload_vel + mu * state.r_t[-1]
    new = attach_reset(state, params)
    p_after = (params.m_p + mu) * new.r_t[-1]
    assert np.max(np.abs(p_after - p_before)) < 1e-12
    assert new.mode == Mode.SLUNG and new.payload_pos is None
    # positions untouched
    assert np.array_equal(new.r, state.r)


def test_detach_continuity(params):
    state = hanging_state(params, mode=Mode.SLUNG)
    state.r_t[:] = 0.1
    new = detach_reset(state)
    assert new.mode == Mode.FREE
    assert np.array_equal(new.payload_pos, state.r[-1])
    assert np.array_equal(new.payload_vel, state.r_t[-1])
    assert np.array_equal(new.r_t, state.r_t)


def test_invalid_transitions(params):
    free = hanging_state(params, mode=Mode.FREE)
    with pytest.raises(InvalidTransitionError):
        attach_reset(free, params)        # no payload present
    with pytest.raises(InvalidTransitionError):
        detach_reset(free)                # wrong mode
    slung = hanging_state(params, mode=Mode.SLUNG)
    with pytest.raises(InvalidTransitionError):
        attach_reset(slung, params)


def test_payload_terminal_velocity(params):
    v_term = np.sqrt(params.m_p * params.g0 / params.b_p)
    a = payload_accel(np.array([0.0, 0.0, -v_term]), params)
    assert np.max(np.abs(a)) < 1e-10


def test_energy_translation_invariance(params):
    """Horizontal shifts change neither kinetic nor elastic energy."""
    state = hanging_state(params, mode=Mode.FREE)
    state.r_t[:] = 0.2
    shifted = state.copy()
    shifted.r += np.array([3.0, -2.0, 0.0])
    assert np.isclose(mechanical_energy(state, params),
                      mechanical_energy(shifted, params))


def test_chain_accels_requires_one_drive(params):
    state = hanging_state(params, mode=Mode.FREE)
    with pytest.raises(ValueError):
        chain_accels(state.r, state.r_t, Mode.FREE, params, params.h_s)


def test_complex_step_safety(params):
    """Dynamics evaluate cleanly on complex inputs (imag part = derivative)."""
    state = hanging_state(params, mode=Mode.FREE)
    h = 1e-20
    r = state.r.astype(complex)
    r[5, 0] += 1j * h
    acc = chain_accels(r, state.r_t.astype(complex), Mode.FREE, params,
                       params.h_s, f_cmd=np.zeros(3))
    d_cs = acc.imag / h
    # central finite difference on the same entry
    eps = 1e-6
    rp, rm = state.r.copy(), state.r.copy()
    rp[5, 0] += eps
    rm[5, 0] -= eps
    ap = chain_accels(rp, state.r_t, Mode.FREE, params, params.h_s, f_cmd=np.zeros(3))
    am = chain_accels(rm, state.r_t, Mode.FREE, params, params.h_s, f_cmd=np.zeros(3))
    d_fd = (ap - am) / (2 * eps)
    denom = max(1.0, np.max(np.abs(d_fd)))
    assert np.max(np.abs(d_cs - d_fd)) / denom < 1e-4
