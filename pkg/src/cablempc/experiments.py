"""Reproduction studies: release test, ROM sweeps, stability bisection."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np

from . import metrics, rom
from .dynamics import FullState
from .errors import CableError, DivergenceError
from .params import CableParams, Mode
from .pod import PodBasis
from .reference import make_quintic_spline
from .rom import ReducedModel
from .simulator import horizontal_state, simulate_open_loop


@dataclass
class ReleaseTestConfig:
    """Horizontal release plus a 1 m quintic y-translation of the top node."""

    duration: float = 2.0
    move_time: float = 1.0
    dt: float = 5e-4
    log_every: int = 10
    top: tuple = (0.0, 0.0, 1.0)


def release_reference(cfg: ReleaseTestConfig):
    p0 = np.asarray(cfg.top, dtype=float)
    wps = [(0.0, p0), (cfg.move_time, p0 + np.array([0.0, 1.0, 0.0]))]
    if cfg.duration > cfg.move_time:
        wps.append((cfg.duration, wps[-1][1]))
    return make_quintic_spline(wps)


def release_ground_truth(params: CableParams, mode: Mode, cfg: ReleaseTestConfig):
    """Full-model trajectory of the release test (prescribed top acceleration)."""
    ref = release_reference(cfg)
    state = horizontal_state(params, top=cfg.top, mode=mode)
    n_steps = int(round(cfg.duration / cfg.dt))
    _, log = simulate_open_loop(
        state,
        params,
        cfg.dt,
        n_steps,
        top_accel_fn=lambda t: ref.eval(t)[2],
        log_every=cfg.log_every,
    )
    return log


def integrate_rom(
    model: ReducedModel,
    z0: np.ndarray,
    accel_fn: Callable[[float], np.ndarray],
    dt: float,
    n_steps: int,
    log_every: int = 1,
    t0: float = 0.0,
    blowup: float = 1e3,
):
    """Integrate a reduced model with a prescribed top acceleration.

    Returns (times, states); raises DivergenceError on blow-up.
    """
    z = np.asarray(z0, dtype=float)
    times, zs = [t0], [z.copy()]
    for k in range(n_steps):
        t = t0 + k * dt
        z = model.step(z, np.asarray(accel_fn(t), dtype=float), dt)
        if not np.all(np.isfinite(z)) or np.max(np.abs(z)) > blowup:
            raise DivergenceError(f"reduced model diverged at t={t + dt:.4f}")
        if (k + 1) % log_every == 0:
            times.append(t0 + (k + 1) * dt)
            zs.append(z.copy())
    return np.array(times), np.array(zs)


@dataclass
class RomEvalResult:
    R: int
    variant: str
    mode: int
    eps_p_rms: float
    eps_v_rms: float
    wall_s: float


def evaluate_rom(
    basis: PodBasis,
    params: CableParams,
    R: int,
    mode: Mode,
    truth_log,
    cfg: ReleaseTestConfig,
) -> RomEvalResult:
    """Release-test accuracy and wall time of one ROM configuration against
    a precomputed full-model log."""
    model = ReducedModel(basis, params, R=R, mode=mode)
    ref = release_reference(cfg)
    state0 = horizontal_state(params, top=cfg.top, mode=mode)
    z0 = model.project_full(state0)
    n_steps = int(round(cfg.duration / cfg.dt))
    t_start = time.perf_counter()
    times, zs = integrate_rom(
        model, z0, lambda t: ref.eval(t)[2], cfg.dt, n_steps, log_every=cfg.log_every
    )
    wall = time.perf_counter() - t_start
    r_rom, v_rom = model.nodes(zs)
    d = (truth_log.r.shape[1] - 1) // model.M
    r_true = truth_log.r[:, ::d]
    v_true = truth_log.r_t[:, ::d]
    eps_p = metrics.cable_error_rms(r_true, r_rom, model.h_d, params.L)
    eps_v = metrics.cable_error_rms(v_true, v_rom, model.h_d, params.L)
    return RomEvalResult(R, basis.variant, int(mode), eps_p, eps_v, wall)


def max_stable_dt(
    try_dt: Callable[[float], bool],
    dt_lo: float = 1e-4,
    dt_hi: float = 1.0,
    rel_tol: float = 0.02,
) -> float:
    """Largest stable step size found by geometric bracketing plus bisection.

    ``try_dt`` returns True when integration at that step stays bounded.
    """
    if not try_dt(dt_lo):
        raise CableError(f"unstable even at dt={dt_lo}")
    lo = dt_lo
    hi = dt_lo
    while hi < dt_hi:
        hi *= 2.0
        if not try_dt(min(hi, dt_hi)):
            break
        lo = min(hi, dt_hi)
    else:
        return dt_hi
    hi = min(hi, dt_hi)
    while (hi - lo) / lo > rel_tol:
        mid = 0.5 * (lo + hi)
        if try_dt(mid):
            lo = mid
        else:
            hi = mid
    return lo


def rom_stability_probe(
    basis: PodBasis, params: CableParams, R: int, mode: Mode, cfg: ReleaseTestConfig
) -> Callable[[float], bool]:
    model = ReducedModel(basis, params, R=R, mode=mode)
    ref = release_reference(cfg)
    state0 = horizontal_state(params, top=cfg.top, mode=mode)
    z0 = model.project_full(state0)

    def try_dt(dt: float) -> bool:
        n = int(np.ceil(cfg.duration / dt))
        try:
            integrate_rom(model, z0, lambda t: ref.eval(t)[2], dt, n, log_every=n)
        except (DivergenceError, CableError):
            return False
        return True

    return try_dt


def fdm_stability_probe(
    params: CableParams, mode: Mode, cfg: ReleaseTestConfig
) -> Callable[[float], bool]:
    ref = release_reference(cfg)
    state0 = horizontal_state(params, top=cfg.top, mode=mode)

    def try_dt(dt: float) -> bool:
        n = int(np.ceil(cfg.duration / dt))
        try:
            end, _ = simulate_open_loop(
                state0,
                params,
                dt,
                n,
                top_accel_fn=lambda t: ref.eval(t)[2],
                log_every=max(n, 1),
            )
        except (DivergenceError, CableError):
            return False
        return bool(np.max(np.abs(end.r)) < 1e3)

    return try_dt
