"""Fixed-step RK4 hybrid executor: guard detection, resets, open-loop runs.

The closed-loop harness that couples the MPC lives in ``closed_loop``; this
module owns the physics stepping primitives shared by training, evaluation,
and tracking runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import backend, dynamics
from .dynamics import FullState
from .errors import ConfigurationError, DivergenceError
from .params import CableParams, Mode


@dataclass
class Guard:
    """Proximity event: a Euclidean ball around a pickup/drop-off location.

    Attach guards fire in FREE mode when the tip reaches the (detached)
    payload; detach guards fire in SLUNG mode when the tip reaches the guard
    center. ``armed_after`` delays eligibility.
    """

    kind: str                       # "attach" | "detach"
    center: np.ndarray = None       # used by detach guards
    radius: float = 0.05
    armed_after: float = 0.0
    single_shot: bool = True        # fire at most once per run

    def __post_init__(self):
        if self.kind not in ("attach", "detach"):
            raise ConfigurationError(f"unknown guard kind {self.kind!r}")
        if not self.radius > 0.0:
            raise ConfigurationError("guard radius must be positive")
        if self.center is not None:
            self.center = np.asarray(self.center, dtype=float)


@dataclass
class TransitionEvent:
    kind: str
    time: float
    guard: Guard


@dataclass
class SimConfig:
    """Timing configuration of the physics / inner-control / MPC loops."""

    dt_physics: float = 5e-4
    dt_inner_ctrl: float = 5e-3
    dt_mpc: float = 2.5e-2
    horizon: int = 32
    duration: float = 10.0
    seed: int = 0
    log_every: int = 10             # full-node log decimation (physics steps)

    def __post_init__(self):
        ratio = self.dt_mpc / self.dt_physics
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigurationError("dt_mpc must be an integer multiple of dt_physics")
        ratio = self.dt_inner_ctrl / self.dt_physics
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigurationError("dt_inner_ctrl must be an integer multiple of dt_physics")

    @property
    def physics_per_inner(self) -> int:
        return int(round(self.dt_inner_ctrl / self.dt_physics))

    @property
    def inner_per_mpc(self) -> int:
        return int(round(self.dt_mpc / self.dt_inner_ctrl))


def rk4_step(
    state: FullState,
    f_cmd: np.ndarray,
    dt: float,
    params: CableParams,
    top_accel: Optional[np.ndarray] = None,
) -> FullState:
    """One classic RK4 step of the full model; mode held constant."""
    if dt <= 0.0:
        raise ConfigurationError("dt must be positive")
    new = state.copy()
    backend.rk4_step_arrays(
        new.r,
        new.r_t,
        int(new.mode),
        new.payload_pos,
        new.payload_vel,
        np.asarray(f_cmd, dtype=float),
        dt,
        params,
        top_accel,
    )
    if not new.is_finite():
        bad = np.argwhere(~np.isfinite(new.r).all(axis=1))
        node = int(bad[0][0]) if len(bad) else -1
        raise DivergenceError(f"non-finite state after RK4 step (first bad node {node})")
    return new


def check_guards(
    state: FullState, guards: Sequence[Guard], t: float
) -> Optional[TransitionEvent]:
    """Return the first eligible transition event, if any (at most one)."""
    tip = state.r[-1]
    for g in guards:
        if t < g.armed_after:
            continue
        if g.kind == "attach" and state.mode == Mode.FREE and state.payload_pos is not None:
            if np.linalg.norm(tip - state.payload_pos) <= g.radius:
                return TransitionEvent("attach", t, g)
        elif g.kind == "detach" and state.mode == Mode.SLUNG and g.center is not None:
            if np.linalg.norm(tip - g.center) <= g.radius:
                return TransitionEvent("detach", t, g)
    return None


class GuardTracker:
    """Executor-side guard bookkeeping: single-shot firing and a refractory
    cooldown after any event (prevents attach/detach chattering when the
    released payload sits exactly at the tip)."""

    def __init__(self, guards: Sequence[Guard], cooldown: float = 2.0):
        self.guards = list(guards)
        self.cooldown = cooldown
        self.fired = [0] * len(self.guards)
        self.last_event_time = -np.inf

    def poll(self, state: FullState, t: float) -> Optional[TransitionEvent]:
        if t - self.last_event_time < self.cooldown:
            return None
        eligible = [
            g
            for g, n in zip(self.guards, self.fired)
            if not (g.single_shot and n > 0)
        ]
        ev = check_guards(state, eligible, t)
        if ev is not None:
            self.fired[self.guards.index(ev.guard)] += 1
            self.last_event_time = t
        return ev


def apply_event(state: FullState, event: TransitionEvent, params: CableParams) -> FullState:
    if event.kind == "attach":
        return dynamics.attach_reset(state, params)
    return dynamics.detach_reset(state)


@dataclass
class OpenLoopLog:
    times: np.ndarray
    r: np.ndarray        # (n_samples, N+1, 3)
    r_t: np.ndarray
    modes: np.ndarray
    events: List[TransitionEvent] = field(default_factory=list)


def simulate_open_loop(
    state: FullState,
    params: CableParams,
    dt: float,
    n_steps: int,
    top_accel_fn: Optional[Callable[[float], np.ndarray]] = None,
    force_fn: Optional[Callable[[float], np.ndarray]] = None,
    guards: Sequence[Guard] = (),
    t0: float = 0.0,
    log_every: int = 1,
    event_cooldown: float = 2.0,
) -> Tuple[FullState, OpenLoopLog]:
    """Integrate the full model with a prescribed top drive.

    Either the node-0 acceleration (``top_accel_fn``) or the UAV force
    (``force_fn``) is prescribed as a function of time. Guards are checked
    after every physics step; resets apply at the step boundary.
    """
    if (top_accel_fn is None) == (force_fn is None):
        raise ConfigurationError("provide exactly one of top_accel_fn / force_fn")
    s = state.copy()
    times, rs, vs, qs = [t0], [s.r.copy()], [s.r_t.copy()], [int(s.mode)]
    events: List[TransitionEvent] = []
    tracker = GuardTracker(guards, event_cooldown)
    zero = np.zeros(3)
    for k in range(n_steps):
        t = t0 + k * dt
        if top_accel_fn is not None:
            s = rk4_step(s, zero, dt, params, top_accel=np.asarray(top_accel_fn(t), dtype=float))
        else:
            s = rk4_step(s, np.asarray(force_fn(t), dtype=float), dt, params)
        t_next = t0 + (k + 1) * dt
        ev = tracker.poll(s, t_next)
        if ev is not None:
            s = apply_event(s, ev, params)
            events.append(ev)
        if (k + 1) % log_every == 0:
            times.append(t_next)
            rs.append(s.r.copy())
            vs.append(s.r_t.copy())
            qs.append(int(s.mode))
    log = OpenLoopLog(np.array(times), np.array(rs), np.array(vs), np.array(qs), events)
    return s, log


def hanging_state(
    params: CableParams,
    top: Sequence[float] = (0.0, 0.0, 1.0),
    mode: Mode = Mode.FREE,
    stretched: bool = True,
) -> FullState:
    """Static vertical equilibrium hanging below ``top``.

    With ``stretched``, nodes follow the analytic stretch profile of the
    hanging string (tension from the weight below, plus the payload weight
    in SLUNG mode); otherwise the cable is unstretched.
    """
    N = params.N
    h = params.h_s
    top = np.asarray(top, dtype=float)
    z = np.zeros(N + 1)
    for i in range(1, N + 1):
        s_mid = (i - 0.5) * h
        lam = 1.0
        if stretched:
            tension = params.rho_lin * params.g0 * (params.L - s_mid)
            if mode == Mode.SLUNG:
                tension += params.m_p * params.g0
            lam = 1.0 + tension / params.EA
        z[i] = z[i - 1] - lam * h
    r = np.zeros((N + 1, 3))
    r[:, 0] = top[0]
    r[:, 1] = top[1]
    r[:, 2] = top[2] + z
    return FullState(r, np.zeros((N + 1, 3)), mode)


def horizontal_state(
    params: CableParams,
    top: Sequence[float] = (0.0, 0.0, 1.0),
    mode: Mode = Mode.FREE,
) -> FullState:
    """Unstretched cable released horizontally along +x from ``top``."""
    N = params.N
    top = np.asarray(top, dtype=float)
    r = np.zeros((N + 1, 3))
    r[:, 0] = top[0] + np.arange(N + 1) * params.h_s
    r[:, 1] = top[1]
    r[:, 2] = top[2]
    return FullState(r, np.zeros((N + 1, 3)), mode)
