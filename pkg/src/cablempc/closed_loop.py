"""Closed-loop tracking: MPC at 40 Hz, force conversion at 200 Hz, physics at 2 kHz.

The solver commands UAV accelerations on the reduced model; the inner loop
interpolates the first two commands over the MPC period, converts each to a
thrust force through the top-node force balance of the full model, and holds
that force over the physics substeps. Guards are checked after every physics
step. A failed solve keeps flying the previous plan, shifted by one step,
and the failure is counted in the summary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import metrics
from .dynamics import FullState, interior_accels, top_boundary_accel
from .errors import ConfigurationError
from .mpc import (
    CostWeights,
    HorizonReference,
    HybridMpc,
    InternalGuard,
    InternalModel,
    SolverConfig,
)
from .params import CableParams, Mode
from .planner_geometry import Obstacle, min_margin
from .pod import PodBasis
from .reference import ReferenceTrajectory
from .rom import ReducedModel
from .simulator import Guard, GuardTracker, apply_event, rk4_step

EZ = np.array([0.0, 0.0, 1.0])


def accel_to_force(state: FullState, v_cmd: np.ndarray, params: CableParams) -> np.ndarray:
    """Thrust force realizing a desired top-node acceleration.

    The top-node balance is affine in the force, so the exact inverse is
    recovered from the zero-force acceleration and the effective mass.
    """
    h = params.h_s
    acc_int = interior_accels(state.r, state.r_t, params, h)
    a0 = top_boundary_accel(state.r, state.r_t, acc_int[..., 0, :], np.zeros(3), params, h)
    m_eff = params.m_b + 0.5 * params.rho_lin * h
    return m_eff * (np.asarray(v_cmd, dtype=float) - a0)


def static_elongation(params: CableParams, mode: Mode) -> float:
    """Elongation of the hanging cable under its own weight (plus payload)."""
    dl = params.rho_lin * params.g0 * params.L**2 / (2.0 * params.EA)
    if mode == Mode.SLUNG:
        dl += params.m_p * params.g0 * params.L / params.EA
    return dl


@dataclass
class ClosedLoopConfig:
    duration: float = 10.0
    dt_physics: float = 5e-4
    dt_inner: float = 5e-3
    dt_mpc: float = 2.5e-2
    horizon: int = 32
    R: int = 2
    mpc_substeps: int = 2
    log_every_inner: int = 1       # log cadence in inner-control ticks
    frame: str = "top"             # reference waypoints drive "top" or "tip"

    def __post_init__(self):
        for big, small, what in (
            (self.dt_inner, self.dt_physics, "dt_inner/dt_physics"),
            (self.dt_mpc, self.dt_inner, "dt_mpc/dt_inner"),
        ):
            ratio = big / small
            if abs(ratio - round(ratio)) > 1e-9:
                raise ConfigurationError(f"{what} must be an integer ratio")
        if self.frame not in ("top", "tip"):
            raise ConfigurationError("frame must be 'top' or 'tip'")

    @property
    def phys_per_inner(self) -> int:
        return int(round(self.dt_inner / self.dt_physics))

    @property
    def inner_per_mpc(self) -> int:
        return int(round(self.dt_mpc / self.dt_inner))


class WaypointReference:
    """Reference adapter: a straight, statically stretched cable hanging
    under the commanded waypoint spline, all nodes at the waypoint speed."""

    def __init__(
        self,
        ref_traj: ReferenceTrajectory,
        params: CableParams,
        n_coarse_nodes: int,
        frame: str = "top",
    ):
        if frame not in ("top", "tip"):
            raise ConfigurationError("frame must be 'top' or 'tip'")
        self.traj = ref_traj
        self.params = params
        self.m1 = n_coarse_nodes
        self.frame = frame
        self._frac = np.linspace(0.0, 1.0, n_coarse_nodes)[:, None]

    def mode_at(self, t: float) -> int:
        return int(self.traj.mode_at(t))

    def node_state(self, t: float):
        """Reference coarse-grid node positions/velocities and input at t."""
        pos, vel, acc = self.traj.eval(t)
        q = Mode(self.mode_at(t))
        length = self.params.L + static_elongation(self.params, q)
        top = pos if self.frame == "top" else pos + length * EZ
        nodes = top - self._frac * (length * EZ)
        vels = np.tile(vel, (self.m1, 1))
        return nodes, vels, acc

    def horizon(self, t0: float, dt: float, H: int) -> HorizonReference:
        node_ref = np.empty((H + 1, 6 * self.m1))
        input_ref = np.empty((H, 3))
        modes = np.empty(H + 1, dtype=int)
        for k in range(H + 1):
            t = t0 + k * dt
            nodes, vels, acc = self.node_state(t)
            node_ref[k] = np.concatenate([nodes.ravel(), vels.ravel()])
            modes[k] = self.mode_at(t)
            if k < H:
                input_ref[k] = acc
        return HorizonReference(node_ref, input_ref, modes)


@dataclass
class ClosedLoopLog:
    """Per-inner-tick samples of one closed-loop run."""

    t: np.ndarray = None
    mode: np.ndarray = None
    r_top: np.ndarray = None
    v_top: np.ndarray = None
    r_tip: np.ndarray = None
    v_tip: np.ndarray = None
    v_cmd: np.ndarray = None
    f_cmd: np.ndarray = None
    coeffs: np.ndarray = None        # modal coefficients (rows, R, 3)
    nodes: np.ndarray = None         # coarse-grid positions (rows, M+1, 3)
    ref_nodes: np.ndarray = None     # reference coarse-grid positions
    ref_vel: np.ndarray = None       # reference waypoint velocity
    # per-MPC-tick solver records
    solve_t: np.ndarray = None
    solve_ms: np.ndarray = None
    solve_iters: np.ndarray = None
    solve_failed: np.ndarray = None
    solve_cost: np.ndarray = None
    event_times: List[float] = field(default_factory=list)
    event_kinds: List[str] = field(default_factory=list)


def run_closed_loop(
    state: FullState,
    params: CableParams,
    bases: Dict[int, PodBasis],
    reference,
    cfg: ClosedLoopConfig,
    solver: SolverConfig = None,
    weights: CostWeights = None,
    guards: Sequence[Guard] = (),
    internal_guards: Sequence[InternalGuard] = (),
    obstacles: Sequence[Obstacle] = (),
):
    """Run one tracking experiment; returns (end_state, log, summary)."""
    solver = solver or SolverConfig()
    weights = weights or CostWeights()
    internal = InternalModel(
        bases, params, R=cfg.R, dt=cfg.dt_mpc,
        guards=internal_guards, substeps=cfg.mpc_substeps,
    )
    mpc = HybridMpc(internal, weights, obstacles, solver)
    models = internal.models
    m1 = models[0].M + 1
    if isinstance(reference, ReferenceTrajectory):
        reference = WaypointReference(reference, params, m1, cfg.frame)

    state = state.copy()
    tracker = GuardTracker(guards, internal.cooldown)
    n_mpc = int(round(cfg.duration / cfg.dt_mpc))
    us_plan = np.zeros((cfg.horizon, 3))
    rows: List[tuple] = []
    solves: List[tuple] = []
    log = ClosedLoopLog()
    t = 0.0
    for i in range(n_mpc):
        q = int(state.mode)
        z0 = models[q].project_full(state)
        ref = reference.horizon(t, cfg.dt_mpc, cfg.horizon)
        sol = mpc.solve(q, z0, ref, us_plan, t0=t, t_last_event=tracker.last_event_time)
        if sol.stats.failed:
            # hold the previous plan, advanced by one step
            us_plan = np.vstack([us_plan[1:], us_plan[-1:]])
        else:
            us_plan = np.vstack([sol.us[1:], sol.us[-1:]])
        v0 = (us_plan[0] if sol.stats.failed else sol.us[0]).copy()
        v1 = (us_plan[1] if sol.stats.failed else sol.us[1]).copy()
        solves.append((t, sol.stats.wall_ms, sol.stats.iterations,
                       sol.stats.failed, sol.cost))

        for j in range(cfg.inner_per_mpc):
            tau = j * cfg.dt_inner
            v_cmd = v0 + (tau / cfg.dt_mpc) * (v1 - v0)
            f = accel_to_force(state, v_cmd, params)
            if j % cfg.log_every_inner == 0:
                qq = int(state.mode)
                zrow = models[qq].project_full(state)
                _, a, _, _, _, _ = models[qq].unpack(zrow)
                ref_nodes, ref_vels, _ = reference.node_state(t)
                rows.append((
                    t, qq, state.r[0].copy(), state.r_t[0].copy(),
                    state.r[-1].copy(), state.r_t[-1].copy(),
                    v_cmd.copy(), f.copy(), a.copy(),
                    state.r[:: (state.n_nodes - 1) // (m1 - 1)].copy(),
                    ref_nodes, ref_vels[0],
                ))
            for _ in range(cfg.phys_per_inner):
                state = rk4_step(state, f, cfg.dt_physics, params)
                t += cfg.dt_physics
                ev = tracker.poll(state, t)
                if ev is not None:
                    state = apply_event(state, ev, params)
                    log.event_times.append(ev.time)
                    log.event_kinds.append(ev.kind)
        t = round(t / cfg.dt_physics) * cfg.dt_physics

    log.t = np.array([r[0] for r in rows])
    log.mode = np.array([r[1] for r in rows])
    log.r_top = np.array([r[2] for r in rows])
    log.v_top = np.array([r[3] for r in rows])
    log.r_tip = np.array([r[4] for r in rows])
    log.v_tip = np.array([r[5] for r in rows])
    log.v_cmd = np.array([r[6] for r in rows])
    log.f_cmd = np.array([r[7] for r in rows])
    log.coeffs = np.array([r[8] for r in rows])
    log.nodes = np.array([r[9] for r in rows])
    log.ref_nodes = np.array([r[10] for r in rows])
    log.ref_vel = np.array([r[11] for r in rows])
    log.solve_t = np.array([s[0] for s in solves])
    log.solve_ms = np.array([s[1] for s in solves])
    log.solve_iters = np.array([s[2] for s in solves])
    log.solve_failed = np.array([s[3] for s in solves], dtype=bool)
    log.solve_cost = np.array([s[4] for s in solves])

    summary = summarize(log, params, cfg, obstacles)
    return state, log, summary


def summarize(
    log: ClosedLoopLog,
    params: CableParams,
    cfg: ClosedLoopConfig,
    obstacles: Sequence[Obstacle] = (),
) -> metrics.RunSummary:
    """Aggregate a closed-loop log into the standard run summary."""
    s = metrics.RunSummary()
    m1 = log.nodes.shape[1]
    h_d = params.L / (m1 - 1)
    ref_nodes = log.ref_nodes
    ref_tip = ref_nodes[:, -1]
    s.tip_pos_rms = metrics.rms(log.r_tip - ref_tip)
    s.tip_vel_rms = metrics.rms(log.v_tip - log.ref_vel)
    s.eps_p_rms = metrics.cable_error_rms(log.nodes, ref_nodes, h_d, params.L)
    s.eps_v_rms = metrics.rms(log.v_top - log.ref_vel)
    s.solve_ms_mean = float(np.mean(log.solve_ms))
    s.solve_ms_max = float(np.max(log.solve_ms))
    s.solver_iterations_mean = float(np.mean(log.solve_iters))
    s.solver_failures = int(np.sum(log.solve_failed))
    s.event_times = list(log.event_times)
    s.event_kinds = list(log.event_kinds)
    if obstacles:
        s.min_obstacle_margin = min_margin(log.nodes.reshape(-1, 3), obstacles)
    s.success = bool(np.all(np.isfinite(log.r_tip)))
    return s
