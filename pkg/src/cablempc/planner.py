"""Offline segmented trajectory planner with log-barrier homotopy.

The mission horizon is split at waypoint arrival times (plus dwell holds
after transitions); each segment is solved sequentially with the full
HiLQR on the reduced model, warm-started along a homotopy of decreasing
barrier gains, then a full-horizon refinement pass stitches the segments.
The result is a reference trajectory (states, inputs, mode schedule) that
the closed-loop tracker consumes directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .closed_loop import WaypointReference
from .errors import ConfigurationError, PlanningFailure
from .mpc import (
    CostWeights,
    HorizonReference,
    HybridMpc,
    InternalGuard,
    InternalModel,
    SolverConfig,
)
from .params import CableParams
from .planner_geometry import Obstacle, min_margin, obstacle_margin
from .pod import PodBasis
from .reference import make_quintic_spline


@dataclass
class PlanWaypoint:
    """One attractor waypoint: arrive at ``time``, hold for ``dwell``."""

    time: float
    point: np.ndarray
    dwell: float = 0.0

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=float)


@dataclass
class PlanSpec:
    waypoints: List[PlanWaypoint]
    mode_schedule: List[Tuple[float, int]] = field(default_factory=list)
    guards: List[InternalGuard] = field(default_factory=list)
    obstacles: List[Obstacle] = field(default_factory=list)
    cooldown: float = 2.0
    mu_schedule: Tuple[float, ...] = (10.0, 1.0, 0.1)
    R: int = 2
    plan_step: float = 2.5e-3          # internal integration step of the ROM
    ctrl_step: float = 2.5e-2          # one planned input per control step
    frame: str = "top"
    weights: CostWeights = None
    solver: SolverConfig = None
    refine_iters: int = 10

    def __post_init__(self):
        if len(self.waypoints) < 2:
            raise ConfigurationError("a plan needs at least two waypoints")
        times = [w.time for w in self.waypoints]
        for a, b, w in zip(times, times[1:], self.waypoints):
            if b <= a + w.dwell:
                raise ConfigurationError("waypoint times must leave room for dwells")
        mus = self.mu_schedule
        if any(b >= a for a, b in zip(mus, mus[1:])):
            raise ConfigurationError("mu schedule must be strictly decreasing")
        if self.solver is None:
            self.solver = SolverConfig(variant="hilqr", max_iters=20)
        if self.solver.variant != "hilqr":
            raise ConfigurationError(
                "planning requires the full HiLQR; RTI is not accepted here"
            )
        if self.weights is None:
            self.weights = CostWeights()
        ratio = self.ctrl_step / self.plan_step
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigurationError("ctrl_step must be a multiple of plan_step")

    @property
    def substeps(self) -> int:
        return int(round(self.ctrl_step / self.plan_step))

    def spline_waypoints(self):
        """Waypoint list with dwell holds expanded into duplicate points."""
        out = []
        for w in self.waypoints:
            out.append((w.time, w.point))
            if w.dwell > 0.0:
                out.append((w.time + w.dwell, w.point))
        return out

    @property
    def duration(self) -> float:
        last = self.waypoints[-1]
        return last.time + last.dwell


@dataclass
class PlannedReference:
    """Planner output in node space, consumable by the closed-loop tracker."""

    times: np.ndarray          # (n+1,)
    node_ref: np.ndarray       # (n+1, 6(M+1))
    input_ref: np.ndarray      # (n, 3)
    modes: np.ndarray          # (n+1,)
    zs: np.ndarray             # (n+1, nz) reduced states
    dt: float

    @property
    def m1(self) -> int:
        return self.node_ref.shape[1] // 6

    def _index(self, t: float) -> int:
        i = int(round((t - self.times[0]) / self.dt))
        return min(max(i, 0), len(self.times) - 1)

    def mode_at(self, t: float) -> int:
        return int(self.modes[self._index(t)])

    def node_state(self, t: float):
        i = self._index(t)
        vec = self.node_ref[i]
        m1 = self.m1
        nodes = vec[: 3 * m1].reshape(m1, 3)
        vels = vec[3 * m1 :].reshape(m1, 3)
        acc = self.input_ref[min(i, len(self.input_ref) - 1)]
        return nodes, vels, acc

    def horizon(self, t0: float, dt: float, H: int) -> HorizonReference:
        idx = np.array([self._index(t0 + k * dt) for k in range(H + 1)])
        return HorizonReference(
            self.node_ref[idx],
            self.input_ref[np.minimum(idx[:-1], len(self.input_ref) - 1)],
            self.modes[idx],
        )

    @property
    def tip_positions(self) -> np.ndarray:
        m1 = self.m1
        return self.node_ref[:, 3 * (m1 - 1) : 3 * m1]


@dataclass
class PlanResult:
    reference: PlannedReference
    us: np.ndarray
    cost: float
    homotopy_violations: List[float]
    min_margin: float
    segment_bounds: List[Tuple[int, int]]   # step index ranges per segment


def _total_violation(nodes_flat: np.ndarray, obstacles, m1: int) -> float:
    """Sum of margin violations over all nodes and samples."""
    pos = nodes_flat[:, : 3 * m1].reshape(-1, 3)
    total = 0.0
    for obs in obstacles:
        c = obstacle_margin(pos, obs)
        total += float(np.sum(np.maximum(0.0, -c)))
    return total


def plan(
    spec: PlanSpec,
    bases: Dict[int, PodBasis],
    params: CableParams,
    z0: np.ndarray,
    q0: int = 0,
) -> PlanResult:
    """Produce an obstacle-clearing reference trajectory for the mission.

    ``z0`` is the initial reduced state (mode ``q0``). Raises
    PlanningFailure when any obstacle is still penetrated after the
    homotopy and refinement passes.
    """
    internal = InternalModel(
        bases, params, R=spec.R, dt=spec.ctrl_step,
        guards=spec.guards, substeps=spec.substeps, cooldown=spec.cooldown,
    )
    m1 = internal.models[0].M + 1
    spline = make_quintic_spline(spec.spline_waypoints(), spec.mode_schedule)
    wref = WaypointReference(spline, params, m1, spec.frame)

    # segment boundaries: waypoint arrivals and dwell ends, on the ctrl grid
    cuts = sorted({0.0, spec.duration}
                  | {w.time for w in spec.waypoints}
                  | {w.time + w.dwell for w in spec.waypoints if w.dwell > 0.0})
    steps = [int(round(c / spec.ctrl_step)) for c in cuts]
    segments = [(a, b) for a, b in zip(steps, steps[1:]) if b > a]
    n_total = segments[-1][1]

    us = np.zeros((n_total, 3))
    violations: List[float] = []
    for mu in spec.mu_schedule:
        weights = CostWeights(
            pos_weight=spec.weights.pos_weight,
            vel_weight=spec.weights.vel_weight,
            terminal_scale=spec.weights.terminal_scale,
            input_weight=spec.weights.input_weight,
            barrier_gain=mu,
            barrier_floor=spec.weights.barrier_floor,
        )
        mpc = HybridMpc(internal, weights, spec.obstacles, spec.solver)
        z_seg = np.asarray(z0, dtype=float)
        q_seg = q0
        t_last = -np.inf
        node_rows = []
        for (a, b) in segments:
            t_seg = a * spec.ctrl_step
            ref = wref.horizon(t_seg, spec.ctrl_step, b - a)
            sol = mpc.solve(q_seg, z_seg, ref, us[a:b], t0=t_seg, t_last_event=t_last)
            if sol.stats.failed:
                raise PlanningFailure(
                    f"segment [{t_seg:.2f}, {b * spec.ctrl_step:.2f}] s failed: "
                    f"{sol.stats.message}"
                )
            us[a:b] = sol.us
            for k in range(b - a):
                node_rows.append(internal.node_projection(sol.qs[k]) @ sol.zs[k])
            # carry the terminal state and event bookkeeping into the next leg
            ev_steps = [k for k in range(b - a) if sol.qs[k + 1] != sol.qs[k]]
            if ev_steps:
                t_last = t_seg + (ev_steps[-1] + 1) * spec.ctrl_step
            z_seg = sol.zs[-1]
            q_seg = int(sol.qs[-1])
        node_rows.append(internal.node_projection(q_seg) @ z_seg)
        violations.append(
            _total_violation(np.asarray(node_rows), spec.obstacles, m1)
        )

    # full-horizon refinement with the final barrier gain
    weights = CostWeights(
        pos_weight=spec.weights.pos_weight,
        vel_weight=spec.weights.vel_weight,
        terminal_scale=spec.weights.terminal_scale,
        input_weight=spec.weights.input_weight,
        barrier_gain=spec.mu_schedule[-1],
        barrier_floor=spec.weights.barrier_floor,
    )
    refine_cfg = SolverConfig(
        variant="hilqr",
        max_iters=spec.refine_iters,
        tol=spec.solver.tol,
    )
    mpc = HybridMpc(internal, weights, spec.obstacles, refine_cfg)
    ref = wref.horizon(0.0, spec.ctrl_step, n_total)
    sol = mpc.solve(q0, np.asarray(z0, dtype=float), ref, us, t0=0.0)
    if sol.stats.failed:
        raise PlanningFailure(f"full-horizon refinement failed: {sol.stats.message}")
    us = sol.us

    node_ref = np.empty((n_total + 1, 6 * m1))
    for k in range(n_total + 1):
        node_ref[k] = internal.node_projection(sol.qs[k]) @ sol.zs[k]
    times = np.arange(n_total + 1) * spec.ctrl_step
    planned = PlannedReference(times, node_ref, us.copy(), sol.qs.copy(),
                               sol.zs.copy(), spec.ctrl_step)
    pos = node_ref[:, : 3 * m1].reshape(-1, 3)
    margin = min_margin(pos, spec.obstacles) if spec.obstacles else np.inf
    violations.append(_total_violation(node_ref, spec.obstacles, m1))
    if spec.obstacles and margin <= 0.0:
        worst = np.argmin([
            min_margin(node_ref[a : b + 1, : 3 * m1].reshape(-1, 3), spec.obstacles)
            for a, b in segments
        ])
        raise PlanningFailure(
            f"plan penetrates an obstacle (min margin {margin:.4f}) "
            f"in segment {int(worst)}"
        )
    return PlanResult(planned, us, sol.cost, violations, float(margin), segments)
