"""Hybrid nonlinear MPC over the reduced model.

The internal model is a hybrid automaton: reduced dynamics per discrete
mode, proximity guards, and affine reset maps (basis transfer plus the
inelastic impact on attach). Two solver variants are provided: the full
iterative LQR with Levenberg-Marquardt regularization and backtracking
line search, and the single-sweep real-time iteration (RTI).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, SolverFailure
from .params import CableParams, Mode
from .planner_geometry import Obstacle, obstacle_margin
from .pod import PodBasis, VARIANT_PROPOSED
from .rom import ReducedModel

_CS_STEP = 1e-20          # complex-step size for dynamics linearization


@dataclass
class InternalGuard:
    """Guard of the controller-internal automaton (planner-known geometry)."""

    kind: str                     # "attach" | "detach"
    center: np.ndarray            # payload pickup / drop-off location
    radius: float = 0.05
    armed_after: float = 0.0
    payload_vel: np.ndarray = None  # payload velocity at pickup (default rest)

    def __post_init__(self):
        if self.kind not in ("attach", "detach"):
            raise ConfigurationError(f"unknown guard kind {self.kind!r}")
        self.center = np.asarray(self.center, dtype=float)
        if self.payload_vel is None:
            self.payload_vel = np.zeros(3)


class InternalModel:
    """Hybrid reduced-order successor map used inside the MPC horizon."""

    def __init__(
        self,
        bases: Dict[int, PodBasis],
        params: CableParams,
        R: int,
        dt: float,
        guards: Sequence[InternalGuard] = (),
        substeps: int = 1,
        cooldown: float = 2.0,
    ):
        for q in (0, 1):
            if bases[q].variant != VARIANT_PROPOSED:
                raise ConfigurationError("internal model requires proposed-variant bases")
        self.models = {
            q: ReducedModel(bases[q], params, R=R, mode=Mode(q)) for q in (0, 1)
        }
        self.params = params
        self.R = R
        self.dt = dt
        self.guards = list(guards)
        self.substeps = substeps
        self.cooldown = cooldown
        self.nz = self.models[0].nz
        self._resets: Dict[Tuple[int, int], Tuple[np.ndarray, np.ndarray]] = {}

    # -- resets -----------------------------------------------------------

    def _reset_map(self, q_from: int, q_to: int, guard: InternalGuard, z: np.ndarray):
        """Apply the mode-transition reset to a batch of reduced states."""
        m_from, m_to = self.models[q_from], self.models[q_to]
        r, v = m_from.nodes(z)
        if q_from == 0 and q_to == 1:
            # inelastic pickup: momentum-conserving tip velocity reset using
            # the fine-grid lumped tip mass
            mu = 0.5 * self.params.rho_lin * self.params.h_s
            vN = v[..., -1, :]
            v = v.copy()
            v[..., -1, :] = (self.params.m_p * guard.payload_vel + mu * vN) / (
                self.params.m_p + mu
            )
        return m_to.project_coarse(r, v)

    def reset_matrices(self, q_from: int, q_to: int, guard: InternalGuard):
        """Affine form (C, c0) of the reset: z+ = C z- + c0 (built once)."""
        key = (q_from, q_to)
        if key not in self._resets:
            zero = np.zeros(self.nz)
            c0 = self._reset_map(q_from, q_to, guard, zero)
            eye = np.eye(self.nz)
            C = self._reset_map(q_from, q_to, guard, eye).T - c0[:, None]
            self._resets[key] = (C, c0)
        return self._resets[key]

    # -- successor --------------------------------------------------------

    def check_guards(self, q: int, z: np.ndarray, t: float) -> Optional[InternalGuard]:
        tip, _ = self.models[q].tip(z)
        for g in self.guards:
            if t < g.armed_after:
                continue
            if g.kind == "attach" and q == 0:
                if np.linalg.norm(tip - g.center) <= g.radius:
                    return g
            elif g.kind == "detach" and q == 1:
                if np.linalg.norm(tip - g.center) <= g.radius:
                    return g
        return None

    def step(self, q: int, z: np.ndarray, v: np.ndarray, t: float, check: bool = True):
        """One horizon step: integrate, then fire at most one transition.

        Returns (q_next, z_next, guard or None); ``check=False`` suppresses
        guard logic (cooldown after a recent transition).
        """
        z_next = self.models[q].step(z, v, self.dt, self.substeps)
        g = self.check_guards(q, z_next, t + self.dt) if check else None
        if g is None:
            return q, z_next, None
        q_next = 1 if g.kind == "attach" else 0
        z_next = self._reset_map(q, q_next, g, z_next)
        return q_next, z_next, g

    def step_batch(self, q: int, Z: np.ndarray, V: np.ndarray) -> np.ndarray:
        """Mode-frozen integration of a batch (no guard logic); used for
        complex-step linearization."""
        return self.models[q].step(Z, V, self.dt, self.substeps)

    # -- node-space projection -------------------------------------------

    def node_projection(self, q: int) -> np.ndarray:
        """Linear map P^q from the reduced state to stacked coarse-grid node
        positions and velocities (6(M+1) x nz)."""
        attr = f"_P{q}"
        if not hasattr(self, attr):
            m = self.models[q]
            eye = np.eye(self.nz)
            r, v = m.nodes(eye)
            P = np.concatenate(
                [r.reshape(self.nz, -1), v.reshape(self.nz, -1)], axis=1
            ).T
            setattr(self, attr, P)
        return getattr(self, attr)

    def node_vector(self, q: int, z: np.ndarray) -> np.ndarray:
        r, v = self.models[q].nodes(z)
        return np.concatenate([np.ravel(r), np.ravel(v)])


# -- cost ------------------------------------------------------------------


@dataclass
class CostWeights:
    """Quadratic node-level tracking weights plus barrier parameters."""

    pos_weight: float = 20.0
    vel_weight: float = 2.0
    terminal_scale: float = 10.0
    input_weight: float = 0.1
    barrier_gain: float = 1.0       # mu in the relaxed log barrier
    barrier_floor: float = 0.05     # quadratic extension threshold on the margin
    S: np.ndarray = None            # overrides the diagonal defaults when given
    S_H: np.ndarray = None
    W: np.ndarray = None

    def build(self, n_coarse_nodes: int):
        dim = 3 * n_coarse_nodes
        if self.S is None:
            self.S = np.diag(
                np.concatenate(
                    [np.full(dim, self.pos_weight), np.full(dim, self.vel_weight)]
                )
            )
        if self.S_H is None:
            self.S_H = self.terminal_scale * self.S
        if self.W is None:
            self.W = self.input_weight * np.eye(3)
        if np.any(np.linalg.eigvalsh(self.W) <= 0.0):
            raise ConfigurationError("input weight W must be positive definite")
        return self


def relaxed_log_barrier(c, mu: float, eps: float):
    """Capped smooth log barrier on the signed margin c.

    Zero (with zero slope and curvature) for c >= 1, log-shaped repulsion
    mu*(-log c + 2c - c^2/2 - 3/2) on [eps, 1], and a C2 quadratic Taylor
    extension below eps so infeasible rollouts stay finite.

    Returns (value, first derivative, second derivative), elementwise.
    """
    c = np.asarray(c, dtype=float)
    val = np.zeros_like(c)
    d1 = np.zeros_like(c)
    d2 = np.zeros_like(c)
    mid = (c >= eps) & (c < 1.0)
    cs = np.where(mid, c, 1.0)
    val[mid] = (-np.log(cs) + 2.0 * cs - 0.5 * cs**2 - 1.5)[mid]
    d1[mid] = (-((1.0 - cs) ** 2) / cs)[mid]
    d2[mid] = (1.0 / cs**2 - 1.0)[mid]
    low = c < eps
    v0 = -np.log(eps) + 2.0 * eps - 0.5 * eps**2 - 1.5
    g0 = -((1.0 - eps) ** 2) / eps
    h0 = 1.0 / eps**2 - 1.0
    dc = c[low] - eps
    val[low] = v0 + g0 * dc + 0.5 * h0 * dc**2
    d1[low] = g0 + h0 * dc
    d2[low] = h0
    return mu * val, mu * d1, mu * d2


@dataclass
class HorizonReference:
    """Reference over one horizon, expressed in coarse-grid node space."""

    node_ref: np.ndarray      # (H+1, 6(M+1))
    input_ref: np.ndarray     # (H, 3)
    modes: np.ndarray         # (H+1,) reference discrete modes


class StageCost:
    """Node-level quadratic tracking cost with obstacle barrier terms."""

    def __init__(
        self,
        internal: InternalModel,
        weights: CostWeights,
        obstacles: Sequence[Obstacle] = (),
    ):
        self.internal = internal
        m1 = internal.models[0].M + 1
        self.weights = weights.build(m1)
        self.obstacles = list(obstacles)
        self.n_nodes = m1

    def _node_pos_map(self, q: int) -> np.ndarray:
        """Position block of the node projection, shape (n_nodes, 3, nz)."""
        attr = f"_P3_{q}"
        if not hasattr(self, attr):
            P = self.internal.node_projection(q)
            setattr(self, attr, P[: 3 * self.n_nodes].reshape(self.n_nodes, 3, -1))
        return getattr(self, attr)

    def barrier_values(self, q: int, Z: np.ndarray) -> np.ndarray:
        """Total barrier cost per state in a batch Z of shape (..., nz)."""
        if not self.obstacles:
            return np.zeros(Z.shape[:-1])
        P3 = self._node_pos_map(q)
        pos = np.einsum("ikz,...z->...ik", P3, Z)
        w = self.weights
        total = np.zeros(Z.shape[:-1])
        for obs in self.obstacles:
            c = obstacle_margin(pos, obs)
            val, _, _ = relaxed_log_barrier(c, w.barrier_gain, w.barrier_floor)
            total += np.sum(val, axis=-1)
        return total

    def _barrier_terms(self, q: int, z: np.ndarray, want_derivs: bool):
        if not self.obstacles:
            if want_derivs:
                return 0.0, np.zeros(self.internal.nz), np.zeros((self.internal.nz,) * 2)
            return 0.0
        P3 = self._node_pos_map(q)
        pos = np.einsum("ikz,z->ik", P3, z)
        w = self.weights
        total = 0.0
        gz = np.zeros(self.internal.nz)
        Hz = np.zeros((self.internal.nz, self.internal.nz))
        for obs in self.obstacles:
            c = obstacle_margin(pos, obs)
            val, d1, d2 = relaxed_log_barrier(c, w.barrier_gain, w.barrier_floor)
            total += float(np.sum(val))
            if want_derivs:
                gc = obs.margin_gradient(pos)                  # (n_nodes, 3)
                Gi = np.einsum("ikz,ik->iz", P3, gc)           # (n_nodes, nz)
                gz += d1 @ Gi
                Hz += np.einsum("i,iz,iw->zw", d2, Gi, Gi)
                Hz += np.einsum("i,ikz,kl,ilw->zw", d1, P3, obs.margin_hessian(), P3)
        if want_derivs:
            return total, gz, Hz
        return total

    def stage(self, q: int, z, q_hat: int, node_hat, v, v_hat) -> float:
        e = self.internal.node_projection(q) @ z - node_hat
        dv = v - v_hat
        cost = float(e @ self.weights.S @ e + dv @ self.weights.W @ dv)
        return cost + self._barrier_terms(q, z, False)

    def terminal(self, q: int, z, q_hat: int, node_hat) -> float:
        e = self.internal.node_projection(q) @ z - node_hat
        return float(e @ self.weights.S_H @ e) + self._barrier_terms(q, z, False)

    def stage_derivs(self, q: int, z, node_hat, v, v_hat):
        P = self.internal.node_projection(q)
        e = P @ z - node_hat
        lz = 2.0 * P.T @ (self.weights.S @ e)
        lzz = 2.0 * P.T @ self.weights.S @ P
        lv = 2.0 * self.weights.W @ (v - v_hat)
        lvv = 2.0 * self.weights.W
        _, bg, bh = self._barrier_terms(q, z, True)
        return lz + bg, lzz + bh, lv, lvv

    def terminal_derivs(self, q: int, z, node_hat):
        P = self.internal.node_projection(q)
        e = P @ z - node_hat
        lz = 2.0 * P.T @ (self.weights.S_H @ e)
        lzz = 2.0 * P.T @ self.weights.S_H @ P
        _, bg, bh = self._barrier_terms(q, z, True)
        return lz + bg, lzz + bh


# -- solver ----------------------------------------------------------------


@dataclass
class SolverConfig:
    variant: str = "hilqr"          # "hilqr" | "rti"
    max_iters: int = 30
    tol: float = 1e-6               # stop when the cost decrease drops below
    lm_init: float = 1e-6
    lm_up: float = 10.0
    lm_down: float = 5.0
    lm_max: float = 1e8
    alpha_factor: float = 0.5
    alpha_min: float = 1e-3

    def __post_init__(self):
        if self.variant not in ("hilqr", "rti"):
            raise ConfigurationError(f"unknown solver variant {self.variant!r}")
        if self.variant == "rti":
            self.max_iters = 1


@dataclass
class SolveStats:
    iterations: int = 0
    backward_sweeps: int = 0
    forward_sweeps: int = 0
    cost_trace: List[float] = field(default_factory=list)
    lambda_trace: List[float] = field(default_factory=list)
    wall_ms: float = 0.0
    converged: bool = False
    failed: bool = False
    message: str = ""


@dataclass
class MpcSolution:
    us: np.ndarray            # (H, 3)
    zs: np.ndarray            # (H+1, nz)
    qs: np.ndarray            # (H+1,)
    cost: float
    stats: SolveStats
    gains: Optional[List[np.ndarray]] = None


class HybridMpc:
    """HiLQR / HiLQR-RTI solver over the hybrid reduced model."""

    def __init__(
        self,
        internal: InternalModel,
        weights: CostWeights,
        obstacles: Sequence[Obstacle] = (),
        config: SolverConfig = None,
    ):
        self.internal = internal
        self.cost = StageCost(internal, weights, obstacles)
        self.config = config or SolverConfig()

    # -- rollout ----------------------------------------------------------

    def rollout(
        self,
        q0: int,
        z0: np.ndarray,
        us: np.ndarray,
        t0: float = 0.0,
        t_last_event: float = -np.inf,
    ):
        """Forward pass under the hybrid successor map.

        Returns (qs, zs, transitions) where ``transitions[k]`` holds the
        reset matrices applied during step k (None otherwise); diverged
        rollouts raise SolverFailure. Guards are suppressed during the
        cooldown after the most recent transition (real or predicted).
        """
        H = len(us)
        zs = np.empty((H + 1, self.internal.nz))
        qs = np.empty(H + 1, dtype=int)
        transitions: List[Optional[Tuple[np.ndarray, np.ndarray]]] = [None] * H
        zs[0] = z0
        qs[0] = q0
        t_last = t_last_event
        for k in range(H):
            t = t0 + k * self.internal.dt
            check = (t + self.internal.dt - t_last) >= self.internal.cooldown
            q2, z2, g = self.internal.step(qs[k], zs[k], us[k], t, check=check)
            if not np.all(np.isfinite(z2)):
                raise SolverFailure(f"divergent rollout at step {k}")
            if g is not None:
                transitions[k] = self.internal.reset_matrices(qs[k], q2, g)
                t_last = t + self.internal.dt
            qs[k + 1] = q2
            zs[k + 1] = z2
        return qs, zs, transitions

    def total_cost(self, qs, zs, us, ref: HorizonReference) -> float:
        H = len(us)
        J = 0.0
        for k in range(H):
            J += self.cost.stage(
                qs[k], zs[k], ref.modes[k], ref.node_ref[k], us[k], ref.input_ref[k]
            )
        J += self.cost.terminal(qs[H], zs[H], ref.modes[H], ref.node_ref[H])
        return J

    # -- linearization ----------------------------------------------------

    def linearize_step(self, q: int, z: np.ndarray, u: np.ndarray):
        """Complex-step Jacobians (A, B) of the mode-frozen discrete step."""
        A, B = self.linearize_all(np.array([q]), z[None], u[None])
        return A[0], B[0]

    def linearize_all(self, qs, zs, us):
        """Jacobians along a trajectory, one batched complex-step evaluation
        per discrete mode present."""
        H = len(us)
        nz, nu = self.internal.nz, 3
        h = _CS_STEP
        A = np.empty((H, nz, nz))
        B = np.empty((H, nz, nu))
        pert_z = 1j * h * np.eye(nz)
        pert_u = 1j * h * np.eye(nu)
        for q in (0, 1):
            idx = np.flatnonzero(np.asarray(qs[:H]) == q)
            if idx.size == 0:
                continue
            Z = np.repeat(zs[idx].astype(complex)[:, None, :], nz + nu, axis=1)
            U = np.repeat(us[idx].astype(complex)[:, None, :], nz + nu, axis=1)
            Z[:, :nz] += pert_z
            U[:, nz:] += pert_u
            J = self.internal.step_batch(q, Z, U).imag / h
            A[idx] = np.swapaxes(J[:, :nz, :], 1, 2)
            B[idx] = np.swapaxes(J[:, nz:, :], 1, 2)
        return A, B

    # -- solve ------------------------------------------------------------

    def solve(
        self,
        q0: int,
        z0: np.ndarray,
        ref: HorizonReference,
        us_init: np.ndarray,
        t0: float = 0.0,
        t_last_event: float = -np.inf,
    ) -> MpcSolution:
        cfg = self.config
        stats = SolveStats()
        t_start = time.perf_counter()
        us = np.array(us_init, dtype=float)
        H = len(us)
        if ref.node_ref.shape[0] != H + 1 or ref.input_ref.shape[0] != H:
            raise ConfigurationError("reference length does not match the horizon")

        try:
            qs, zs, transitions = self.rollout(q0, z0, us, t0, t_last_event)
            J = self.total_cost(qs, zs, us, ref)
        except SolverFailure as e:
            stats.failed = True
            stats.message = str(e)
            stats.wall_ms = 1e3 * (time.perf_counter() - t_start)
            return MpcSolution(us, np.tile(z0, (H + 1, 1)), np.full(H + 1, q0), np.inf, stats)
        stats.cost_trace.append(J)

        lam = 0.0 if cfg.variant == "rti" else cfg.lm_init
        gains = None
        for it in range(cfg.max_iters):
            stats.iterations = it + 1
            As, Bs = self.linearize_all(qs, zs, us)
            sweep = self._backward(qs, zs, us, As, Bs, transitions, ref, lam, stats)
            while sweep is None and cfg.variant == "hilqr":
                lam = max(lam, cfg.lm_init) * cfg.lm_up
                if lam > cfg.lm_max:
                    stats.failed = True
                    stats.message = "control Hessian not positive definite at max regularization"
                    break
                sweep = self._backward(qs, zs, us, As, Bs, transitions, ref, lam, stats)
            if sweep is None:
                if not stats.failed:
                    stats.failed = True
                    stats.message = "backward sweep failed"
                break
            ks, Ks, dV1, dV2 = sweep
            gains = Ks

            if cfg.variant == "rti":
                stats.forward_sweeps += 1
                try:
                    us2, qs2, zs2, tr2 = self._forward(qs, zs, us, ks, Ks, 1.0, q0, z0, t0, t_last_event)
                    J2 = self.total_cost(qs2, zs2, us2, ref)
                except SolverFailure as e:
                    stats.failed = True
                    stats.message = str(e)
                    break
                if not np.isfinite(J2):
                    stats.failed = True
                    stats.message = "non-finite cost after RTI sweep"
                    break
                us, qs, zs, transitions, J = us2, qs2, zs2, tr2, J2
                stats.cost_trace.append(J)
                break

            # full HiLQR: backtracking line search, monotone acceptance
            alpha = 1.0
            accepted = False
            while alpha >= cfg.alpha_min:
                stats.forward_sweeps += 1
                try:
                    us2, qs2, zs2, tr2 = self._forward(qs, zs, us, ks, Ks, alpha, q0, z0, t0, t_last_event)
                    J2 = self.total_cost(qs2, zs2, us2, ref)
                except SolverFailure:
                    J2 = np.inf
                expected = -(alpha * dV1 + 0.5 * alpha**2 * dV2)
                if np.isfinite(J2) and J2 < J - max(1e-4 * alpha * expected, 0.0):
                    accepted = True
                    break
                alpha *= cfg.alpha_factor
            if accepted:
                decrease = J - J2
                us, qs, zs, transitions, J = us2, qs2, zs2, tr2, J2
                stats.cost_trace.append(J)
                lam = max(lam / cfg.lm_down, 1e-12)
                stats.lambda_trace.append(lam)
                if decrease < cfg.tol:
                    stats.converged = True
                    break
            else:
                lam = max(lam, cfg.lm_init) * cfg.lm_up
                stats.lambda_trace.append(lam)
                if lam > cfg.lm_max:
                    stats.converged = True  # no further progress possible
                    break

        stats.wall_ms = 1e3 * (time.perf_counter() - t_start)
        if cfg.variant == "rti" and not stats.failed:
            stats.converged = True
        return MpcSolution(us, zs, qs, J, stats, gains)

    def _backward(self, qs, zs, us, As, Bs, transitions, ref, lam, stats):
        stats.backward_sweeps += 1
        H = len(us)
        nz = self.internal.nz
        Vz, Vzz = self.cost.terminal_derivs(qs[H], zs[H], ref.node_ref[H])
        ks: List[np.ndarray] = [None] * H
        Ks: List[np.ndarray] = [None] * H
        dV1 = 0.0
        dV2 = 0.0
        for k in reversed(range(H)):
            A, B = As[k], Bs[k]
            if transitions[k] is not None:
                C, _ = transitions[k]
                A = C @ A
                B = C @ B
            lz, lzz, lv, lvv = self.cost.stage_derivs(
                qs[k], zs[k], ref.node_ref[k], us[k], ref.input_ref[k]
            )
            Qz = lz + A.T @ Vz
            Qu = lv + B.T @ Vz
            Qzz = lzz + A.T @ Vzz @ A
            Quu = lvv + B.T @ Vzz @ B + lam * np.eye(3)
            Quz = B.T @ Vzz @ A
            try:
                L = np.linalg.cholesky(0.5 * (Quu + Quu.T))
            except np.linalg.LinAlgError:
                return None
            kff = -np.linalg.solve(Quu, Qu)
            K = -np.linalg.solve(Quu, Quz)
            ks[k] = kff
            Ks[k] = K
            dV1 += float(kff @ Qu)
            dV2 += float(kff @ Quu @ kff)
            Vz = Qz + K.T @ Quu @ kff + K.T @ Qu + Quz.T @ kff
            Vzz = Qzz + K.T @ Quu @ K + K.T @ Quz + Quz.T @ K
            Vzz = 0.5 * (Vzz + Vzz.T)
        return ks, Ks, dV1, dV2

    def _forward(self, qs_prev, zs_prev, us_prev, ks, Ks, alpha, q0, z0, t0, t_last_event):
        H = len(us_prev)
        us = np.empty_like(us_prev)
        zs = np.empty_like(zs_prev)
        qs = np.empty_like(qs_prev)
        transitions: List[Optional[Tuple[np.ndarray, np.ndarray]]] = [None] * H
        zs[0] = z0
        qs[0] = q0
        t_last = t_last_event
        for k in range(H):
            us[k] = us_prev[k] + alpha * ks[k] + Ks[k] @ (zs[k] - zs_prev[k])
            if not np.all(np.isfinite(us[k])):
                raise SolverFailure(f"non-finite control at step {k}")
            t = t0 + k * self.internal.dt
            check = (t + self.internal.dt - t_last) >= self.internal.cooldown
            q2, z2, g = self.internal.step(qs[k], zs[k], us[k], t, check=check)
            if not np.all(np.isfinite(z2)):
                raise SolverFailure(f"divergent forward pass at step {k}")
            if g is not None:
                transitions[k] = self.internal.reset_matrices(qs[k], q2, g)
                t_last = t + self.internal.dt
            qs[k + 1] = q2
            zs[k + 1] = z2
        return us, qs, zs, transitions
