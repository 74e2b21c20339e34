"""Scenario files, CSV/JSON persistence, and artifact naming.

All CSVs are written with 17 significant digits so repeated deterministic
runs are bit-identical; wall-clock timings are kept out of CSVs and live
in the JSON summaries instead.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .closed_loop import ClosedLoopConfig, ClosedLoopLog
from .errors import ConfigurationError
from .metrics import RunSummary
from .mpc import CostWeights, InternalGuard, SolverConfig
from .params import CableParams, Mode
from .planner import PlannedReference, PlanSpec, PlanWaypoint
from .planner_geometry import Obstacle
from .pod import PodBasis, VARIANT_BASELINE, VARIANT_PROPOSED
from .reference import ReferenceTrajectory, make_quintic_spline
from .simulator import Guard

SCHEMA_VERSION = 1
_FMT = "%.17g"


# -- low-level files -------------------------------------------------------


def _atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header: Sequence[str], rows: np.ndarray) -> None:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.size and rows.shape[1] != len(header):
        raise ConfigurationError(
            f"{len(header)} columns in header, {rows.shape[1]} in data"
        )
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_FMT % v for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_csv(path: str) -> Tuple[List[str], np.ndarray]:
    with open(path) as f:
        header = f.readline().strip().split(",")
        data = np.loadtxt(f, delimiter=",", ndmin=2)
    return header, data


def write_json(path: str, obj: dict) -> None:
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path: str) -> dict:
    with open(path) as f:
        return json.load(f)


# -- scenario --------------------------------------------------------------


@dataclass
class Scenario:
    """Parsed scenario file: everything one experiment needs."""

    name: str
    params: CableParams
    config: ClosedLoopConfig
    initial_mode: Mode
    initial_top: np.ndarray
    payload_pos: Optional[np.ndarray]
    waypoints: List[PlanWaypoint]
    mode_schedule: List[Tuple[float, int]]
    guards: List[Guard]
    internal_guards: List[InternalGuard]
    obstacles: List[Obstacle]
    weights: CostWeights
    solver: SolverConfig
    planner: dict = field(default_factory=dict)
    seed: int = 0

    def reference(self) -> ReferenceTrajectory:
        wps = []
        for w in self.waypoints:
            wps.append((w.time, w.point))
            if w.dwell > 0.0:
                wps.append((w.time + w.dwell, w.point))
        return make_quintic_spline(wps, self.mode_schedule)

    def plan_spec(self) -> PlanSpec:
        opts = dict(self.planner)
        return PlanSpec(
            waypoints=list(self.waypoints),
            mode_schedule=list(self.mode_schedule),
            guards=list(self.internal_guards),
            obstacles=list(self.obstacles),
            cooldown=opts.get("cooldown", 2.0),
            mu_schedule=tuple(opts.get("mu_schedule", (10.0, 1.0, 0.1))),
            R=self.config.R,
            plan_step=opts.get("plan_step", 2.5e-3),
            ctrl_step=opts.get("ctrl_step", 2.5e-2),
            frame=self.config.frame,
            weights=self.weights,
            refine_iters=opts.get("refine_iters", 10),
        )


def _req(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigurationError(f"scenario is missing '{key}' in {where}")
    return d[key]


def load_scenario(path: str) -> Scenario:
    doc = read_json(path)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigurationError(
            f"unsupported schema_version {doc.get('schema_version')!r} in {path}"
        )
    params = CableParams(**doc.get("params", {}))
    config = ClosedLoopConfig(**doc.get("config", {}))
    init = _req(doc, "initial", "top level")
    wp_docs = _req(doc, "waypoints", "top level")
    if not wp_docs:
        raise ConfigurationError("scenario has an empty waypoint list")
    waypoints = [
        PlanWaypoint(_req(w, "time", "waypoint"), _req(w, "point", "waypoint"),
                     w.get("dwell", 0.0))
        for w in wp_docs
    ]
    guards, iguards = [], []
    for g in doc.get("guards", []):
        kind = _req(g, "kind", "guard")
        center = g.get("center")
        guards.append(Guard(kind, center=center, radius=g.get("radius", 0.05),
                            armed_after=g.get("armed_after", 0.0)))
        icenter = center if center is not None else g.get("payload")
        if icenter is None and kind == "attach":
            icenter = _req(init, "payload", "initial (needed by attach guard)")
        iguards.append(InternalGuard(kind, center=icenter,
                                     radius=g.get("radius", 0.05),
                                     armed_after=g.get("armed_after", 0.0)))
    obstacles = [Obstacle.from_dict(o) for o in doc.get("obstacles", [])]
    weights = CostWeights(**doc.get("weights", {}))
    solver = SolverConfig(**doc.get("solver", {}))
    payload = init.get("payload")
    return Scenario(
        name=doc.get("name", os.path.splitext(os.path.basename(path))[0]),
        params=params,
        config=config,
        initial_mode=Mode(init.get("mode", 0)),
        initial_top=np.asarray(_req(init, "top", "initial"), dtype=float),
        payload_pos=None if payload is None else np.asarray(payload, dtype=float),
        waypoints=waypoints,
        mode_schedule=[tuple(m) for m in doc.get("mode_schedule", [])],
        guards=guards,
        internal_guards=iguards,
        obstacles=obstacles,
        weights=weights,
        solver=solver,
        planner=doc.get("planner", {}),
        seed=doc.get("seed", 0),
    )


# -- basis artifacts -------------------------------------------------------


def basis_path(out_dir: str, mode: int, variant: str) -> str:
    return os.path.join(out_dir, f"basis_mode{int(mode)}_{variant}.npz")


def save_bases(out_dir: str, bases: Dict[Tuple[int, str], PodBasis]) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for (mode, variant), basis in bases.items():
        basis.save(basis_path(out_dir, mode, variant))


def load_bases(out_dir: str, variant: str = VARIANT_PROPOSED) -> Dict[int, PodBasis]:
    out = {}
    for q in (0, 1):
        p = basis_path(out_dir, q, variant)
        if not os.path.exists(p):
            raise ConfigurationError(f"missing basis artifact {p}; run train-basis first")
        out[q] = PodBasis.load(p)
    return out


# -- logs ------------------------------------------------------------------


def tracking_log_columns(R: int, m1: int) -> List[str]:
    cols = ["t", "mode"]
    for name in ("r_top", "v_top", "r_tip", "v_tip", "v_cmd", "f_cmd"):
        cols += [f"{name}_{ax}" for ax in "xyz"]
    for m in range(R):
        cols += [f"a{m + 1}_{ax}" for ax in "xyz"]
    for i in range(m1):
        cols += [f"node{i}_{ax}" for ax in "xyz"]
    for i in range(m1):
        cols += [f"ref_node{i}_{ax}" for ax in "xyz"]
    return cols


def save_tracking_log(path: str, log: ClosedLoopLog) -> None:
    n = len(log.t)
    R = log.coeffs.shape[1]
    m1 = log.nodes.shape[1]
    rows = np.hstack([
        log.t[:, None], log.mode[:, None].astype(float),
        log.r_top, log.v_top, log.r_tip, log.v_tip, log.v_cmd, log.f_cmd,
        log.coeffs.reshape(n, -1), log.nodes.reshape(n, -1),
        log.ref_nodes.reshape(n, -1),
    ])
    write_csv(path, tracking_log_columns(R, m1), rows)


def save_summary(path: str, summary: RunSummary, meta: dict) -> None:
    doc = {"schema_version": SCHEMA_VERSION, "summary": summary.to_dict()}
    doc.update(meta)
    write_json(path, doc)


# -- plans -----------------------------------------------------------------


def save_plan(out_dir: str, planned: PlannedReference, meta: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    n1, nz = planned.zs.shape
    header = ["t", "q"] + [f"z{i}" for i in range(nz)] + ["v_x", "v_y", "v_z"]
    inputs = np.vstack([planned.input_ref, planned.input_ref[-1:]])
    rows = np.hstack([
        planned.times[:, None], planned.modes[:, None].astype(float),
        planned.zs, inputs,
    ])
    write_csv(os.path.join(out_dir, "plan.csv"), header, rows)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "dt": planned.dt,
        "nz": nz,
        "n_samples": n1,
    }
    doc.update(meta)
    write_json(os.path.join(out_dir, "plan_meta.json"), doc)


def load_plan(out_dir: str, internal) -> PlannedReference:
    """Rebuild a PlannedReference from plan.csv using the internal model's
    node projections (the CSV stores reduced states only)."""
    meta = read_json(os.path.join(out_dir, "plan_meta.json"))
    _, data = read_csv(os.path.join(out_dir, "plan.csv"))
    nz = int(meta["nz"])
    times = data[:, 0]
    modes = data[:, 1].astype(int)
    zs = data[:, 2 : 2 + nz]
    inputs = data[:-1, 2 + nz : 5 + nz]
    node_ref = np.empty((len(times), internal.node_projection(0).shape[0]))
    for k in range(len(times)):
        node_ref[k] = internal.node_projection(int(modes[k])) @ zs[k]
    return PlannedReference(times, node_ref, inputs, modes, zs, float(meta["dt"]))
