"""Command-line entry points for training, evaluation, tracking, planning.

Subcommands write CSV/JSON artifacts into ``--out``; CSVs are deterministic
for a fixed seed and scenario, wall-clock numbers go to JSON summaries only.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import io
from .backend import BACKEND
from .closed_loop import run_closed_loop
from .errors import CableError, ConfigurationError, PlanningFailure
from .experiments import (
    ReleaseTestConfig,
    evaluate_rom,
    fdm_stability_probe,
    max_stable_dt,
    release_ground_truth,
    rom_stability_probe,
)
from .mpc import InternalModel, SolverConfig
from .params import CableParams, Mode
from .planner import plan as plan_mission
from .pod import VARIANT_BASELINE, VARIANT_PROPOSED, mode_energy
from .rom import ReducedModel, baseline_state_size, state_size
from .simulator import hanging_state
from .training import TrainingConfig, train_bases


def _scenario_params(args):
    if getattr(args, "scenario", None):
        sc = io.load_scenario(args.scenario)
        return sc, sc.params
    return None, CableParams()


def _ensure_bases(out_dir: str, params: CableParams):
    """Load basis artifacts from out_dir, training them first if absent."""
    try:
        prop = io.load_bases(out_dir, VARIANT_PROPOSED)
        base = io.load_bases(out_dir, VARIANT_BASELINE)
        return prop, base
    except ConfigurationError:
        bases = train_bases(params, TrainingConfig())
        io.save_bases(out_dir, bases)
        return (
            {q: bases[(q, VARIANT_PROPOSED)] for q in (0, 1)},
            {q: bases[(q, VARIANT_BASELINE)] for q in (0, 1)},
        )


def _initial_state(sc):
    state = hanging_state(sc.params, top=sc.initial_top, mode=sc.initial_mode)
    if sc.payload_pos is not None and sc.initial_mode == Mode.FREE:
        state.payload_pos = sc.payload_pos.copy()
        state.payload_vel = np.zeros(3)
    return state


def cmd_train_basis(args) -> int:
    sc, params = _scenario_params(args)
    t0 = time.perf_counter()
    bases = train_bases(params, TrainingConfig())
    wall = time.perf_counter() - t0
    io.save_bases(args.out, bases)
    rows = []
    for (mode, variant), basis in sorted(bases.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        energies = mode_energy(basis)
        cum = np.cumsum(energies)
        vid = 0 if variant == VARIANT_PROPOSED else 1
        for m, (s, e, c) in enumerate(zip(basis.singular_values, energies, cum), 1):
            rows.append([mode, vid, m, s, e, c])
    io.write_csv(
        os.path.join(args.out, "pod_energy.csv"),
        ["mode", "variant", "m", "sigma", "energy", "cum_energy"],
        np.array(rows),
    )
    io.write_json(
        os.path.join(args.out, "train_meta.json"),
        {
            "schema_version": io.SCHEMA_VERSION,
            "backend": BACKEND,
            "seed": args.seed,
            "wall_s": wall,
            "variant_ids": {"proposed": 0, "baseline": 1},
        },
    )
    print(f"train-basis: wrote 4 basis artifacts + pod_energy.csv to {args.out}")
    return 0


def cmd_eval_rom(args) -> int:
    sc, params = _scenario_params(args)
    prop, base = _ensure_bases(args.out, params)
    cfg = ReleaseTestConfig()
    r_max = args.rom_order or 3
    acc_rows, wall = [], {}
    for mode in (Mode.FREE, Mode.SLUNG):
        truth = release_ground_truth(params, mode, cfg)
        for R in range(1, r_max + 1):
            res = evaluate_rom(prop[int(mode)], params, R, mode, truth, cfg)
            acc_rows.append([0, int(mode), R, state_size(R), res.eps_p_rms, res.eps_v_rms])
            wall[f"proposed_mode{int(mode)}_R{R}"] = res.wall_s
            rb = R + 1  # equal reduced-state dimension
            res_b = evaluate_rom(base[int(mode)], params, rb, mode, truth, cfg)
            acc_rows.append([1, int(mode), rb, baseline_state_size(rb),
                             res_b.eps_p_rms, res_b.eps_v_rms])
            wall[f"baseline_mode{int(mode)}_R{rb}"] = res_b.wall_s
    io.write_csv(
        os.path.join(args.out, "rom_accuracy.csv"),
        ["variant", "mode", "R", "state_dim", "eps_p_rms", "eps_v_rms"],
        np.array(acc_rows),
    )
    stab_rows = []
    if not args.skip_stability:
        for mode in (Mode.FREE, Mode.SLUNG):
            dt_fdm = max_stable_dt(fdm_stability_probe(params, mode, cfg))
            dt_rom = max_stable_dt(
                rom_stability_probe(prop[int(mode)], params, 2, mode, cfg)
            )
            stab_rows.append([int(mode), dt_fdm, dt_rom, dt_rom / dt_fdm])
        io.write_csv(
            os.path.join(args.out, "rom_stability.csv"),
            ["mode", "fdm_max_dt", "rom_max_dt", "ratio"],
            np.array(stab_rows),
        )
    io.write_json(
        os.path.join(args.out, "eval_rom_meta.json"),
        {"schema_version": io.SCHEMA_VERSION, "backend": BACKEND,
         "seed": args.seed, "wall_s": wall},
    )
    print(f"eval-rom: wrote rom_accuracy.csv"
          f"{'' if args.skip_stability else ' + rom_stability.csv'} to {args.out}")
    return 0


def cmd_track(args) -> int:
    sc = io.load_scenario(args.scenario)
    prop, _ = _ensure_bases(args.out, sc.params)
    solver = SolverConfig(variant=args.solver) if args.solver else sc.solver
    cfg = sc.config
    if args.rom_order:
        from dataclasses import replace
        cfg = replace(cfg, R=args.rom_order)
    state = _initial_state(sc)
    t0 = time.perf_counter()
    end, log, summary = run_closed_loop(
        state, sc.params, prop, sc.reference(), cfg,
        solver=solver, weights=sc.weights,
        guards=sc.guards, internal_guards=sc.internal_guards,
        obstacles=sc.obstacles,
    )
    wall = time.perf_counter() - t0
    tag = f"{sc.name}_{solver.variant}"
    io.save_tracking_log(os.path.join(args.out, f"track_{tag}.csv"), log)
    io.save_summary(
        os.path.join(args.out, f"summary_{tag}.json"),
        summary,
        {"scenario": sc.name, "solver": solver.variant, "seed": args.seed,
         "backend": BACKEND, "wall_s": wall, "rom_order": cfg.R},
    )
    print(f"track: {tag} tip_rms={summary.tip_pos_rms:.4f} m "
          f"tip_vel_rms={summary.tip_vel_rms:.4f} m/s "
          f"failures={summary.solver_failures}")
    return 0


def cmd_plan(args) -> int:
    sc = io.load_scenario(args.scenario)
    spec = sc.plan_spec()
    if args.solver:
        spec.solver = SolverConfig(variant=args.solver, max_iters=spec.solver.max_iters)
        spec.__post_init__()
    prop, _ = _ensure_bases(args.out, sc.params)
    model = ReducedModel(prop[int(sc.initial_mode)], sc.params,
                         R=spec.R, mode=sc.initial_mode)
    z0 = model.project_full(_initial_state(sc))
    t0 = time.perf_counter()
    try:
        result = plan_mission(spec, prop, sc.params, z0, q0=int(sc.initial_mode))
    except PlanningFailure as e:
        io.write_json(
            os.path.join(args.out, f"plan_failure_{sc.name}.json"),
            {"schema_version": io.SCHEMA_VERSION, "scenario": sc.name,
             "error": str(e), "solver": spec.solver.variant},
        )
        print(f"plan: FAILED — {e}", file=sys.stderr)
        return 3
    wall = time.perf_counter() - t0
    io.save_plan(
        args.out, result.reference,
        {"scenario": sc.name, "R": spec.R, "cost": result.cost,
         "min_margin": result.min_margin,
         "homotopy_violations": result.homotopy_violations,
         "obstacles": [o.to_dict() for o in sc.obstacles],
         "seed": args.seed},
    )
    io.write_json(
        os.path.join(args.out, "plan_summary.json"),
        {"schema_version": io.SCHEMA_VERSION, "scenario": sc.name,
         "cost": result.cost, "min_margin": result.min_margin,
         "homotopy_violations": result.homotopy_violations,
         "backend": BACKEND, "wall_s": wall, "seed": args.seed},
    )
    print(f"plan: cost={result.cost:.4g} min_margin={result.min_margin:.4f}")
    return 0


def cmd_run_plan(args) -> int:
    sc = io.load_scenario(args.scenario)
    prop, _ = _ensure_bases(args.out, sc.params)
    internal = InternalModel(prop, sc.params, R=sc.config.R, dt=sc.config.dt_mpc)
    plan_dir = args.plan or args.out
    planned = io.load_plan(plan_dir, internal)
    solver = SolverConfig(variant=args.solver) if args.solver else SolverConfig()
    from dataclasses import replace
    cfg = replace(sc.config, duration=float(planned.times[-1]))
    state = _initial_state(sc)
    t0 = time.perf_counter()
    end, log, summary = run_closed_loop(
        state, sc.params, prop, planned, cfg,
        solver=solver, weights=sc.weights,
        guards=sc.guards, internal_guards=sc.internal_guards,
        obstacles=sc.obstacles,
    )
    wall = time.perf_counter() - t0
    tag = f"{sc.name}_plan_{solver.variant}"
    io.save_tracking_log(os.path.join(args.out, f"track_{tag}.csv"), log)
    io.save_summary(
        os.path.join(args.out, f"summary_{tag}.json"),
        summary,
        {"scenario": sc.name, "solver": solver.variant, "seed": args.seed,
         "backend": BACKEND, "wall_s": wall, "rom_order": cfg.R,
         "reference": "planned"},
    )
    print(f"run-plan: {tag} eps_p_rms={summary.eps_p_rms:.4f} m "
          f"min_margin={summary.min_obstacle_margin} "
          f"events={summary.event_kinds} failures={summary.solver_failures}")
    return 0


def cmd_replicate_all(args) -> int:
    sdir = args.scenario_dir
    out = args.out

    ns = argparse.Namespace(out=out, scenario=None, seed=args.seed,
                            rom_order=None, skip_stability=args.skip_stability)
    cmd_train_basis(ns)
    cmd_eval_rom(ns)
    for name in ("free_start", "slung_start"):
        path = os.path.join(sdir, f"{name}.json")
        for solver in ("hilqr", "rti"):
            nt = argparse.Namespace(out=out, scenario=path, seed=args.seed,
                                    solver=solver, rom_order=None)
            cmd_track(nt)
    pp = os.path.join(sdir, "pick_and_place.json")
    npn = argparse.Namespace(out=out, scenario=pp, seed=args.seed, solver=None)
    rc = cmd_plan(npn)
    if rc != 0:
        return rc
    nr = argparse.Namespace(out=out, scenario=pp, seed=args.seed,
                            solver="hilqr", plan=None)
    cmd_run_plan(nr)
    print(f"replicate-all: artifacts in {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cablempc",
                                description="Extensible-cable aerial manipulation experiments")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario_required=False):
        sp.add_argument("--scenario", required=scenario_required,
                        help="scenario JSON file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("train-basis", help="train POD bases and energy table")
    common(sp)
    sp.set_defaults(fn=cmd_train_basis)

    sp = sub.add_parser("eval-rom", help="release-test ROM accuracy/stability sweep")
    common(sp)
    sp.add_argument("--rom-order", type=int, default=None)
    sp.add_argument("--skip-stability", action="store_true")
    sp.set_defaults(fn=cmd_eval_rom)

    sp = sub.add_parser("track", help="closed-loop tracking run")
    common(sp, scenario_required=True)
    sp.add_argument("--solver", choices=("hilqr", "rti"), default=None)
    sp.add_argument("--rom-order", type=int, default=None)
    sp.set_defaults(fn=cmd_track)

    sp = sub.add_parser("plan", help="segmented obstacle-avoidance planning")
    common(sp, scenario_required=True)
    sp.add_argument("--solver", choices=("hilqr", "rti"), default=None)
    sp.set_defaults(fn=cmd_plan)

    sp = sub.add_parser("run-plan", help="track a previously computed plan")
    common(sp, scenario_required=True)
    sp.add_argument("--solver", choices=("hilqr", "rti"), default=None)
    sp.add_argument("--plan", default=None, help="directory holding plan.csv")
    sp.set_defaults(fn=cmd_run_plan)

    sp = sub.add_parser("replicate-all", help="full reproduction suite")
    common(sp)
    sp.add_argument("--scenario-dir", default="scenarios")
    sp.add_argument("--skip-stability", action="store_true")
    sp.set_defaults(fn=cmd_replicate_all)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    np.random.seed(args.seed)
    try:
        return args.fn(args)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as e:
        print(f"error: malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}",
              file=sys.stderr)
        return 2
    except ConfigurationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except CableError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
