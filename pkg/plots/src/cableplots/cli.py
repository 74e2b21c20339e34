"""Command-line entry point for rendering figures from experiment artifacts."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .figures import KINDS, FigureSpec, recompute_margins, render


def _load_obstacles(path: str) -> list:
    with open(path) as f:
        doc = json.load(f)
    obstacles = doc.get("obstacles", doc if isinstance(doc, list) else [])
    if not isinstance(obstacles, list):
        raise ValueError(f"{path}: expected an obstacle list or a scenario with one")
    return obstacles


def cmd_render(args) -> int:
    obstacles = _load_obstacles(args.obstacles) if args.obstacles else []
    spec = FigureSpec(kind=args.kind, inputs=args.inputs, output=args.output,
                      obstacles=obstacles, title=args.title)
    path = render(spec)
    if args.check_margins:
        if args.kind != "timelapse":
            raise ValueError("--check-margins only applies to timelapse figures")
        if not obstacles:
            raise ValueError("--check-margins needs --obstacles")
        margin = recompute_margins(args.inputs[0], obstacles)
        print(f"min obstacle margin: {margin:.6f}")
        if margin < 0.0:
            print("error: obstacle penetration detected in the logged run",
                  file=sys.stderr)
            return 1
    print(f"wrote {path}")
    return 0


def cmd_all(args) -> int:
    """Render every standard figure found in a replicate-all output directory."""
    d = args.results_dir
    out = args.output_dir or d
    os.makedirs(out, exist_ok=True)
    made, skipped = [], []

    def maybe(kind, inputs, name, **kw):
        if all(os.path.exists(p) for p in inputs):
            made.append(render(FigureSpec(kind=kind, inputs=inputs,
                                          output=os.path.join(out, name), **kw)))
        else:
            skipped.append(name)

    maybe("energy-spectrum", [os.path.join(d, "pod_energy.csv")], "pod_energy.png")
    maybe("rom-accuracy", [os.path.join(d, "rom_accuracy.csv")], "rom_accuracy.png")
    for q in (0, 1):
        maybe("mode-shapes", [os.path.join(d, f"basis_mode{q}_proposed.npz")],
              f"mode_shapes_mode{q}.png", title=f"mode {q}")

    obstacles = []
    if args.obstacles:
        obstacles = _load_obstacles(args.obstacles)
    for name in sorted(os.listdir(d)):
        if name.startswith("track_") and name.endswith(".csv"):
            stem = name[len("track_"):-len(".csv")]
            is_plan = stem.startswith("plan") or "pick" in stem
            maybe("timelapse", [os.path.join(d, name)], f"timelapse_{stem}.png",
                  obstacles=obstacles if is_plan else [], title=stem)

    summaries = sorted(
        os.path.join(d, n) for n in os.listdir(d)
        if n.startswith("summary_") and n.endswith(".json")
    )
    if summaries:
        maybe("walltime", summaries, "walltime.png")

    for p in made:
        print(f"wrote {p}")
    for n in skipped:
        print(f"skipped {n} (inputs missing)")
    if not made:
        print("error: no renderable artifacts found", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="cableplots",
                                 description="Render figures from experiment CSV/JSON artifacts.")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("render", help="render a single figure")
    r.add_argument("--kind", required=True, choices=KINDS)
    r.add_argument("--output", required=True, help="image file to write")
    r.add_argument("--obstacles", help="JSON file with an obstacle list (or a scenario)")
    r.add_argument("--title", default="")
    r.add_argument("--check-margins", action="store_true",
                   help="recompute obstacle margins from the tracking log and "
                        "fail if any sample penetrates")
    r.add_argument("inputs", nargs="+", help="input CSV/JSON/NPZ artifacts")
    r.set_defaults(func=cmd_render)

    a = sub.add_parser("all", help="render the full figure suite from a results directory")
    a.add_argument("results_dir")
    a.add_argument("--output-dir", help="where to put images (default: results dir)")
    a.add_argument("--obstacles", help="JSON file with obstacles for timelapse overlays")
    a.set_defaults(func=cmd_all)

    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, json.JSONDecodeError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
