"""Render the standard figure kinds from experiment CSV/JSON artifacts.

This package talks to the experiment pipeline only through its files:
tracking logs, POD energy tables, ROM accuracy sweeps, basis archives, and
JSON summaries. Nothing here imports the simulation code.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

KINDS = ("timelapse", "mode-shapes", "energy-spectrum", "rom-accuracy", "walltime")

SUPPORTED_SCHEMA = 1


@dataclass
class FigureSpec:
    """One figure to render: input artifacts, kind, and output image path."""

    kind: str
    inputs: List[str]
    output: str
    obstacles: List[dict] = field(default_factory=list)
    xlim: Optional[Tuple[float, float]] = None
    ylim: Optional[Tuple[float, float]] = None
    title: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        if not self.inputs:
            raise ValueError("figure spec needs at least one input file")


# -- artifact parsing -------------------------------------------------------


def read_csv(path: str) -> Tuple[List[str], np.ndarray]:
    with open(path) as f:
        header = f.readline().strip().split(",")
        data = np.loadtxt(f, delimiter=",", ndmin=2)
    if data.size and data.shape[1] != len(header):
        raise ValueError(f"{path}: {len(header)} header columns, {data.shape[1]} data columns")
    return header, data


def read_json(path: str) -> dict:
    with open(path) as f:
        doc = json.load(f)
    v = doc.get("schema_version")
    if v is not None and v != SUPPORTED_SCHEMA:
        raise ValueError(f"{path}: unsupported schema_version {v!r}")
    return doc


def column(header: Sequence[str], data: np.ndarray, name: str, path: str = "") -> np.ndarray:
    try:
        return data[:, header.index(name)]
    except ValueError:
        raise ValueError(f"missing column {name!r} in {path or 'input'} "
                         f"(available: {', '.join(header[:8])}, ...)") from None


def node_positions(header: Sequence[str], data: np.ndarray, path: str = "",
                   prefix: str = "node") -> np.ndarray:
    """Stack the cable node columns of a tracking log into (rows, m1, 3)."""
    pat = re.compile(rf"^{prefix}(\d+)_x$")
    ids = sorted(int(m.group(1)) for c in header if (m := pat.match(c)))
    if not ids:
        raise ValueError(f"missing column '{prefix}0_x' in {path or 'input'}")
    cols = []
    for i in ids:
        cols.append([column(header, data, f"{prefix}{i}_{ax}", path) for ax in "xyz"])
    return np.transpose(np.array(cols), (2, 0, 1))   # (rows, m1, 3)


# -- obstacle margins -------------------------------------------------------


def obstacle_margin(points: np.ndarray, obs: dict) -> np.ndarray:
    """Signed ellipsoid margin of points (..., 3); negative means penetration."""
    center = np.asarray(obs["center"], dtype=float)
    semi = np.asarray(obs["semi_axes"], dtype=float)
    inv2 = np.zeros(3)
    for k in range(3):
        if k not in tuple(obs.get("infinite_axes", ())):
            inv2[k] = 1.0 / semi[k] ** 2
    d = np.asarray(points) - center
    return np.sum(d * d * inv2, axis=-1) - 1.0


def recompute_margins(track_csv: str, obstacles: Sequence[dict]) -> float:
    """Smallest obstacle margin over every logged cable node of a run."""
    header, data = read_csv(track_csv)
    pos = node_positions(header, data, track_csv).reshape(-1, 3)
    return min(float(np.min(obstacle_margin(pos, o))) for o in obstacles)


# -- renderers --------------------------------------------------------------


def _draw_obstacles(ax, obstacles: Sequence[dict]):
    for obs in obstacles:
        c = np.asarray(obs["center"], dtype=float)
        s = np.asarray(obs["semi_axes"], dtype=float)
        inf = tuple(obs.get("infinite_axes", ()))
        if 2 in inf:
            # infinite along z: a vertical band in the side view
            ax.axvspan(c[1] - s[1], c[1] + s[1], color="0.55", alpha=0.6, zorder=0)
        else:
            t = np.linspace(0.0, 2.0 * np.pi, 100)
            ax.fill(c[1] + s[1] * np.cos(t), c[2] + s[2] * np.sin(t),
                    color="0.55", alpha=0.6, zorder=0)


def _render_timelapse(spec: FigureSpec, ax):
    header, data = read_csv(spec.inputs[0])
    t = column(header, data, "t", spec.inputs[0])
    mode = column(header, data, "mode", spec.inputs[0])
    pos = node_positions(header, data, spec.inputs[0])
    _draw_obstacles(ax, spec.obstacles)
    n = len(t)
    stride = max(1, n // 60)
    t_span = max(t[-1] - t[0], 1e-12)
    for k in range(0, n, stride):
        alpha = 0.12 + 0.88 * (t[k] - t[0]) / t_span
        color = "tab:blue" if mode[k] == 0 else "tab:red"
        ax.plot(pos[k, :, 1], pos[k, :, 2], color=color, alpha=alpha, lw=1.0)
    # highlight the frames right after each discrete transition
    flips = np.flatnonzero(np.diff(mode) != 0) + 1
    for k in flips:
        ax.plot(pos[k, :, 1], pos[k, :, 2], color="k", lw=1.8, zorder=5)
    ax.set_xlabel("y [m]")
    ax.set_ylabel("z [m]")
    ax.set_aspect("equal", adjustable="datalim")


def _render_mode_shapes(spec: FigureSpec, ax):
    with np.load(spec.inputs[0], allow_pickle=False) as z:
        if "modes" not in z:
            raise ValueError(f"missing array 'modes' in {spec.inputs[0]}")
        modes = z["modes"]
        h_d = float(z["h_d"])
    s = np.arange(modes.shape[0]) * h_d
    for m in range(min(4, modes.shape[1])):
        ax.plot(s, modes[:, m], marker="o", ms=3, label=f"mode {m + 1}")
    ax.axhline(0.0, color="0.7", lw=0.8)
    ax.set_xlabel("arc length [m]")
    ax.set_ylabel("mode shape [1/sqrt(m)]")
    ax.legend(frameon=False)


def _render_energy_spectrum(spec: FigureSpec, ax):
    header, data = read_csv(spec.inputs[0])
    path = spec.inputs[0]
    q = column(header, data, "mode", path)
    variant = column(header, data, "variant", path)
    m = column(header, data, "m", path)
    e = column(header, data, "energy", path)
    width = 0.2
    for i, (qq, vv) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
        sel = (q == qq) & (variant == vv)
        if not np.any(sel):
            continue
        label = f"mode {qq}, {'proposed' if vv == 0 else 'baseline'}"
        ax.bar(m[sel] + (i - 1.5) * width, e[sel], width=width, label=label)
    ax.set_yscale("log")
    ax.set_xlabel("POD mode index")
    ax.set_ylabel("relative energy")
    ax.legend(frameon=False, fontsize=8)


def _render_rom_accuracy(spec: FigureSpec, ax):
    header, data = read_csv(spec.inputs[0])
    path = spec.inputs[0]
    variant = column(header, data, "variant", path)
    q = column(header, data, "mode", path)
    dim = column(header, data, "state_dim", path)
    eps = column(header, data, "eps_p_rms", path)
    styles = {0: "-o", 1: "--s"}
    for vv in (0, 1):
        for qq in (0, 1):
            sel = (variant == vv) & (q == qq)
            if not np.any(sel):
                continue
            order = np.argsort(dim[sel])
            label = f"{'proposed' if vv == 0 else 'baseline'}, mode {qq}"
            ax.plot(dim[sel][order], eps[sel][order], styles[vv], label=label)
    ax.set_yscale("log")
    ax.set_xlabel("reduced state dimension")
    ax.set_ylabel(r"position error $\epsilon_p^{rms}$ [m]")
    ax.legend(frameon=False, fontsize=8)


def _render_walltime(spec: FigureSpec, ax):
    labels, values = [], []
    for path in spec.inputs:
        doc = read_json(path)
        if "wall_s" in doc and isinstance(doc["wall_s"], dict):
            for k, v in sorted(doc["wall_s"].items()):
                labels.append(k)
                values.append(float(v) * 1e3)
        elif "summary" in doc and "solve_ms_mean" in doc["summary"]:
            labels.append(doc.get("scenario", path) + "/" + doc.get("solver", "?"))
            values.append(float(doc["summary"]["solve_ms_mean"]))
        else:
            raise ValueError(f"{path}: no wall-time fields "
                             "(expected 'wall_s' dict or summary.solve_ms_mean)")
    if not labels:
        raise ValueError("no wall-time entries found in the inputs")
    ax.barh(np.arange(len(labels)), values, color="tab:blue")
    ax.set_yticks(np.arange(len(labels)), labels, fontsize=7)
    ax.set_xlabel("wall time [ms]")


_RENDERERS = {
    "timelapse": _render_timelapse,
    "mode-shapes": _render_mode_shapes,
    "energy-spectrum": _render_energy_spectrum,
    "rom-accuracy": _render_rom_accuracy,
    "walltime": _render_walltime,
}


def render(spec: FigureSpec) -> str:
    """Render one figure and return the written image path."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6), dpi=150)
    try:
        _RENDERERS[spec.kind](spec, ax)
        if spec.xlim:
            ax.set_xlim(*spec.xlim)
        if spec.ylim:
            ax.set_ylim(*spec.ylim)
        if spec.title:
            ax.set_title(spec.title, fontsize=10)
        fig.tight_layout()
        fig.savefig(spec.output)
    finally:
        plt.close(fig)
    return spec.output
