"""POD basis training: sinusoidal excitation runs and snapshot extraction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from . import pod
from .dynamics import FullState
from .params import CableParams, Mode
from .pod import PodBasis, SnapshotTensor, VARIANT_BASELINE, VARIANT_PROPOSED
from .simulator import hanging_state, simulate_open_loop


@dataclass
class TrainingConfig:
    duration: float = 10.0
    dt: float = 5e-4
    n_snapshots: int = 50          # O; O+1 snapshots are collected
    decimation: int = 10           # d; coarse grid step h_d = d * h_s
    amplitude: float = 0.5         # excitation amplitude [m]
    freqs: Tuple[float, float, float] = (0.3, 0.4, 0.5)  # per-axis [Hz]


def excitation_accel_fn(cfg: TrainingConfig):
    """Top-node acceleration of the (1 - cos) isotropic sinusoidal sweep,
    which starts from rest."""
    om = 2.0 * np.pi * np.asarray(cfg.freqs)

    def accel(t: float) -> np.ndarray:
        return cfg.amplitude * om**2 * np.cos(om * t)

    return accel


def fluctuations(r_nodes: np.ndarray, d: int, variant: str, L: float) -> np.ndarray:
    """Fluctuation field of fine-grid positions on the decimated grid.

    ``r_nodes`` has shape (..., N+1, 3); returns (..., M+1, 3).
    """
    coarse = r_nodes[..., ::d, :]
    m1 = coarse.shape[-2]
    if variant == VARIANT_PROPOSED:
        ref = pod.segment_field(coarse[..., 0, :], coarse[..., -1, :], m1)
    else:
        hang = -np.linspace(0.0, L, m1)[:, None] * np.array([0.0, 0.0, 1.0])
        ref = coarse[..., 0:1, :] + hang
    return coarse - ref


def collect_snapshots(
    params: CableParams, mode: Mode, cfg: TrainingConfig
) -> Dict[str, SnapshotTensor]:
    """Run the excitation maneuver in one discrete mode and collect
    fluctuation snapshot tensors for both ROM variants."""
    d = cfg.decimation
    h_d = params.h_s * d
    n_steps = int(round(cfg.duration / cfg.dt))
    log_every = n_steps // cfg.n_snapshots
    state = hanging_state(params, mode=mode)
    _, log = simulate_open_loop(
        state,
        params,
        cfg.dt,
        log_every * cfg.n_snapshots,
        top_accel_fn=excitation_accel_fn(cfg),
        log_every=log_every,
    )
    out = {}
    for variant in (VARIANT_PROPOSED, VARIANT_BASELINE):
        fl = fluctuations(log.r, d, variant, params.L)   # (O+1, M+1, 3)
        data = np.transpose(fl, (2, 1, 0))               # (3, M+1, O+1)
        if variant == VARIANT_PROPOSED:
            data[:, 0, :] = 0.0
            data[:, -1, :] = 0.0
        else:
            data[:, 0, :] = 0.0
        out[variant] = SnapshotTensor(data, h_d, mode, variant)
    return out


def train_bases(
    params: CableParams, cfg: TrainingConfig = TrainingConfig()
) -> Dict[Tuple[int, str], PodBasis]:
    """Train separate bases per discrete mode and per ROM variant."""
    bases = {}
    for mode in (Mode.FREE, Mode.SLUNG):
        snaps = collect_snapshots(params, mode, cfg)
        for variant, snap in snaps.items():
            bases[(int(mode), variant)] = pod.extract_basis(snap)
    return bases
