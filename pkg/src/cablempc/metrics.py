"""Error functionals and run summaries."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import ConfigurationError


def cable_error(r_coarse: np.ndarray, rho_coarse: np.ndarray, h_d: float, L: float) -> float:
    """Trapezoidal spatial RMS distance between two coarse-grid cable shapes.

    Inputs have shape (M+1, 3) on the same decimated grid; a uniform offset
    delta on every node returns exactly ``||delta||``.
    """
    r_coarse = np.asarray(r_coarse, dtype=float)
    rho_coarse = np.asarray(rho_coarse, dtype=float)
    if r_coarse.shape != rho_coarse.shape:
        raise ConfigurationError("grids are not aligned")
    d2 = np.sum((r_coarse - rho_coarse) ** 2, axis=-1)
    return float(np.sqrt(h_d / (2.0 * L) * np.sum(d2[1:] + d2[:-1])))


def cable_error_rms(
    r_series: np.ndarray, rho_series: np.ndarray, h_d: float, L: float
) -> float:
    """Time-RMS of the spatial error functional over matched sample series."""
    r_series = np.asarray(r_series, dtype=float)
    rho_series = np.asarray(rho_series, dtype=float)
    if r_series.shape != rho_series.shape:
        raise ConfigurationError("series are not aligned")
    d2 = np.sum((r_series - rho_series) ** 2, axis=-1)
    eps2 = h_d / (2.0 * L) * np.sum(d2[:, 1:] + d2[:, :-1], axis=-1)
    return float(np.sqrt(np.mean(eps2)))


def rms(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sqrt(np.mean(np.sum(x * x, axis=-1))))


@dataclass
class RunSummary:
    """Aggregated metrics of one closed-loop run."""

    tip_pos_rms: float = float("nan")
    tip_vel_rms: float = float("nan")
    eps_p_rms: float = float("nan")
    eps_v_rms: float = float("nan")
    solve_ms_mean: float = float("nan")
    solve_ms_max: float = float("nan")
    solver_iterations_mean: float = float("nan")
    solver_failures: int = 0
    event_times: List[float] = field(default_factory=list)
    event_kinds: List[str] = field(default_factory=list)
    min_obstacle_margin: Optional[float] = None
    success: bool = True

    def to_dict(self) -> dict:
        return {
            "tip_pos_rms": self.tip_pos_rms,
            "tip_vel_rms": self.tip_vel_rms,
            "eps_p_rms": self.eps_p_rms,
            "eps_v_rms": self.eps_v_rms,
            "solve_ms_mean": self.solve_ms_mean,
            "solve_ms_max": self.solve_ms_max,
            "solver_iterations_mean": self.solver_iterations_mean,
            "solver_failures": self.solver_failures,
            "event_times": list(self.event_times),
            "event_kinds": list(self.event_kinds),
            "min_obstacle_margin": self.min_obstacle_margin,
            "success": self.success,
        }
