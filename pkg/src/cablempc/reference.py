"""Reference trajectories: piecewise quintic rest-to-rest waypoint interpolation
plus a piecewise-constant discrete-mode schedule."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError
from .params import Mode


def _quintic(tau: np.ndarray):
    """Rest-to-rest timing law on [0, 1] and its two derivatives."""
    s = ((6.0 * tau - 15.0) * tau + 10.0) * tau**3
    ds = 30.0 * tau**2 * (1.0 - tau) ** 2
    dds = 60.0 * tau * (1.0 - 3.0 * tau + 2.0 * tau**2)
    return s, ds, dds


@dataclass
class ReferenceTrajectory:
    """Sampled tip reference with continuity up to acceleration.

    Each waypoint-to-waypoint segment is a straight line traversed under the
    quintic rest-to-rest timing law, so velocity and acceleration vanish at
    every waypoint and the composite curve is C2.
    """

    times: np.ndarray                    # waypoint times, strictly increasing
    points: np.ndarray                   # waypoint positions, (n_wp, 3)
    mode_times: np.ndarray = field(default=None)  # mode switch instants
    mode_values: np.ndarray = field(default=None)  # mode after each instant

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.points = np.asarray(self.points, dtype=float)
        if self.times.ndim != 1 or len(self.times) < 2:
            raise ConfigurationError("need at least two waypoints")
        if np.any(np.diff(self.times) <= 0.0):
            raise ConfigurationError("waypoint times must be strictly increasing")
        if self.points.shape != (len(self.times), 3):
            raise ConfigurationError("points must have shape (n_waypoints, 3)")
        if self.mode_times is None:
            self.mode_times = np.array([])
            self.mode_values = np.array([], dtype=int)

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    def eval(self, t: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Position, velocity, acceleration of the reference at time t
        (clamped to the endpoints)."""
        t = float(np.clip(t, self.times[0], self.times[-1]))
        k = int(np.searchsorted(self.times, t, side="right") - 1)
        k = min(k, len(self.times) - 2)
        ta, tb = self.times[k], self.times[k + 1]
        T = tb - ta
        tau = (t - ta) / T
        s, ds, dds = _quintic(np.asarray(tau))
        d = self.points[k + 1] - self.points[k]
        pos = self.points[k] + s * d
        vel = (ds / T) * d
        acc = (dds / T**2) * d
        return pos, vel, acc

    def mode_at(self, t: float) -> Mode:
        if len(self.mode_times) == 0:
            return Mode.FREE
        k = int(np.searchsorted(self.mode_times, t, side="right"))
        if k == 0:
            return Mode(int(self.mode_values[0]))
        return Mode(int(self.mode_values[k - 1]))


def make_quintic_spline(
    waypoints: Sequence[Tuple[float, Sequence[float]]],
    mode_schedule: Sequence[Tuple[float, int]] = (),
) -> ReferenceTrajectory:
    """Build a rest-to-rest reference through timed waypoints.

    ``mode_schedule`` is a list of (time, mode) pairs; the mode before the
    first entry is the first entry's mode.
    """
    if len(waypoints) < 2:
        raise ConfigurationError("need at least two waypoints")
    times = np.array([float(t) for t, _ in waypoints])
    pts = np.array([np.asarray(p, dtype=float) for _, p in waypoints])
    if len(np.unique(times)) != len(times):
        raise ConfigurationError("duplicate waypoint times")
    ms: List[Tuple[float, int]] = sorted((float(t), int(q)) for t, q in mode_schedule)
    ref = ReferenceTrajectory(times, pts)
    if ms:
        ref.mode_times = np.array([t for t, _ in ms])
        ref.mode_values = np.array([q for _, q in ms], dtype=int)
    return ref
