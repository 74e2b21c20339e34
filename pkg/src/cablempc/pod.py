"""Proper orthogonal decomposition of cable fluctuation snapshots.

The fluctuation field is the deviation of the node positions from the
straight segment joining the two cable extremities; for the baseline ROM
variant it is instead the deviation from a rigid vertical hang below the
top node (the tip is then part of the projected state).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DegenerateTrainingError
from .params import Mode

VARIANT_PROPOSED = "proposed"
VARIANT_BASELINE = "baseline"

_SV_CUTOFF = 1e-12       # modes with sigma < cutoff * sigma_1 are dropped
_PINV_RCOND = 1e-10


def reference_segment(r0: np.ndarray, rN: np.ndarray, i, N: int) -> np.ndarray:
    """Point i/N of the way along the straight segment from r0 to rN."""
    frac = np.asarray(i, dtype=float) / N
    return r0 + np.multiply.outer(frac, rN - r0) if np.ndim(i) else r0 + frac * (rN - r0)


def segment_field(r0: np.ndarray, rN: np.ndarray, n_samples: int) -> np.ndarray:
    """Straight-segment reference evaluated on all coarse nodes.

    ``r0``/``rN`` may carry leading batch axes; returns (..., n_samples, 3).
    """
    frac = np.linspace(0.0, 1.0, n_samples)
    return r0[..., None, :] + frac[:, None] * (rN - r0)[..., None, :]


@dataclass
class SnapshotTensor:
    """Fluctuation samples: (3, M+1, O+1) with decimated grid metadata."""

    data: np.ndarray
    h_d: float
    mode_tag: Mode
    variant: str = VARIANT_PROPOSED

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 3 or self.data.shape[0] != 3:
            raise ConfigurationError("snapshot tensor must have shape (3, M+1, O+1)")
        m1, o1 = self.data.shape[1], self.data.shape[2]
        if o1 < m1 / 3.0:
            raise ConfigurationError("too few snapshots: need O+1 >= (M+1)/3")
        if self.variant == VARIANT_PROPOSED:
            if not (
                np.all(self.data[:, 0, :] == 0.0) and np.all(self.data[:, -1, :] == 0.0)
            ):
                raise ConfigurationError("boundary fluctuation samples must be zero")
        elif np.any(self.data[:, 0, :] != 0.0):
            raise ConfigurationError("top fluctuation samples must be zero")


@dataclass
class PodBasis:
    """Orthonormal sampled spatial modes for one discrete mode.

    ``modes[j, m]`` is the m-th mode at coarse node j, normalized so that
    the trapezoidal inner product with step ``h_d`` is the identity.
    """

    modes: np.ndarray            # (M+1, K)
    singular_values: np.ndarray  # (K,), non-increasing
    h_d: float
    mode_tag: Mode
    variant: str = VARIANT_PROPOSED

    def __post_init__(self):
        self.modes = np.asarray(self.modes, dtype=float)
        self.singular_values = np.asarray(self.singular_values, dtype=float)
        if self.modes.ndim != 2 or self.modes.shape[1] != len(self.singular_values):
            raise ConfigurationError("modes and singular values are inconsistent")
        if np.any(np.diff(self.singular_values) > 0.0):
            raise ConfigurationError("singular values must be non-increasing")
        self._pinv = None

    @property
    def n_samples(self) -> int:
        return self.modes.shape[0]

    @property
    def max_order(self) -> int:
        return self.modes.shape[1]

    def pinv(self, R: Optional[int] = None) -> np.ndarray:
        """Pseudoinverse of the first R sampled modes (computed once, cached)."""
        if self._pinv is None:
            self._pinv = np.linalg.pinv(self.modes, rcond=_PINV_RCOND)
        return self._pinv[: self.max_order if R is None else R]

    def validate(self, tol: float = 1e-10):
        gram = self.h_d * self.modes.T @ self.modes
        if np.max(np.abs(gram - np.eye(self.max_order))) > tol:
            raise ConfigurationError("basis is not trapezoidally orthonormal")
        if self.variant == VARIANT_PROPOSED:
            bad = max(np.max(np.abs(self.modes[0])), np.max(np.abs(self.modes[-1])))
        else:
            bad = np.max(np.abs(self.modes[0]))
        if bad > tol:
            raise ConfigurationError("modes must vanish at the clamped samples")

    def save(self, path) -> None:
        """Persist as an npz artifact (layout: dims + modes row-major + sigmas)."""
        np.savez(
            path,
            modes=self.modes,
            singular_values=self.singular_values,
            h_d=self.h_d,
            mode_tag=int(self.mode_tag),
            variant=self.variant,
        )

    @classmethod
    def load(cls, path) -> "PodBasis":
        with np.load(path, allow_pickle=False) as z:
            basis = cls(
                modes=z["modes"],
                singular_values=z["singular_values"],
                h_d=float(z["h_d"]),
                mode_tag=Mode(int(z["mode_tag"])),
                variant=str(z["variant"]),
            )
        basis.validate()
        return basis


def extract_basis(snapshots: SnapshotTensor) -> PodBasis:
    """Left singular vectors of the mode-2 unfolding, scaled to continuous
    orthonormality; numerically null modes are dropped."""
    X = snapshots.data
    m1 = X.shape[1]
    unfolding = np.transpose(X, (1, 0, 2)).reshape(m1, -1)
    U, s, _ = np.linalg.svd(unfolding, full_matrices=False)
    if len(s) == 0 or s[0] <= 0.0:
        raise DegenerateTrainingError("all-zero fluctuation snapshots")
    keep = s >= _SV_CUTOFF * s[0]
    if not np.any(keep):
        raise DegenerateTrainingError("all-zero fluctuation snapshots")
    nontrivial = m1 - (2 if snapshots.variant == VARIANT_PROPOSED else 1)
    k = min(int(np.sum(keep)), nontrivial)
    phi = U[:, :k] / np.sqrt(snapshots.h_d)
    basis = PodBasis(phi, s[:k], snapshots.h_d, snapshots.mode_tag, snapshots.variant)
    basis.validate()
    return basis


def mode_energy(basis: PodBasis) -> np.ndarray:
    """Relative energy fraction of each retained mode (descending, sums to 1)."""
    s2 = basis.singular_values**2
    return s2 / np.sum(s2)


def project(fluct: np.ndarray, basis: PodBasis, R: Optional[int] = None) -> np.ndarray:
    """Modal coefficients of a sampled fluctuation field.

    ``fluct`` has shape (..., M+1, 3); returns (..., R, 3).
    """
    P = basis.pinv(R)
    return np.einsum("mj,...jk->...mk", P, fluct)


def reconstruct(
    a: np.ndarray, r0: np.ndarray, rN: np.ndarray, basis: PodBasis
) -> np.ndarray:
    """Coarse-grid node positions from boundary points and modal coefficients."""
    R = a.shape[-2]
    fluct = np.einsum("jm,...mk->...jk", basis.modes[:, :R], a)
    return segment_field(r0, rN, basis.n_samples) + fluct


def change_basis(
    a_prime: np.ndarray,
    from_basis: PodBasis,
    to_basis: PodBasis,
    R: Optional[int] = None,
) -> np.ndarray:
    """Transfer modal coefficients between bases: a = pinv(Phi) Phi' a'."""
    if from_basis.n_samples != to_basis.n_samples:
        raise ConfigurationError("bases live on different grids")
    R_from = a_prime.shape[-2]
    T = to_basis.pinv(R) @ from_basis.modes[:, :R_from]
    return np.einsum("mj,...jk->...mk", T, a_prime)
