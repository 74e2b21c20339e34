"""Reduced-order cable dynamics on the coarse POD grid.

The reduced state keeps the two boundary nodes intact and replaces the
interior by R modal coefficients (plus derivatives); the baseline variant
instead projects everything below the top node, tip included, onto its own
basis. All operations are batched over leading axes and complex-step safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dynamics, pod
from .dynamics import FullState
from .errors import ConfigurationError
from .params import CableParams, Mode
from .pod import PodBasis, VARIANT_BASELINE, VARIANT_PROPOSED

EZ = dynamics.EZ


def state_size(R: int) -> int:
    """Dimension of the proposed reduced state: 6(R+2)."""
    return 6 * (R + 2)


def baseline_state_size(R_b: int) -> int:
    """Dimension of the baseline reduced state: 6(R_b+1)."""
    return 6 * (R_b + 1)


@dataclass
class ReducedModel:
    """Reduced dynamics for one discrete mode, one basis, one order R.

    Proposed state layout (flat, length 6(R+2)):
        [r0, a_1..a_R, rN, r0_t, adot_1..adot_R, rN_t]
    Baseline layout (flat, length 6(R+1)):
        [r0, c_1..c_R, r0_t, cdot_1..cdot_R]
    """

    basis: PodBasis
    params: CableParams
    R: int
    mode: Mode = None

    def __post_init__(self):
        if self.mode is None:
            self.mode = self.basis.mode_tag
        if self.R < 1 or self.R > self.basis.max_order:
            raise ConfigurationError(
                f"R={self.R} outside 1..{self.basis.max_order} for this basis"
            )
        self.variant = self.basis.variant
        self.M = self.basis.n_samples - 1
        self.h_d = self.basis.h_d
        self.phi = self.basis.modes[:, : self.R]          # (M+1, R)
        self.phi_pinv = self.basis.pinv(self.R)           # (R, M+1)
        if self.variant == VARIANT_PROPOSED:
            self.nz = state_size(self.R)
        else:
            self.nz = baseline_state_size(self.R)

    # -- state packing ----------------------------------------------------

    def pack(self, r0, a, rN, r0_t, adot, rN_t) -> np.ndarray:
        R = self.R
        if self.variant == VARIANT_PROPOSED:
            parts = [r0, np.reshape(a, a.shape[:-2] + (3 * R,)), rN,
                     r0_t, np.reshape(adot, adot.shape[:-2] + (3 * R,)), rN_t]
        else:
            parts = [r0, np.reshape(a, a.shape[:-2] + (3 * R,)),
                     r0_t, np.reshape(adot, adot.shape[:-2] + (3 * R,))]
        return np.concatenate(parts, axis=-1)

    def unpack(self, z: np.ndarray):
        R = self.R
        lead = z.shape[:-1]
        if self.variant == VARIANT_PROPOSED:
            r0 = z[..., 0:3]
            a = z[..., 3 : 3 + 3 * R].reshape(lead + (R, 3))
            rN = z[..., 3 + 3 * R : 6 + 3 * R]
            off = 6 + 3 * R
            r0_t = z[..., off : off + 3]
            adot = z[..., off + 3 : off + 3 + 3 * R].reshape(lead + (R, 3))
            rN_t = z[..., off + 3 + 3 * R :]
            return r0, a, rN, r0_t, adot, rN_t
        r0 = z[..., 0:3]
        a = z[..., 3 : 3 + 3 * R].reshape(lead + (R, 3))
        off = 3 + 3 * R
        r0_t = z[..., off : off + 3]
        adot = z[..., off + 3 :].reshape(lead + (R, 3))
        return r0, a, r0_t, adot

    # -- reconstruction ---------------------------------------------------

    def _segment(self, r0, rN):
        return pod.segment_field(r0, rN, self.M + 1)

    def nodes(self, z: np.ndarray):
        """Coarse-grid node positions and velocities, shape (..., M+1, 3)."""
        if self.variant == VARIANT_PROPOSED:
            r0, a, rN, r0_t, adot, rN_t = self.unpack(z)
            r = self._segment(r0, rN) + np.einsum("jm,...mk->...jk", self.phi, a)
            v = self._segment(r0_t, rN_t) + np.einsum("jm,...mk->...jk", self.phi, adot)
            return r, v
        r0, a, r0_t, adot = self.unpack(z)
        hang = -np.linspace(0.0, self.M * self.h_d, self.M + 1)[:, None] * EZ
        r = r0[..., None, :] + hang + np.einsum("jm,...mk->...jk", self.phi, a)
        v = r0_t[..., None, :] + np.einsum("jm,...mk->...jk", self.phi, adot)
        return r, v

    def tip(self, z: np.ndarray):
        """Tip position and velocity."""
        if self.variant == VARIANT_PROPOSED:
            r0, a, rN, r0_t, adot, rN_t = self.unpack(z)
            return rN, rN_t
        r, v = self.nodes(z)
        return r[..., -1, :], v[..., -1, :]

    # -- dynamics ---------------------------------------------------------

    def rhs(self, z: np.ndarray, v_cmd: np.ndarray) -> np.ndarray:
        """Time derivative of the reduced state; ``v_cmd`` is the commanded
        UAV (node-0) acceleration."""
        p, h = self.params, self.h_d
        r, v = self.nodes(z)
        acc_int = dynamics.interior_accels(r, v, p, h)
        if self.mode == Mode.SLUNG:
            tip_acc = dynamics.tip_accel_slung(r, v, acc_int[..., -1, :], p, h)
        else:
            tip_acc = dynamics.tip_accel_free(r, v, p, h)
        v_cmd = np.broadcast_to(v_cmd, r[..., 0, :].shape)
        acc = np.concatenate(
            [v_cmd[..., None, :], acc_int, tip_acc[..., None, :]], axis=-2
        )
        if self.variant == VARIANT_PROPOSED:
            r0, a, rN, r0_t, adot, rN_t = self.unpack(z)
            seg_acc = self._segment(v_cmd, tip_acc)
            addot = np.einsum("mj,...jk->...mk", self.phi_pinv, acc - seg_acc)
            return self.pack(r0_t, adot, rN_t, v_cmd, addot, tip_acc)
        r0, a, r0_t, adot = self.unpack(z)
        addot = np.einsum(
            "mj,...jk->...mk", self.phi_pinv, acc - v_cmd[..., None, :]
        )
        return self.pack(r0_t, adot, None, v_cmd, addot, None)

    def step(self, z: np.ndarray, v_cmd: np.ndarray, dt: float, substeps: int = 1) -> np.ndarray:
        """Classic RK4 on the reduced dynamics with a zero-order-hold input."""
        hdt = dt / substeps
        for _ in range(substeps):
            k1 = self.rhs(z, v_cmd)
            k2 = self.rhs(z + 0.5 * hdt * k1, v_cmd)
            k3 = self.rhs(z + 0.5 * hdt * k2, v_cmd)
            k4 = self.rhs(z + hdt * k3, v_cmd)
            z = z + (hdt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return z

    # -- full/reduced conversion -----------------------------------------

    def project_coarse(self, r_coarse: np.ndarray, v_coarse: np.ndarray) -> np.ndarray:
        """Reduced state from coarse-grid node positions/velocities."""
        r0 = r_coarse[..., 0, :]
        rN = r_coarse[..., -1, :]
        v0 = v_coarse[..., 0, :]
        vN = v_coarse[..., -1, :]
        if self.variant == VARIANT_PROPOSED:
            fl_r = r_coarse - self._segment(r0, rN)
            fl_v = v_coarse - self._segment(v0, vN)
            a = np.einsum("mj,...jk->...mk", self.phi_pinv, fl_r)
            adot = np.einsum("mj,...jk->...mk", self.phi_pinv, fl_v)
            return self.pack(r0, a, rN, v0, adot, vN)
        hang = -np.linspace(0.0, self.M * self.h_d, self.M + 1)[:, None] * EZ
        fl_r = r_coarse - (r0[..., None, :] + hang)
        fl_v = v_coarse - v0[..., None, :]
        a = np.einsum("mj,...jk->...mk", self.phi_pinv, fl_r)
        adot = np.einsum("mj,...jk->...mk", self.phi_pinv, fl_v)
        return self.pack(r0, a, None, v0, adot, None)

    def project_full(self, state: FullState) -> np.ndarray:
        """Reduced state from a fine-grid FullState (decimated sampling)."""
        d = (state.n_nodes - 1) // self.M
        if d * self.M != state.n_nodes - 1:
            raise ConfigurationError("fine grid is not a multiple of the coarse grid")
        return self.project_coarse(state.r[::d], state.r_t[::d])


def decimate(values: np.ndarray, M: int) -> np.ndarray:
    """Sample a fine-grid nodal field on the M+1 coarse nodes."""
    n = values.shape[-2] - 1
    d = n // M
    if d * M != n:
        raise ConfigurationError("fine grid is not a multiple of the coarse grid")
    return values[..., ::d, :]
