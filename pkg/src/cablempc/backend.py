"""Selection of the fine-grid integration kernel.

The compiled Cython extension is used when importable; the pure-numpy
fallback otherwise. Set ``CABLEMPC_BACKEND=python`` (or ``compiled``) to
force a choice.
"""

from __future__ import annotations

import os

from . import fdm_numpy

_forced = os.environ.get("CABLEMPC_BACKEND", "").lower()

if _forced == "python":
    kernel = fdm_numpy
    BACKEND = "python"
else:
    try:
        from . import _fdm_kernel as kernel  # type: ignore

        BACKEND = "compiled"
    except ImportError:
        if _forced == "compiled":
            raise
        kernel = fdm_numpy
        BACKEND = "python"


def rk4_step_arrays(r, r_t, mode, p_pos, p_vel, f_cmd, dt, params, top_accel=None):
    return kernel.rk4_step_arrays(
        r, r_t, int(mode), p_pos, p_vel, f_cmd, dt, params, top_accel
    )
