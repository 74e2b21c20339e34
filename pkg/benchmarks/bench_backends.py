"""Compare the compiled integration kernel against the pure-numpy fallback.

Run with ``python3 benchmarks/bench_backends.py``. Both backends integrate
the same hanging cable for one simulated second at the physics step and the
results are checked to agree bit-for-bit apart from floating-point noise.
"""

import time

import numpy as np

from cablempc import fdm_numpy
from cablempc.params import CableParams, Mode
from cablempc.simulator import hanging_state

try:
    from cablempc import _fdm_kernel
except ImportError:
    _fdm_kernel = None

DT = 5e-4
N_STEPS = 2000
FORCE = np.array([0.1, 0.0, 4.0])


def run(kernel, params, mode):
    state = hanging_state(params, mode=mode)
    r, r_t = state.r.copy(), state.r_t.copy()
    p_pos = None if mode == Mode.SLUNG else np.array([0.5, 0.0, -1.0])
    p_vel = None if mode == Mode.SLUNG else np.zeros(3)
    t0 = time.perf_counter()
    for _ in range(N_STEPS):
        kernel.rk4_step_arrays(r, r_t, int(mode), p_pos, p_vel, FORCE, DT, params, None)
    wall = time.perf_counter() - t0
    return wall, r, r_t


def main():
    params = CableParams()
    for mode in (Mode.FREE, Mode.SLUNG):
        t_py, r_py, v_py = run(fdm_numpy, params, mode)
        line = f"mode {int(mode)}: python {t_py * 1e3:8.1f} ms"
        if _fdm_kernel is not None:
            t_c, r_c, v_c = run(_fdm_kernel, params, mode)
            err = max(np.max(np.abs(r_py - r_c)), np.max(np.abs(v_py - v_c)))
            line += (f"   compiled {t_c * 1e3:8.1f} ms"
                     f"   speedup {t_py / t_c:5.1f}x   max diff {err:.3g}")
        else:
            line += "   (compiled kernel not built)"
        print(line)


if __name__ == "__main__":
    main()
