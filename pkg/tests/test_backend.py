"""The compiled kernel and the numpy fallback must agree step for step."""

import os
import subprocess
import sys

import numpy as np
import pytest

from cablempc import fdm_numpy
from cablempc.backend import BACKEND
from cablempc.params import CableParams, Mode
from cablempc.simulator import hanging_state

try:
    from cablempc import _fdm_kernel
except ImportError:
    _fdm_kernel = None


def test_backend_identifier():
    assert BACKEND in ("python", "compiled")


@pytest.mark.skipif(_fdm_kernel is None, reason="compiled kernel not built")
@pytest.mark.parametrize("mode", [Mode.FREE, Mode.SLUNG])
def test_kernels_agree(params, mode):
    state = hanging_state(params, mode=mode)
    f = np.array([0.2, -0.1, 4.0])
    r1, v1 = state.r.copy(), state.r_t.copy()
    r2, v2 = state.r.copy(), state.r_t.copy()
    p1 = p2 = None
    q1 = q2 = None
    if mode == Mode.FREE:
        p1, q1 = np.array([0.5, 0.0, -1.0]), np.array([0.0, 0.1, 0.0])
        p2, q2 = p1.copy(), q1.copy()
    for _ in range(200):
        fdm_numpy.rk4_step_arrays(r1, v1, int(mode), p1, q1, f, 5e-4, params, None)
        _fdm_kernel.rk4_step_arrays(r2, v2, int(mode), p2, q2, f, 5e-4, params, None)
    assert np.max(np.abs(r1 - r2)) < 1e-10
    assert np.max(np.abs(v1 - v2)) < 1e-9
    if mode == Mode.FREE:
        assert np.max(np.abs(p1 - p2)) < 1e-10


@pytest.mark.skipif(_fdm_kernel is None, reason="compiled kernel not built")
@pytest.mark.parametrize("mode", [Mode.FREE, Mode.SLUNG])
def test_kernels_agree_kinematic_drive(params, mode):
    state = hanging_state(params, mode=mode)
    acc = np.array([1.0, 0.5, 0.0])
    r1, v1 = state.r.copy(), state.r_t.copy()
    r2, v2 = state.r.copy(), state.r_t.copy()
    for _ in range(200):
        fdm_numpy.rk4_step_arrays(r1, v1, int(mode), None, None, np.zeros(3), 5e-4, params, acc)
        _fdm_kernel.rk4_step_arrays(r2, v2, int(mode), None, None, np.zeros(3), 5e-4, params, acc)
    assert np.max(np.abs(r1 - r2)) < 1e-10


def test_forced_python_backend():
    env = dict(os.environ, CABLEMPC_BACKEND="python")
    out = subprocess.run(
        [sys.executable, "-c", "from cablempc.backend import BACKEND; print(BACKEND)"],
        env=env, capture_output=True, text=True,
    )
    assert out.stdout.strip() == "python"
