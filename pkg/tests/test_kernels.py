import os
import subprocess
import sys

import numpy as np
import pytest

from rtlc import _kernels


def test_rk4_paths_agree():
    args = (24.0, 90.0, 1234.5, 0.01, 50, 13.89, 1650.0, 0.1, 5.0, 0.25)
    a = _kernels.rk4_acc_numba(*args)
    b = _kernels.rk4_acc_python(*args)
    assert a.shape == (50, 2)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_grid_scan_paths_agree(dim, rng):
    # line-wise compiled scan vs the literal full numpy scan
    res = {1: 301, 2: 41, 3: 13}[dim]
    for trial in range(60):
        L = rng.normal(size=(dim, dim))
        quad = L @ L.T if trial % 4 else np.zeros((dim, dim))
        lin = rng.normal(size=dim)
        rows_a = rng.normal(size=(int(rng.integers(0, 4)), dim))
        if len(rows_a) and trial % 3 == 0:
            rows_a[0, -1] = 0.0
        if len(rows_a) and trial % 5 == 0:
            rows_a[:, :-1] = 0.0
        rows_b = rng.normal(size=len(rows_a))
        lo, hi = -rng.uniform(0, 2, size=dim), rng.uniform(0, 2, size=dim)
        v1, p1, f1 = _kernels.grid_qp_scan_numba(quad, lin, 0.3, rows_a, rows_b, lo, hi, res, 1e-8)
        v2, p2, f2 = _kernels.grid_qp_scan_python(quad, lin, 0.3, rows_a, rows_b, lo, hi, res, 1e-8)
        assert f1 == f2
        if f1:
            assert v1 == pytest.approx(v2, abs=1e-12)
            np.testing.assert_allclose(p1, p2, atol=1e-12)


def test_grid_scan_reports_no_feasible_point():
    quad = np.eye(1)
    rows_a = np.array([[1.0], [-1.0]])
    rows_b = np.array([-0.75, 0.25])  # u >= 0.75 and u <= 0.25
    for scan in (_kernels.grid_qp_scan_numba, _kernels.grid_qp_scan_python):
        _, _, found = scan(quad, np.zeros(1), 0.0, rows_a, rows_b, np.zeros(1), np.ones(1), 11, 1e-8)
        assert not found


def test_env_flag_selects_fallback():
    code = "from rtlc import _kernels as k; print(k.USE_NUMBA, k.rk4_acc is k.rk4_acc_python)"
    env = dict(os.environ, RTLC_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["False", "True"]
