"""Hot numeric loops, compiled with numba when available.

Set ``RTLC_DISABLE_NUMBA=1`` before import to force the pure Python/numpy
paths. Both paths are always importable under explicit names
(``*_numba`` / ``*_python``) so tests and the benchmark can compare them.
"""

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("RTLC_DISABLE_NUMBA", "0") not in ("1", "true", "yes")


def _maybe_njit(func):
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True)(func)


# ---------------------------------------------------------------------------
# ACC zero-order-hold RK4
# ---------------------------------------------------------------------------

def _acc_rhs(v, z, u, v0, mass, f0, f1, f2):
    if v > 0.0:
        sgn = 1.0
    elif v < 0.0:
        sgn = -1.0
    else:
        sgn = 0.0
    fr = f0 * sgn + f1 * v + f2 * v * v
    return (u - fr) / mass, v0 - v


_acc_rhs_nb = _maybe_njit(_acc_rhs)


def _make_rk4(rhs):
    def rk4_acc(v, z, u, step, n, v0, mass, f0, f1, f2):
        out = np.empty((n, 2))
        for i in range(n):
            k1v, k1z = rhs(v, z, u, v0, mass, f0, f1, f2)
            k2v, k2z = rhs(v + 0.5 * step * k1v, z + 0.5 * step * k1z, u, v0, mass, f0, f1, f2)
            k3v, k3z = rhs(v + 0.5 * step * k2v, z + 0.5 * step * k2z, u, v0, mass, f0, f1, f2)
            k4v, k4z = rhs(v + step * k3v, z + step * k3z, u, v0, mass, f0, f1, f2)
            v = v + step / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            z = z + step / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
            out[i, 0] = v
            out[i, 1] = z
        return out

    return rk4_acc


rk4_acc_python = _make_rk4(_acc_rhs)
rk4_acc_numba = _maybe_njit(_make_rk4(_acc_rhs_nb)) if HAVE_NUMBA else rk4_acc_python


# ---------------------------------------------------------------------------
# Exhaustive grid scan for small QPs
# ---------------------------------------------------------------------------

def _point_value(quad, lin, const, point):
    dim = point.shape[0]
    val = const
    for j in range(dim):
        val += lin[j] * point[j]
        acc = 0.0
        for k in range(dim):
            acc += quad[j, k] * point[k]
        val += 0.5 * point[j] * acc
    return val


def _row_ok(rows_a, rows_b, r, point, tol):
    s = rows_b[r]
    for j in range(point.shape[0]):
        s += rows_a[r, j] * point[j]
    return s >= -tol


def _set_last(point, i, lo_last, hi_last, sp_last, res):
    point[point.shape[0] - 1] = hi_last if i == res - 1 else lo_last + i * sp_last


def _grid_qp_scan_loop(quad, lin, const, rows_a, rows_b, lo, hi, res, tol):
    """Line-wise form of the grid scan; returns (best_value, best_point, found).

    Grid lines run along the last axis. On each line every row is feasible on
    a contiguous index range and the convex objective's grid minimum sits at
    the points bracketing the line minimizer or at a range end, so each line
    costs O(rows) instead of O(res * rows). Range ends are confirmed with the
    pointwise test; ties keep the lexicographically first point, as a full
    scan would.
    """
    dim = lo.shape[0]
    last = dim - 1
    nrows = rows_a.shape[0]
    spacing = np.empty(dim)
    for j in range(dim):
        spacing[j] = (hi[j] - lo[j]) / (res - 1)
    n_lines = 1
    for _ in range(last):
        n_lines *= res
    idx = np.zeros(dim, dtype=np.int64)
    point = lo.copy()
    best_point = np.zeros(dim)
    best = np.inf
    found = False
    for line in range(n_lines):
        if line > 0:
            j = last - 1
            while idx[j] == res - 1:
                idx[j] = 0
                point[j] = lo[j]
                j -= 1
            idx[j] += 1
            point[j] = hi[j] if idx[j] == res - 1 else lo[j] + idx[j] * spacing[j]
        ilo = 0
        ihi = res - 1
        for r in range(nrows):
            slope = rows_a[r, last]
            base = rows_b[r]
            for j in range(last):
                base += rows_a[r, j] * point[j]
            if slope == 0.0:
                if base < -tol:
                    ilo = res
                    break
                continue
            if spacing[last] > 0:
                guess = ((-tol - base) / slope - lo[last]) / spacing[last]
            else:
                guess = 0.0
            if slope > 0:
                g = int(np.ceil(guess)) if guess > 0 else 0
                g = min(max(g, ilo), ihi + 1)
                _set_last(point, g, lo[last], hi[last], spacing[last], res)
                while g <= ihi and not _row_ok(rows_a, rows_b, r, point, tol):
                    g += 1
                    _set_last(point, g, lo[last], hi[last], spacing[last], res)
                while g > ilo:
                    _set_last(point, g - 1, lo[last], hi[last], spacing[last], res)
                    if not _row_ok(rows_a, rows_b, r, point, tol):
                        break
                    g -= 1
                ilo = g
            else:
                g = int(np.floor(guess)) if guess < res - 1 else res - 1
                g = max(min(g, ihi), ilo - 1)
                _set_last(point, g, lo[last], hi[last], spacing[last], res)
                while g >= ilo and not _row_ok(rows_a, rows_b, r, point, tol):
                    g -= 1
                    _set_last(point, g, lo[last], hi[last], spacing[last], res)
                while g < ihi:
                    _set_last(point, g + 1, lo[last], hi[last], spacing[last], res)
                    if not _row_ok(rows_a, rows_b, r, point, tol):
                        break
                    g += 1
                ihi = g
            if ilo > ihi:
                break
        if ilo > ihi:
            continue
        # candidates: range ends and the grid points around the line minimizer
        gamma = quad[last, last]
        beta = lin[last]
        for j in range(last):
            beta += quad[last, j] * point[j]
        k = ilo
        if gamma > 0 and spacing[last] > 0:
            xstar = -beta / gamma
            kf = (xstar - lo[last]) / spacing[last]
            if kf >= ihi:
                k = ihi
            elif kf > ilo:
                k = int(np.floor(kf))
        line_best = np.inf
        line_i = -1
        for c in range(6):
            if c == 0:
                i = ilo
            elif c == 1:
                i = ihi
            else:
                i = k + c - 3
            if i < ilo or i > ihi:
                continue
            _set_last(point, i, lo[last], hi[last], spacing[last], res)
            val = _point_value(quad, lin, const, point)
            if val < line_best or (val == line_best and i < line_i):
                line_best = val
                line_i = i
        if line_best < best:
            best = line_best
            found = True
            _set_last(point, line_i, lo[last], hi[last], spacing[last], res)
            for j in range(dim):
                best_point[j] = point[j]
    return best, best_point, found


def grid_qp_scan_python(quad, lin, const, rows_a, rows_b, lo, hi, res, tol):
    """Vectorized numpy form of the grid scan, chunked over the first axis."""
    dim = lo.shape[0]
    axes = []
    for j in range(dim):
        ax = np.linspace(lo[j], hi[j], res)
        ax[-1] = hi[j]
        axes.append(ax)
    best = np.inf
    best_point = np.zeros(dim)
    found = False
    rest = np.stack(np.meshgrid(*axes[1:], indexing="ij"), axis=-1).reshape(-1, dim - 1) if dim > 1 else None
    for x0 in axes[0]:
        if rest is None:
            pts = np.array([[x0]])
        else:
            pts = np.empty((rest.shape[0], dim))
            pts[:, 0] = x0
            pts[:, 1:] = rest
        if rows_a.shape[0]:
            ok = np.all(pts @ rows_a.T + rows_b >= -tol, axis=1)
        else:
            ok = np.ones(pts.shape[0], dtype=bool)
        if not ok.any():
            continue
        vals = const + pts @ lin + 0.5 * np.einsum("ij,jk,ik->i", pts, quad, pts)
        vals = np.where(ok, vals, np.inf)
        i = int(np.argmin(vals))
        if vals[i] < best:
            best = float(vals[i])
            best_point = pts[i].copy()
            found = True
    return best, best_point, found


if HAVE_NUMBA:
    _point_value = _maybe_njit(_point_value)
    _row_ok = _maybe_njit(_row_ok)
    _set_last = _maybe_njit(_set_last)
    grid_qp_scan_numba = _maybe_njit(_grid_qp_scan_loop)
else:
    grid_qp_scan_numba = grid_qp_scan_python

if USE_NUMBA:
    rk4_acc = rk4_acc_numba
    grid_qp_scan = grid_qp_scan_numba
else:
    rk4_acc = rk4_acc_python
    grid_qp_scan = grid_qp_scan_python
