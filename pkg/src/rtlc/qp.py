"""Small dense convex QPs: an active-set solver and a brute-force grid oracle.

Problem form::

    minimize   0.5 z'Qz + lin'z + const
    subject to rows_a z + rows_b >= 0,   box_lower <= z <= box_upper
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .constraints import LinearControlConstraint

TOL_FEAS = 1e-8

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITER = "max_iter"


@dataclass(frozen=True)
class QpProblem:
    quad: np.ndarray
    lin: np.ndarray
    rows_a: np.ndarray
    rows_b: np.ndarray
    box_lower: np.ndarray
    box_upper: np.ndarray
    const: float = 0.0

    def __post_init__(self):
        quad = np.atleast_2d(np.asarray(self.quad, dtype=float))
        dim = quad.shape[0]
        lin = np.asarray(self.lin, dtype=float).reshape(dim)
        rows_a = np.asarray(self.rows_a, dtype=float).reshape(-1, dim)
        rows_b = np.asarray(self.rows_b, dtype=float).reshape(-1)
        lo = np.asarray(self.box_lower, dtype=float).reshape(dim)
        hi = np.asarray(self.box_upper, dtype=float).reshape(dim)
        if quad.shape != (dim, dim):
            raise ValueError("quad must be square")
        scale = max(1.0, float(np.max(np.abs(quad))))
        if np.max(np.abs(quad - quad.T)) > 1e-12 * scale:
            raise ValueError("quad must be symmetric")
        if rows_a.shape[0] != rows_b.shape[0]:
            raise ValueError("rows_a and rows_b disagree on the number of rows")
        if np.any(lo > hi):
            raise ValueError("box_lower exceeds box_upper")
        for name, val in (("quad", quad), ("lin", lin), ("rows_a", rows_a), ("rows_b", rows_b)):
            if not np.all(np.isfinite(val)):
                raise ValueError(f"{name} has non-finite entries")
        object.__setattr__(self, "quad", quad)
        object.__setattr__(self, "lin", lin)
        object.__setattr__(self, "rows_a", rows_a)
        object.__setattr__(self, "rows_b", rows_b)
        object.__setattr__(self, "box_lower", lo)
        object.__setattr__(self, "box_upper", hi)
        object.__setattr__(self, "const", float(self.const))

    @property
    def dim(self) -> int:
        return self.quad.shape[0]

    def objective(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return float(0.5 * z @ self.quad @ z + self.lin @ z + self.const)

    def row_values(self, z) -> np.ndarray:
        return self.rows_a @ np.asarray(z, dtype=float) + self.rows_b

    def is_feasible(self, z, tol: float = TOL_FEAS) -> bool:
        z = np.asarray(z, dtype=float)
        return bool(
            np.all(self.row_values(z) >= -tol)
            and np.all(z >= self.box_lower - tol)
            and np.all(z <= self.box_upper + tol)
        )

    def without_row(self, i: int) -> "QpProblem":
        keep = [j for j in range(self.rows_a.shape[0]) if j != i]
        return QpProblem(self.quad, self.lin, self.rows_a[keep], self.rows_b[keep],
                         self.box_lower, self.box_upper, self.const)


def lift_rows(constraints: Sequence[LinearControlConstraint], n_slack: int = 1):
    """Stack rows over the decision vector ``(u, delta)``.

    Each constraint's slack coefficient multiplies the single slack variable
    (``n_slack`` must be 0 or 1).
    """
    if n_slack not in (0, 1):
        raise ValueError("only zero or one slack variable is supported")
    a_rows, b_rows = [], []
    for c in constraints:
        if n_slack == 0 and c.s != 0.0:
            raise ValueError("constraint has a slack coefficient but the problem has no slack")
        a_rows.append(np.concatenate([c.a, [c.s]]) if n_slack else c.a.copy())
        b_rows.append(c.b)
    return np.array(a_rows), np.array(b_rows)


@dataclass
class QpSolution:
    z: np.ndarray
    status: str
    objective: float
    active_set: tuple = ()
    lam_rows: Optional[np.ndarray] = None
    lam_lower: Optional[np.ndarray] = None
    lam_upper: Optional[np.ndarray] = None
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _prepare(prob: QpProblem):
    """Jacobi-scale the variables and stack all constraints as unit normals."""
    quad = prob.quad
    eig = np.linalg.eigvalsh(quad)
    top = max(1.0, float(np.max(np.abs(eig))))
    if eig[0] < -1e-10 * top:
        raise ValueError(f"quad is indefinite (min eigenvalue {eig[0]:.3e})")
    diag = np.diag(quad).copy()
    d = np.where(diag > 0, 1.0 / np.sqrt(np.where(diag > 0, diag, 1.0)), 1.0)
    qs = quad * np.outer(d, d)
    eig_s = np.linalg.eigvalsh(qs)
    if eig_s[0] <= 1e-12 * max(1.0, eig_s[-1]):
        qs = qs + 1e-10 * max(1.0, eig_s[-1]) * np.eye(prob.dim)
    cs = prob.lin * d

    normals, rhs, kind, src = [], [], [], []
    for i in range(prob.rows_a.shape[0]):
        n = prob.rows_a[i] * d
        nn = float(np.linalg.norm(n))
        normals.append(n / nn if nn > 0 else n)
        rhs.append(-prob.rows_b[i] / nn if nn > 0 else -prob.rows_b[i])
        kind.append("row" if nn > 0 else "zero")
        src.append(i)
    for j in range(prob.dim):
        if math.isfinite(prob.box_lower[j]):
            n = np.zeros(prob.dim)
            n[j] = 1.0
            normals.append(n)
            rhs.append(prob.box_lower[j] / d[j])
            kind.append("lower")
            src.append(j)
        if math.isfinite(prob.box_upper[j]):
            n = np.zeros(prob.dim)
            n[j] = -1.0
            normals.append(n)
            rhs.append(-prob.box_upper[j] / d[j])
            kind.append("upper")
            src.append(j)
    normals = np.array(normals).reshape(-1, prob.dim)
    return d, qs, cs, normals, np.array(rhs), kind, src


def solve_qp(prob: QpProblem, tol: float = TOL_FEAS, max_iter: Optional[int] = None) -> QpSolution:
    """Solve a small strictly convex QP with the Goldfarb-Idnani dual active-set method.

    The method starts at the unconstrained minimizer and adds the most
    violated constraint (lowest index on ties) until the iterate is primal
    feasible; a violated constraint that cannot be added with nonnegative
    multipliers proves infeasibility. Returns the global minimizer, or status
    ``infeasible`` / ``max_iter`` with the last iterate.

    Raises
    ------
    ValueError
        If ``quad`` is indefinite.
    """
    d, qs, cs, normals, rhs, kind, src = _prepare(prob)
    dim = prob.dim
    if max_iter is None:
        max_iter = 100 * dim
    for i, k in enumerate(kind):
        if k == "zero" and rhs[i] > tol:
            # 0 >= rhs with rhs > 0 cannot hold for any z
            return _finish(prob, d, np.zeros(dim), INFEASIBLE, [], [], kind, src, 0)
    ncon = normals.shape[0]
    chol = np.linalg.cholesky(qs)
    qinv = np.linalg.inv(qs)
    qinv = 0.5 * (qinv + qinv.T)
    y = -np.linalg.solve(chol.T, np.linalg.solve(chol, cs))
    active: list = []
    mult: list = []
    iters = 0
    status = OPTIMAL
    while True:
        slack = normals @ y - rhs
        cand = [i for i in range(ncon) if kind[i] != "zero" and i not in active and slack[i] < -tol]
        if not cand:
            break
        p = min(cand, key=lambda i: (slack[i], i))
        n_p = normals[p]
        u_p = 0.0
        while True:
            iters += 1
            if iters > max_iter:
                status = MAX_ITER
                break
            if active:
                nmat = normals[active].T
                gram = nmat.T @ qinv @ nmat
                nstar = np.linalg.solve(gram, nmat.T @ qinv)
                r = nstar @ n_p
                step_dir = qinv @ n_p - qinv @ nmat @ r
            else:
                r = np.zeros(0)
                step_dir = qinv @ n_p
            # dual (partial) step: largest t keeping active multipliers >= 0
            t1, k_drop = math.inf, None
            for j, rj in enumerate(r):
                if rj > 1e-14:
                    ratio = mult[j] / rj
                    if ratio < t1:
                        t1, k_drop = ratio, j
            curv = float(step_dir @ n_p)
            s_p = float(n_p @ y - rhs[p])
            if np.linalg.norm(step_dir) <= 1e-12 * max(1.0, np.linalg.norm(qinv @ n_p)) or curv <= 0:
                t2 = math.inf
            else:
                t2 = -s_p / curv
            t = min(t1, t2)
            if math.isinf(t):
                status = INFEASIBLE
                break
            if math.isinf(t2):
                mult = [m - t * rj for m, rj in zip(mult, r)]
                u_p += t
                del active[k_drop]
                del mult[k_drop]
                continue
            y = y + t * step_dir
            mult = [m - t * rj for m, rj in zip(mult, r)]
            u_p += t
            if t == t2:
                active.append(p)
                mult.append(u_p)
                break
            del active[k_drop]
            del mult[k_drop]
        if status != OPTIMAL:
            break
    return _finish(prob, d, y, status, active, mult, kind, src, iters)


def _finish(prob, d, y, status, active, mult, kind, src, iters):
    z = y * d
    lam_rows = np.zeros(prob.rows_a.shape[0])
    lam_lower = np.zeros(prob.dim)
    lam_upper = np.zeros(prob.dim)
    for i, mu in zip(active, mult):
        k, j = kind[i], src[i]
        if k == "row":
            lam_rows[j] = mu / np.linalg.norm(prob.rows_a[j] * d)
        elif k == "lower":
            lam_lower[j] = mu / d[j]
        elif k == "upper":
            lam_upper[j] = mu / d[j]
    if status == OPTIMAL:
        # snap onto active bounds and the box
        for i in active:
            if kind[i] == "lower":
                z[src[i]] = prob.box_lower[src[i]]
            elif kind[i] == "upper":
                z[src[i]] = prob.box_upper[src[i]]
        z = np.clip(z, prob.box_lower, prob.box_upper)
    rows = prob.row_values(z)
    act = tuple(int(i) for i in np.flatnonzero(np.abs(rows) <= 1e-7 * np.maximum(1.0, np.linalg.norm(prob.rows_a, axis=1))))
    return QpSolution(z, status, prob.objective(z), act, lam_rows, lam_lower, lam_upper, iters)


def kkt_residual(prob: QpProblem, sol: QpSolution) -> float:
    """Largest violation among stationarity, dual sign, complementarity and primal feasibility.

    The stationarity residual ``Qz + lin - A'lam_rows - lam_lower + lam_upper``
    is measured relative to ``max(1, |Qz + lin|, |lin|)``.
    """
    z = sol.z
    grad = prob.quad @ z + prob.lin
    stat = grad - prob.rows_a.T @ sol.lam_rows - sol.lam_lower + sol.lam_upper
    scale = max(1.0, float(np.max(np.abs(grad))), float(np.max(np.abs(prob.lin))))
    res = [float(np.max(np.abs(stat))) / scale]
    lams = np.concatenate([sol.lam_rows, sol.lam_lower, sol.lam_upper])
    res.append(float(max(0.0, -np.min(lams))) if lams.size else 0.0)
    rows = prob.row_values(z)
    slacks = np.concatenate([
        rows,
        np.where(np.isfinite(prob.box_lower), z - prob.box_lower, 0.0),
        np.where(np.isfinite(prob.box_upper), prob.box_upper - z, 0.0),
    ])
    res.append(float(np.max(np.abs(lams * slacks))) / scale if lams.size else 0.0)
    if slacks.size:
        res.append(float(max(0.0, -np.min(slacks))))
    return max(res)


def _zoom(scan, point, best, lo, hi, cell, refine, refine_res):
    """Rescan +-4 cells around the incumbent; shrink the window ``refine``
    times, rescanning at the same scale while the incumbent still travels."""
    shrinks = passes = 0
    while shrinks < refine and passes < 20 * refine:
        if np.all(cell <= 1e-12 * np.maximum(1.0, np.abs(point))):
            break
        passes += 1
        wlo = np.maximum(lo, point - 4 * cell)
        whi = np.minimum(hi, point + 4 * cell)
        val, cand, ok = scan(wlo, whi, refine_res)
        travelled = 0.0
        if ok and val < best:
            cand = np.array(cand)
            steps = np.abs(cand - point) / np.where(cell > 0, cell, 1.0)
            travelled = float(np.max(np.where(cell > 0, steps, 0.0)))
            best, point = val, cand
        if travelled > 2.0:
            continue
        cell = (whi - wlo) / (refine_res - 1)
        shrinks += 1
    return best, point


def brute_force_qp(
    prob: QpProblem,
    grid_res: int = 2000,
    refine: int = 8,
    refine_res: int = 81,
    tol: float = TOL_FEAS,
) -> QpSolution:
    """Exhaustive search over every face of the feasible polytope.

    Rows and box faces are pooled (rows scaled to unit 1-norm). For each
    linearly independent subset of at most ``dim`` of them, the search is
    restricted to the affine set where that subset holds with equality: a
    vertex is evaluated directly, a higher-dimensional face is parameterized
    over its null space and scanned on a ``grid_res`` grid per axis (the
    empty subset is the full box), followed by zoom passes of
    ``refine_res`` points. Points count as feasible when every scaled row
    and box face holds to ``tol``. The optimum lies in the relative interior
    of one face, where the restricted search is unconstrained, so the zoom
    converges there; the smallest value over all faces is returned (first
    face in enumeration order on ties).
    """
    if prob.dim > 3:
        raise ValueError("brute_force_qp supports at most 3 decision variables")
    lo, hi = prob.box_lower, prob.box_upper
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("brute_force_qp needs finite bounds on every variable")
    if grid_res < 2 or refine_res < 2:
        raise ValueError("grid resolutions must be at least 2")
    dim = prob.dim
    norms = np.sum(np.abs(prob.rows_a), axis=1)
    keep = norms > 0
    if np.any(prob.rows_b[~keep] < -tol):
        return QpSolution(np.full(dim, np.nan), INFEASIBLE, math.inf)
    eye = np.eye(dim)
    cons_a = np.vstack([prob.rows_a[keep] / norms[keep, None], eye, -eye])
    cons_b = np.concatenate([prob.rows_b[keep] / norms[keep], -lo, hi])

    best_val, best_z = math.inf, None
    for k in range(dim + 1):
        for subset in itertools.combinations(range(cons_a.shape[0]), k):
            idx = list(subset)
            if k:
                a_s = cons_a[idx]
                if np.linalg.matrix_rank(a_s) < k:
                    continue
                z_p = np.linalg.lstsq(a_s, -cons_b[idx], rcond=None)[0]
                basis = np.linalg.svd(a_s)[2][k:].T
            else:
                z_p, basis = np.zeros(dim), eye
            if k == dim:
                if np.all(cons_a @ z_p + cons_b >= -tol):
                    val = prob.objective(z_p)
                    if val < best_val:
                        best_val, best_z = val, z_p
                continue
            # bounding box of the face (inside the variable box) in null-space coordinates
            lo_t = np.sum(np.minimum(basis * (lo - z_p)[:, None], basis * (hi - z_p)[:, None]), axis=0)
            hi_t = np.sum(np.maximum(basis * (lo - z_p)[:, None], basis * (hi - z_p)[:, None]), axis=0)
            quad_t = basis.T @ prob.quad @ basis
            quad_t = 0.5 * (quad_t + quad_t.T)
            lin_t = basis.T @ (prob.quad @ z_p + prob.lin)
            args = (quad_t, lin_t, prob.objective(z_p), cons_a @ basis, cons_a @ z_p + cons_b)

            def scan(wlo, whi, res, args=args):
                return _kernels.grid_qp_scan(*args, wlo, whi, res, tol)

            val, t, ok = scan(lo_t, hi_t, grid_res)
            if not ok:
                continue
            cell = (hi_t - lo_t) / (grid_res - 1)
            val, t = _zoom(scan, np.array(t), val, lo_t, hi_t, cell, refine, refine_res)
            z = z_p + basis @ t
            val = prob.objective(z)
            if val < best_val:
                best_val, best_z = val, z
    if best_z is None:
        return QpSolution(np.full(dim, np.nan), INFEASIBLE, math.inf)
    return QpSolution(np.asarray(best_z, dtype=float), OPTIMAL, float(best_val))
