"""Per-step affine constraint rows for HOCBF, TLC, event-driven TLC and rTLC.

Every row has the form ``a . u + s * delta + b >= 0``. Safety rows are hard
(``s = 0``); the stability row carries the relaxation slack (``s = 1``).

Rows default to the *normalized* scaling: the Taylor expression is divided by
``dt**m / m!`` so that for ``m = 2`` the row reads
``L_f^2 h + L_g L_f h u + (2/dt) L_f h + (2/dt^2) h >= 0``. Remainders and
their lower bounds use the same scaling (``R * m! / dt**m``), so an rTLC row
is a TLC row with ``r_min`` added to ``b``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .lie import (
    ControlBounds,
    DynamicsModel,
    LieJet,
    SafetyFunction,
    StateBox,
    eval_lie_jet,
)


@dataclass(frozen=True)
class LinearControlConstraint:
    a: np.ndarray
    s: float
    b: float

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "b", float(self.b))
        if not (np.all(np.isfinite(a)) and math.isfinite(self.s) and math.isfinite(self.b)):
            raise ValueError(f"non-finite constraint coefficients a={a}, s={self.s}, b={self.b}")

    def lhs(self, u, delta: float = 0.0) -> float:
        return float(self.a @ np.atleast_1d(np.asarray(u, dtype=float)) + self.s * delta + self.b)

    def scaled(self, factor: float) -> "LinearControlConstraint":
        return LinearControlConstraint(self.a * factor, self.s * factor, self.b * factor)


@dataclass(frozen=True)
class RemainderBound:
    r_min: float
    provenance: str
    grid_resolution: Optional[tuple] = None
    argmin_state: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.provenance not in ("closed_form", "grid"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if not math.isfinite(self.r_min):
            raise ValueError("r_min must be finite")

    def __float__(self):
        return float(self.r_min)


@dataclass(frozen=True, eq=False)
class EventRegion:
    """Half-widths of ``S(x) = {y : x - x_lower <= y <= x + x_up}``."""

    x_lower: np.ndarray
    x_up: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.x_lower, dtype=float))
        up = np.atleast_1d(np.asarray(self.x_up, dtype=float))
        if lo.shape != up.shape:
            raise ValueError("x_lower and x_up must have the same shape")
        if np.any(lo < 0) or np.any(up < 0) or not (np.all(np.isfinite(lo)) and np.all(np.isfinite(up))):
            raise ValueError("event region half-widths must be finite and nonnegative")
        object.__setattr__(self, "x_lower", lo)
        object.__setattr__(self, "x_up", up)

    def __eq__(self, other):
        if not isinstance(other, EventRegion):
            return NotImplemented
        return np.array_equal(self.x_lower, other.x_lower) and np.array_equal(self.x_up, other.x_up)

    def __hash__(self):
        return hash((self.x_lower.tobytes(), self.x_up.tobytes()))

    def box(self, center) -> StateBox:
        center = np.asarray(center, dtype=float)
        return StateBox(center - self.x_lower, center + self.x_up)

    def contains(self, center, x) -> bool:
        center = np.asarray(center, dtype=float)
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= center - self.x_lower) and np.all(x <= center + self.x_up))


@dataclass(frozen=True)
class ControlRateBounds:
    du_lower: np.ndarray
    du_upper: np.ndarray


def _check_dt(delta_t):
    if not delta_t > 0:
        raise ValueError(f"delta_t must be positive, got {delta_t}")


def _taylor_weights(m: int, delta_t: float, normalized: bool) -> np.ndarray:
    """Weights of ``h_vals[0..m]`` in the order-``m`` Taylor row."""
    k = np.arange(m + 1)
    if normalized:
        # dt**k / k! divided by dt**m / m!
        return np.array([math.factorial(m) / math.factorial(j) * delta_t ** (j - m) for j in k])
    return np.array([delta_t**j / math.factorial(j) for j in k])


def tlc_row(jet: LieJet, delta_t: float, normalized: bool = True) -> LinearControlConstraint:
    """Zero-order-hold TLC row built from the order-``m`` Taylor expansion."""
    _check_dt(delta_t)
    m = jet.m
    w = _taylor_weights(m, delta_t, normalized)
    b = float(np.dot(w, jet.h_vals))
    a = jet.lgh_m1 * w[m]
    return LinearControlConstraint(a, 0.0, b)


def hocbf_row(jet: LieJet, p1: float = 1.0, p2: float = 1.0) -> LinearControlConstraint:
    """Second-order HOCBF row with linear class-K penalties ``p1``, ``p2``."""
    if jet.m != 2:
        raise ValueError(f"HOCBF row is implemented for relative degree 2 only, got {jet.m}")
    if not (p1 > 0 and p2 > 0):
        raise ValueError("HOCBF penalties must be positive")
    h0, h1, h2 = jet.h_vals
    return LinearControlConstraint(jet.lgh_m1.copy(), 0.0, h2 + (p1 + p2) * h1 + p1 * p2 * h0)


def remainder_terms(
    jet: LieJet,
    u,
    du,
    delta_t: float,
    m: Optional[int] = None,
    normalized: bool = True,
) -> float:
    """Lagrange remainder of the order-``m+1`` expansion at one ``(x, u, du)``.

    ``R = [L_f^{m+1}h + (L_g L_f^m h + L_f L_g L_f^{m-1} h + L_g^2 L_f^{m-1} h) u
    + L_g L_f^{m-1} h du] * dt^{m+1} / (m+1)!``, divided by ``dt^m / m!`` when
    ``normalized``.
    """
    _check_dt(delta_t)
    if m is None:
        m = jet.m
    elif m != jet.m:
        raise ValueError(f"order {m} does not match jet order {jet.m}")
    if not jet.has_remainder_terms:
        raise ValueError("jet lacks the order-(m+1) terms needed for the remainder")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    du = np.atleast_1d(np.asarray(du, dtype=float))
    bracket = jet.h_m1 + (jet.lgh_m + jet.lflg + jet.lg2) @ u + jet.lgh_m1 @ du
    if normalized:
        return float(bracket * delta_t / (m + 1))
    return float(bracket * delta_t ** (m + 1) / math.factorial(m + 1))


def du_bounds(u, bounds: ControlBounds, delta_t: float) -> ControlRateBounds:
    """Control-rate interval keeping ``u`` inside ``U`` over the next ``delta_t``."""
    _check_dt(delta_t)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if not bounds.contains(u):
        raise ValueError(f"u = {u} lies outside the control bounds")
    return ControlRateBounds(-(u - bounds.u_min) / delta_t, (bounds.u_max - u) / delta_t)


def _axis_grid(lo, hi, res):
    axes = []
    for j, (l, h) in enumerate(zip(lo, hi)):
        r = int(res[j])
        if r < 2:
            raise ValueError("grid resolution must be at least 2 per axis")
        ax = np.linspace(l, h, r)
        ax[-1] = h
        axes.append(ax)
    return axes


def _resolution(res, n):
    if np.isscalar(res):
        return (int(res),) * n
    res = tuple(int(r) for r in res)
    if len(res) != n:
        raise ValueError(f"need {n} grid resolutions, got {len(res)}")
    return res


def estimate_rmin_grid(
    model: DynamicsModel,
    safety: SafetyFunction,
    x_box: StateBox,
    bounds: ControlBounds,
    delta_t: float,
    grid_res: Union[int, Sequence[int]] = 50,
    normalized: bool = True,
) -> RemainderBound:
    """Minimize the remainder over a state grid, ``u in U`` and ``du`` in the
    relaxed rate box ``|du| <= (u_max - u_min) / delta_t``.

    The remainder is affine in ``u`` and in ``du`` for fixed ``x``, so those
    axes are minimized exactly at their interval endpoints. Ties keep the
    lexicographically first grid state.
    """
    _check_dt(delta_t)
    lo = np.asarray(x_box.lower, dtype=float)
    hi = np.asarray(x_box.upper, dtype=float)
    if lo.shape != (model.n,):
        raise ValueError("state box dimension does not match the model")
    if np.any(lo > hi):
        raise ValueError("empty state box")
    res = _resolution(grid_res, model.n)
    du_span = (bounds.u_max - bounds.u_min) / delta_t
    factor = delta_t / (safety.m + 1) if normalized else delta_t ** (safety.m + 1) / math.factorial(safety.m + 1)
    best = math.inf
    best_x = None
    for point in itertools.product(*_axis_grid(lo, hi, res)):
        x = np.array(point)
        jet = eval_lie_jet(model, safety, x)
        if not jet.has_remainder_terms:
            raise ValueError("oracle does not provide order-(m+1) terms")
        cu = jet.lgh_m + jet.lflg + jet.lg2
        val = jet.h_m1
        val += float(np.sum(np.minimum(cu * bounds.u_min, cu * bounds.u_max)))
        val -= float(np.sum(np.abs(jet.lgh_m1) * du_span))
        val *= factor
        if val < best:
            best = val
            best_x = x
    return RemainderBound(float(best), "grid", grid_resolution=res, argmin_state=best_x)


def rtlc_row(
    jet: LieJet,
    delta_t: float,
    r_min: Union[float, RemainderBound],
    normalized: bool = True,
) -> LinearControlConstraint:
    """TLC row with the remainder lower bound added; depends only on ``x(t0)``, ``u(t0)``."""
    row = tlc_row(jet, delta_t, normalized)
    return LinearControlConstraint(row.a, row.s, row.b + float(r_min))


def etlc_row(
    model: DynamicsModel,
    safety: SafetyFunction,
    x_center,
    region: EventRegion,
    delta_t: float,
    grid_res: Union[int, Sequence[int]] = 5,
    bounds: Optional[ControlBounds] = None,
    normalized: bool = True,
) -> LinearControlConstraint:
    """Worst-case TLC row over a grid on ``S(x_center)``.

    When every grid row shares the same control coefficient the result is
    that coefficient with the minimum ``b``. Otherwise each grid coefficient
    ``a*`` is a candidate with
    ``b* = min_j [b_j + min_{u in U} (a_j - a*) . u]``, which makes
    ``a* . u + b* >= 0`` imply every grid row for ``u in U``; the candidate
    with the smallest ``b*`` is returned (first in grid order on ties).
    """
    _check_dt(delta_t)
    x_center = np.asarray(x_center, dtype=float)
    box = region.box(x_center)
    res = _resolution(grid_res, model.n)
    rows = [
        tlc_row(eval_lie_jet(model, safety, np.array(p)), delta_t, normalized)
        for p in itertools.product(*_axis_grid(box.lower, box.upper, res))
    ]
    a_all = np.array([r.a for r in rows])
    b_all = np.array([r.b for r in rows])
    if np.all(a_all == a_all[0]):
        return LinearControlConstraint(a_all[0], 0.0, float(np.min(b_all)))
    if bounds is None:
        raise ValueError("control bounds are required when the control coefficient varies over S(x)")
    best = None
    for a_star in a_all:
        diff = a_all - a_star
        shift = np.sum(np.minimum(diff * bounds.u_min, diff * bounds.u_max), axis=1)
        b_star = float(np.min(b_all + shift))
        if best is None or b_star < best[1]:
            best = (a_star, b_star)
    return LinearControlConstraint(best[0], 0.0, best[1])


def tls_row(jet_v: LieJet, delta_t: float) -> LinearControlConstraint:
    """Relaxed stability row ``L_f V + L_g V u + V / dt <= delta``."""
    _check_dt(delta_t)
    if jet_v.m != 1:
        raise ValueError("the stability row expects a relative-degree-1 jet")
    v0, v1 = jet_v.h_vals
    return LinearControlConstraint(-jet_v.lgh_m1, 1.0, -(v1 + v0 / delta_t))
