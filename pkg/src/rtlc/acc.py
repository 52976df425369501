"""Adaptive cruise control: dynamics, closed-form jets and the per-step QP controller.

State ``x = (v, z)``: ego speed and gap to the preceding vehicle, which moves
at constant speed ``v0``::

    vdot = (u - F_r(v)) / M,     zdot = v0 - v,     F_r(v) = f0 sgn(v) + f1 v + f2 v^2

Safety is ``h = z - c >= 0`` (relative degree 2).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .constraints import (
    EventRegion,
    LinearControlConstraint,
    RemainderBound,
    etlc_row,
    hocbf_row,
    rtlc_row,
    tlc_row,
    tls_row,
)
from .lie import ControlBounds, DynamicsModel, LieJet, SafetyFunction
from .qp import OPTIMAL, QpProblem, lift_rows, solve_qp

METHODS = ("hocbf", "tlc", "etlc", "rtlc")


@dataclass(frozen=True)
class AccParams:
    """Scenario parameters; defaults are the reference ACC scenario."""

    v0: float = 13.89
    v_d: float = 24.0
    mass: float = 1650.0
    g: float = 9.81
    f0: float = 0.1
    f1: float = 5.0
    f2: float = 0.25
    c: float = 10.0
    c_a: float = 0.4
    c_d: float = 0.7
    delta_t: float = 0.1
    dt: float = 0.1
    p1: float = 1.0
    p2: float = 1.0
    p_sl: float = 1.0
    region: EventRegion = field(default_factory=lambda: EventRegion((0.5, 1.0), (0.5, 1.0)))
    etlc_grid: int = 5

    def __post_init__(self):
        for name in ("v0", "v_d", "mass", "g", "f1", "f2", "c", "c_a", "c_d",
                     "delta_t", "dt", "p1", "p2", "p_sl"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.f0 < 0:
            raise ValueError("f0 must be nonnegative")
        if self.dt > self.delta_t + 1e-12:
            raise ValueError(f"dt = {self.dt} exceeds delta_t = {self.delta_t}")
        if self.region.x_lower.shape != (2,):
            raise ValueError("event region must be two-dimensional")
        if self.etlc_grid < 2:
            raise ValueError("etlc_grid must be at least 2")

    @property
    def u_min(self) -> float:
        return -self.c_d * self.mass * self.g

    @property
    def u_max(self) -> float:
        return self.c_a * self.mass * self.g

    @property
    def bounds(self) -> ControlBounds:
        return ControlBounds([self.u_min], [self.u_max])


class AccState(NamedTuple):
    v: float
    z: float


def resistance(params: AccParams, v: float) -> float:
    """Rolling/viscous/aerodynamic resistance; ``sgn(0) = 0``."""
    return params.f0 * float(np.sign(v)) + params.f1 * v + params.f2 * v * v


def _resistance_slope(params: AccParams, v: float) -> float:
    # sgn term contributes nothing away from v = 0
    return params.f1 + 2.0 * params.f2 * v


def acc_dynamics(params: AccParams, x, u: float) -> np.ndarray:
    v, z = x
    return np.array([(u - resistance(params, v)) / params.mass, params.v0 - v])


def acc_model(params: AccParams) -> DynamicsModel:
    def f(x):
        return np.array([-resistance(params, x[0]) / params.mass, params.v0 - x[0]])

    def g(x):
        return np.array([[1.0 / params.mass], [0.0]])

    return DynamicsModel(n=2, q=1, f=f, g=g)


def acc_lie_jet(params: AccParams, x) -> LieJet:
    """Closed-form jet of ``h = z - c`` through order 3.

    With ``F = F_r(v)`` and ``F' = f1 + 2 f2 v``::

        L_f h = v0 - v              L_g L_f h   = -1/M
        L_f^2 h = F / M             L_g L_f^2 h = F' / M^2
        L_f^3 h = -F F' / M^2       L_f L_g L_f h = L_g^2 L_f h = 0

    so the normalized remainder is
    ``(dt/3) * (-F F'/M^2 + F' u / M^2 - du / M)``.
    """
    v, z = float(x[0]), float(x[1])
    m = params.mass
    fr = resistance(params, v)
    slope = _resistance_slope(params, v)
    return LieJet(
        h_vals=(z - params.c, params.v0 - v, fr / m),
        lgh_m1=[-1.0 / m],
        h_m1=-fr * slope / m**2,
        lgh_m=[slope / m**2],
        lflg=[0.0],
        lg2=[0.0],
    )


def acc_safety(params: AccParams) -> SafetyFunction:
    return SafetyFunction(m=2, h=lambda x: float(x[1]) - params.c, oracle=lambda x: acc_lie_jet(params, x))


def acc_lyapunov_jet(params: AccParams, x) -> LieJet:
    """Jet of ``V = (v - v_d)^2`` (relative degree 1)."""
    v = float(x[0])
    e = v - params.v_d
    return LieJet(
        h_vals=(e * e, 2.0 * e * (-resistance(params, v) / params.mass)),
        lgh_m1=[2.0 * e / params.mass],
    )


def acc_lyapunov(params: AccParams) -> SafetyFunction:
    return SafetyFunction(m=1, h=lambda x: (float(x[0]) - params.v_d) ** 2,
                          oracle=lambda x: acc_lyapunov_jet(params, x))


def acc_simplified_remainder(params: AccParams, v: float, u: float, du: float, delta_t: float) -> float:
    """Simplified remainder ``(dt/3) * (-(du - f1 u - 2 f2 v u) / M)``.

    Its control coefficient ``(f1 + 2 f2 v) / M`` is ``M`` times the exact
    ``L_g L_f^2 h`` and it omits the drift term ``L_f^3 h``; kept for
    comparison with the closed-form bound, which is derived from it.
    """
    return delta_t / 3.0 * (-(du - params.f1 * u - 2.0 * params.f2 * v * u) / params.mass)


def acc_rmin_closed_form(params: AccParams, v_t0: float, delta_t: Optional[float] = None) -> RemainderBound:
    """Closed-form remainder lower bound (normalized scaling)::

        (dt/3) [(-(u_max - u_min)/dt + f1 u_min) / M]
      + (dt/3) [2 f2 (v(t0) + dt u_max / M) u_min / M]
    """
    dt = params.delta_t if delta_t is None else delta_t
    if not dt > 0:
        raise ValueError("delta_t must be positive")
    m = params.mass
    u_min, u_max = params.u_min, params.u_max
    rate_term = dt / 3.0 * ((-(u_max - u_min) / dt + params.f1 * u_min) / m)
    drag_term = dt / 3.0 * (2.0 * params.f2 * (v_t0 + dt * u_max / m) * u_min / m)
    return RemainderBound(rate_term + drag_term, "closed_form")


class StepResult(NamedTuple):
    u: float
    delta: float
    diagnostics: dict


def safety_row(params: AccParams, x, method: str, trigger_state=None) -> tuple:
    """The hard safety row for ``method`` at ``x``; returns ``(row, r_min)``."""
    x = np.asarray(x, dtype=float)
    jet = acc_lie_jet(params, x)
    r_min = None
    if method == "hocbf":
        row = hocbf_row(jet, params.p1, params.p2)
    elif method == "tlc":
        row = tlc_row(jet, params.delta_t)
    elif method == "rtlc":
        r_min = acc_rmin_closed_form(params, x[0]).r_min
        row = rtlc_row(jet, params.delta_t, r_min)
    elif method == "etlc":
        center = x if trigger_state is None else np.asarray(trigger_state, dtype=float)
        row = etlc_row(acc_model(params), acc_safety(params), center, params.region,
                       params.delta_t, params.etlc_grid, bounds=params.bounds)
    else:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    return row, r_min


def build_step_qp(params: AccParams, x, row: LinearControlConstraint) -> tuple:
    """QP over ``(u, delta)``: ``((u - F_r)/M)^2 + p_sl delta^2`` with the safety and stability rows."""
    v = float(x[0])
    fr = resistance(params, v)
    m = params.mass
    stab = tls_row(acc_lyapunov_jet(params, x), params.delta_t)
    rows_a, rows_b = lift_rows([row, stab], n_slack=1)
    prob = QpProblem(
        quad=np.diag([2.0 / m**2, 2.0 * params.p_sl]),
        lin=[-2.0 * fr / m**2, 0.0],
        rows_a=rows_a,
        rows_b=rows_b,
        box_lower=[params.u_min, 0.0],
        box_upper=[params.u_max, np.inf],
        const=(fr / m) ** 2,
    )
    return prob, stab


def acc_step_controller(params: AccParams, x, method: str, trigger_state=None) -> StepResult:
    """Solve one control step.

    On an infeasible QP the control falls back to the bound that maximizes the
    safety row (maximum braking for ACC), the slack to the smallest value
    satisfying the stability row, and ``diagnostics["infeasible"]`` is set.
    """
    t_start = time.perf_counter()
    row, r_min = safety_row(params, x, method, trigger_state)
    prob, stab = build_step_qp(params, x, row)
    t_built = time.perf_counter()
    sol = solve_qp(prob)
    t_solved = time.perf_counter()
    infeasible = sol.status != OPTIMAL
    if infeasible:
        a = float(row.a[0])
        u = params.u_min if a <= 0 else params.u_max
        delta = max(0.0, -(stab.a[0] * u + stab.b))
    else:
        u, delta = float(sol.z[0]), float(sol.z[1])
    diagnostics = {
        "status": sol.status,
        "infeasible": infeasible,
        "row": row,
        "row_lhs": row.lhs([u]),
        "r_min": r_min,
        "objective": sol.objective,
        "solve_time": t_solved - t_built,
        "assembly_time": t_built - t_start,
    }
    return StepResult(u, delta, diagnostics)
