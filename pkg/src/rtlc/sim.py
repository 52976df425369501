"""Zero-order-hold closed-loop simulation with a dense inter-sample safety audit."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .acc import METHODS, AccParams, AccState, acc_step_controller
from .constraints import EventRegion


class IntegrationError(ArithmeticError):
    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index


@dataclass(frozen=True)
class SimConfig:
    method: str = "rtlc"
    params: AccParams = field(default_factory=AccParams)
    x0: AccState = AccState(24.0, 90.0)
    horizon: float = 30.0
    substeps: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ValueError("substeps must be a positive integer")
        ratio = self.horizon / self.params.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"dt = {self.params.dt} does not divide horizon = {self.horizon}")
        object.__setattr__(self, "x0", AccState(float(self.x0[0]), float(self.x0[1])))

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.params.dt))


@dataclass
class Trajectory:
    """Control-instant log (``n_steps + 1`` rows; the last row has no control)
    plus dense substep states starting at ``t = 0``."""

    t: np.ndarray
    v: np.ndarray
    z: np.ndarray
    u: np.ndarray
    delta: np.ndarray
    h: np.ndarray
    row_lhs: np.ndarray
    qp_status: list
    solve_time: np.ndarray
    assembly_time: np.ndarray
    triggered: np.ndarray
    t_sub: np.ndarray
    v_sub: np.ndarray
    z_sub: np.ndarray
    h_sub: np.ndarray

    @property
    def n_controls(self) -> int:
        return len(self.t) - 1


@dataclass
class SimSummary:
    method: str
    delta_t: float
    dt: float
    min_h: float
    mean_solve_time: float
    std_solve_time: float
    mean_assembly_time: float
    infeasible_steps: int
    triggers: int


def integrate_step(params: AccParams, x, u: float, dt: float, substeps: int, step_index=None):
    """Classical RK4 under constant ``u``; returns ``(x_next, dense)`` where
    ``dense`` holds the ``substeps`` states after each substep."""
    if substeps < 1:
        raise ValueError("substeps must be at least 1")
    v, z = float(x[0]), float(x[1])
    dense = _kernels.rk4_acc(v, z, float(u), dt / substeps, int(substeps),
                             params.v0, params.mass, params.f0, params.f1, params.f2)
    if not np.all(np.isfinite(dense)):
        raise IntegrationError(f"non-finite state while integrating step {step_index}", step_index)
    return AccState(float(dense[-1, 0]), float(dense[-1, 1])), dense


def event_trigger_check(x, trigger_state, region: EventRegion) -> bool:
    """True when ``x`` has left ``S(trigger_state)``."""
    return not region.contains(np.asarray(trigger_state, dtype=float), np.asarray(x, dtype=float))


def run_simulation(config: SimConfig):
    """Closed loop over ``horizon / dt`` control steps.

    For ``etlc`` the trigger state is refreshed when the state leaves
    ``S(trigger_state)`` or ``delta_t`` has elapsed since the last trigger.
    ``min_h`` in the summary is taken over every dense substep.
    """
    p = config.params
    n = config.n_steps
    sub = int(config.substeps)
    x = config.x0
    t = np.arange(n + 1) * p.dt
    v = np.empty(n + 1)
    z = np.empty(n + 1)
    u_log = np.full(n + 1, np.nan)
    d_log = np.full(n + 1, np.nan)
    lhs_log = np.full(n + 1, np.nan)
    solve_log = np.full(n + 1, np.nan)
    build_log = np.full(n + 1, np.nan)
    trig_log = np.zeros(n + 1, dtype=bool)
    status: list = []
    dense_v = [np.array([x.v])]
    dense_z = [np.array([x.z])]
    trigger_state = None
    trigger_time = -math.inf
    triggers = 0
    infeasible = 0
    for k in range(n):
        v[k], z[k] = x
        if config.method == "etlc":
            stale = t[k] - trigger_time >= p.delta_t - 1e-9
            if trigger_state is None or stale or event_trigger_check(x, trigger_state, p.region):
                trigger_state = x
                trigger_time = t[k]
                triggers += 1
                trig_log[k] = True
        step = acc_step_controller(p, x, config.method, trigger_state)
        diag = step.diagnostics
        u_log[k], d_log[k] = step.u, step.delta
        lhs_log[k] = diag["row_lhs"]
        solve_log[k] = diag["solve_time"]
        build_log[k] = diag["assembly_time"]
        status.append(diag["status"])
        infeasible += int(diag["infeasible"])
        x, dense = integrate_step(p, x, step.u, p.dt, sub, step_index=k)
        dense_v.append(dense[:, 0])
        dense_z.append(dense[:, 1])
    v[n], z[n] = x
    status.append("")
    v_sub = np.concatenate(dense_v)
    z_sub = np.concatenate(dense_z)
    t_sub = np.concatenate([[0.0], (np.arange(n * sub) + 1) * (p.dt / sub)])
    h_sub = z_sub - p.c
    traj = Trajectory(t, v, z, u_log, d_log, z - p.c, lhs_log, status, solve_log, build_log,
                      trig_log, t_sub, v_sub, z_sub, h_sub)
    times = solve_log[:n]
    summary = SimSummary(
        method=config.method,
        delta_t=p.delta_t,
        dt=p.dt,
        min_h=float(np.min(h_sub)),
        mean_solve_time=float(np.mean(times)),
        std_solve_time=float(np.std(times)),
        mean_assembly_time=float(np.mean(build_log[:n])),
        infeasible_steps=infeasible,
        triggers=triggers,
    )
    return traj, summary
