"""Control-affine models, safety functions and their Lie-derivative jets.

Lie derivatives are supplied per model as closed-form oracles. The
finite-difference routines here exist only to cross-validate those oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


class LieEvaluationError(ArithmeticError):
    """A Lie-derivative term (or finite-difference intermediate) was not finite."""


@dataclass(frozen=True)
class DynamicsModel:
    """``xdot = f(x) + g(x) u`` with ``n`` states and ``q`` controls."""

    n: int
    q: int
    f: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]

    def drift(self, x) -> np.ndarray:
        return np.asarray(self.f(np.asarray(x, dtype=float)), dtype=float).reshape(self.n)

    def actuation(self, x) -> np.ndarray:
        gx = np.asarray(self.g(np.asarray(x, dtype=float)), dtype=float)
        if gx.shape != (self.n, self.q):
            raise ValueError(f"g(x) has shape {gx.shape}, expected {(self.n, self.q)}")
        return gx


@dataclass(frozen=True)
class StateBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape:
            raise ValueError("lower and upper must have the same shape")
        if np.any(lo > hi):
            raise ValueError("empty box: lower > upper in some component")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))


@dataclass(frozen=True)
class ControlBounds:
    u_min: np.ndarray
    u_max: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.u_min, dtype=float))
        hi = np.atleast_1d(np.asarray(self.u_max, dtype=float))
        if lo.shape != hi.shape:
            raise ValueError("u_min and u_max must have the same shape")
        if np.any(lo > hi):
            raise ValueError("u_min must not exceed u_max")
        object.__setattr__(self, "u_min", lo)
        object.__setattr__(self, "u_max", hi)

    def contains(self, u, tol: float = 0.0) -> bool:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return bool(np.all(u >= self.u_min - tol) and np.all(u <= self.u_max + tol))


@dataclass(frozen=True)
class LieJet:
    """Lie-derivative values of a relative-degree-``m`` function at one state.

    ``h_vals[k]`` is ``L_f^k h`` for ``k = 0..m``; ``lgh_m1`` is
    ``L_g L_f^{m-1} h``. The order-``m+1`` terms (``h_m1``, ``lgh_m``,
    ``lflg``, ``lg2``) may be ``None`` for jets that never feed a remainder
    (e.g. the Lyapunov-like function of the stability row).
    """

    h_vals: tuple
    lgh_m1: np.ndarray
    h_m1: Optional[float] = None
    lgh_m: Optional[np.ndarray] = None
    lflg: Optional[np.ndarray] = None
    lg2: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "h_vals", tuple(float(v) for v in self.h_vals))
        object.__setattr__(self, "lgh_m1", np.atleast_1d(np.asarray(self.lgh_m1, dtype=float)))
        if self.h_m1 is not None:
            object.__setattr__(self, "h_m1", float(self.h_m1))
        for name in ("lgh_m", "lflg", "lg2"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, np.atleast_1d(np.asarray(val, dtype=float)))

    @property
    def m(self) -> int:
        return len(self.h_vals) - 1

    @property
    def has_remainder_terms(self) -> bool:
        return None not in (self.h_m1, self.lgh_m, self.lflg, self.lg2)

    def terms(self):
        """Yield ``(name, value)`` pairs for every populated field."""
        for k, v in enumerate(self.h_vals):
            yield f"h_vals[{k}]", v
        yield "lgh_m1", self.lgh_m1
        for name in ("h_m1", "lgh_m", "lflg", "lg2"):
            val = getattr(self, name)
            if val is not None:
                yield name, val


@dataclass(frozen=True)
class SafetyFunction:
    """Safety function ``h`` of relative degree ``m`` with its closed-form jet."""

    m: int
    h: Callable[[np.ndarray], float]
    oracle: Callable[[np.ndarray], LieJet]

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("relative degree must be a positive integer")


def eval_lie_jet(model: DynamicsModel, safety: SafetyFunction, x) -> LieJet:
    """Evaluate the oracle jet at ``x`` and check it term by term.

    Raises
    ------
    LieEvaluationError
        If ``x`` or any jet entry is non-finite; the message names the term.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n,):
        raise ValueError(f"state has shape {x.shape}, expected ({model.n},)")
    if not np.all(np.isfinite(x)):
        raise LieEvaluationError(f"non-finite state {x}")
    jet = safety.oracle(x)
    if jet.m != safety.m:
        raise ValueError(f"oracle returned order {jet.m} jet for relative degree {safety.m}")
    if jet.lgh_m1.shape != (model.q,):
        raise ValueError(f"lgh_m1 has shape {jet.lgh_m1.shape}, expected ({model.q},)")
    for name, val in jet.terms():
        if not np.all(np.isfinite(val)):
            raise LieEvaluationError(f"non-finite Lie term {name} = {val} at x = {x}")
    if jet.h_vals[0] != float(safety.h(x)):
        raise ValueError("oracle h_vals[0] disagrees with h(x)")
    return jet


def default_steps(x, rel_step: float = 1e-5) -> np.ndarray:
    """Per-component step ``rel_step * max(1, |x_i|)``."""
    return rel_step * np.maximum(1.0, np.abs(np.asarray(x, dtype=float)))


def _directional(fun, x, direction, steps):
    """Central difference of ``fun`` along ``direction`` (per unit flow time)."""
    dmax = np.abs(direction)
    if not np.any(dmax > 0):
        return 0.0
    with np.errstate(divide="ignore"):
        s = float(np.min(np.where(dmax > 0, steps / dmax, np.inf)))
    if not (s > 0 and math.isfinite(s)) or s < 1e-300:
        raise LieEvaluationError(f"finite-difference step underflow at x = {x}")
    hi = fun(x + s * direction)
    lo = fun(x - s * direction)
    out = (hi - lo) / (2.0 * s)
    if not np.all(np.isfinite(out)):
        raise LieEvaluationError(f"non-finite finite-difference intermediate at x = {x}")
    return out


def fd_lie_derivative(
    model: DynamicsModel,
    safety: SafetyFunction,
    x,
    k: int,
    rel_step: Optional[float] = None,
) -> float:
    """Finite-difference estimate of ``L_f^k h(x)``.

    The order-``k`` value is the central difference of the order-``k-1``
    estimate along ``f``. ``rel_step`` defaults to ``1e-5`` for ``k <= 2``;
    deeper recursions default to ``eps**(1/(k+2))`` so rounding does not swamp
    the estimate.
    """
    if k < 0 or k > safety.m + 1:
        raise ValueError(f"order {k} outside 0..{safety.m + 1}")
    x = np.asarray(x, dtype=float)
    if k == 0:
        return float(safety.h(x))
    if rel_step is None:
        rel_step = 1e-5 if k <= 2 else np.finfo(float).eps ** (1.0 / (k + 2))
    steps = default_steps(x, rel_step)

    def order(j):
        if j == 0:
            return lambda y: float(safety.h(y))
        inner = order(j - 1)
        return lambda y: _directional(inner, y, model.drift(y), steps)

    return float(order(k)(x))


def fd_mixed_terms(model: DynamicsModel, safety: SafetyFunction, x, rel_step: float = 1e-5) -> dict:
    """One-level finite differences of the oracle's own lower-order fields.

    Returns estimates of ``lgh_m1``, ``h_m1``, ``lgh_m``, ``lflg`` and ``lg2``
    obtained by differencing ``h_vals[m-1]``, ``h_vals[m]`` and ``lgh_m1``
    along ``f`` and the columns of ``g``.
    """
    x = np.asarray(x, dtype=float)
    m = safety.m
    steps = default_steps(x, rel_step)
    gx = model.actuation(x)
    fx = model.drift(x)

    def field(name, idx=None):
        def fun(y):
            jet = safety.oracle(y)
            val = getattr(jet, name)
            return val[idx] if idx is not None else val
        return fun

    h_m1_f = field("h_vals", m - 1)
    h_m_f = field("h_vals", m)
    lg_f = field("lgh_m1")
    cols = [gx[:, j] for j in range(model.q)]
    out = {
        "lgh_m1": np.array([_directional(h_m1_f, x, c, steps) for c in cols]),
        "h_m1": float(_directional(h_m_f, x, fx, steps)),
        "lgh_m": np.array([_directional(h_m_f, x, c, steps) for c in cols]),
        "lflg": np.atleast_1d(_directional(lg_f, x, fx, steps)),
        # lg2 pairs control component j with column j of g
        "lg2": np.array([np.atleast_1d(_directional(lg_f, x, c, steps))[j] for j, c in enumerate(cols)]),
    }
    return out


@dataclass
class OracleReport:
    """Max absolute oracle-vs-FD discrepancy per term, with the verdict."""

    tol: float
    max_error: dict = field(default_factory=dict)
    worst_state: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(err <= self.tol for err in self.max_error.values())

    def __str__(self):
        lines = [f"oracle validation (tol={self.tol:g}): {'PASS' if self.passed else 'FAIL'}"]
        for name, err in self.max_error.items():
            lines.append(f"  {name:<10s} max |err| = {err:.3e}")
        return "\n".join(lines)


def validate_oracle(
    model: DynamicsModel,
    safety: SafetyFunction,
    samples: Sequence,
    tol: float,
    include_mixed: bool = True,
) -> OracleReport:
    """Compare the oracle against finite differences on ``samples``.

    Orders ``0..m`` use the recursive estimate from ``h``; the order-``m+1``
    and mixed terms (when the oracle provides them) are checked by
    differencing the oracle's lower-order fields. Failures are reported,
    never raised.
    """
    if len(samples) == 0:
        raise ValueError("validate_oracle needs at least one sample state")
    report = OracleReport(tol=tol)
    m = safety.m

    def record(name, err, x):
        if err > report.max_error.get(name, -1.0):
            report.max_error[name] = err
            report.worst_state[name] = np.asarray(x, dtype=float)

    for x in samples:
        jet = safety.oracle(np.asarray(x, dtype=float))
        for k in range(m + 1):
            record(f"h_vals[{k}]", abs(jet.h_vals[k] - fd_lie_derivative(model, safety, x, k)), x)
        if not include_mixed:
            continue
        fd = fd_mixed_terms(model, safety, x)
        record("lgh_m1", float(np.max(np.abs(jet.lgh_m1 - fd["lgh_m1"]))), x)
        if jet.has_remainder_terms:
            record("h_m1", abs(jet.h_m1 - fd["h_m1"]), x)
            for name in ("lgh_m", "lflg", "lg2"):
                record(name, float(np.max(np.abs(getattr(jet, name) - fd[name]))), x)
    return report
