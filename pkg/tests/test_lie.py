import dataclasses

import numpy as np
import pytest

from rtlc.acc import AccParams, acc_lie_jet, acc_safety
from rtlc.lie import (
    ControlBounds,
    DynamicsModel,
    LieEvaluationError,
    LieJet,
    SafetyFunction,
    StateBox,
    eval_lie_jet,
    fd_lie_derivative,
    fd_mixed_terms,
    validate_oracle,
)

# exact rational arithmetic at the default parameters
JET_24_90 = (80.0, -10.11, 0.16006060606060607)
LGH_24 = -0.0006060606060606061
LF3_24 = -0.00164910927456382
LGLF2_24 = 6.244260789715335e-06


def _grid(n_v=10, n_z=10):
    return [np.array([v, z]) for v in np.linspace(5, 30, n_v) for z in np.linspace(5, 120, n_z)]


def test_acc_jet_example(model, safety):
    jet = eval_lie_jet(model, safety, [24.0, 90.0])
    assert jet.m == 2
    np.testing.assert_allclose(jet.h_vals, JET_24_90, rtol=1e-14)
    assert jet.lgh_m1[0] == pytest.approx(LGH_24, rel=1e-14)
    assert jet.h_m1 == pytest.approx(LF3_24, rel=1e-12)
    assert jet.lgh_m[0] == pytest.approx(LGLF2_24, rel=1e-12)


def test_matched_speed_annihilates_first_derivative(params, model, safety):
    jet = eval_lie_jet(model, safety, [params.v0, 10.0 + params.c])
    assert jet.h_vals[1] == 0.0


def test_zero_of_h_has_zero_value():
    lin = DynamicsModel(1, 1, lambda x: -x, lambda x: np.ones((1, 1)))
    safety = SafetyFunction(1, lambda x: float(x[0]) - 2.0,
                            lambda x: LieJet((float(x[0]) - 2.0, -float(x[0])), [1.0]))
    assert eval_lie_jet(lin, safety, [2.0]).h_vals[0] == 0.0


def test_fd_examples(model, safety):
    x = np.array([24.0, 90.0])
    assert fd_lie_derivative(model, safety, x, 0) == 80.0
    assert fd_lie_derivative(model, safety, x, 1) == pytest.approx(-10.11, abs=1e-4)
    assert fd_lie_derivative(model, safety, x, 2) == pytest.approx(JET_24_90[2], abs=1e-3)


def test_fd_third_order(model, safety):
    est = fd_lie_derivative(model, safety, [24.0, 90.0], 3)
    assert est == pytest.approx(LF3_24, rel=1e-2)


def test_fd_order_out_of_range(model, safety):
    with pytest.raises(ValueError):
        fd_lie_derivative(model, safety, [24.0, 90.0], 4)


def test_validate_oracle_passes_on_grid(model, safety):
    report = validate_oracle(model, safety, _grid(), tol=1e-3)
    assert report.passed, str(report)
    assert set(report.max_error) >= {"h_vals[0]", "h_vals[1]", "h_vals[2]", "lgh_m1", "h_m1", "lgh_m"}


def test_validate_oracle_zero_tolerance_fails():
    # exact closed forms on a linear system still show finite-difference error
    a = np.array([[0.0, 1.0], [-2.0, -0.3]])
    lin = DynamicsModel(2, 1, lambda x: a @ x, lambda x: np.array([[0.0], [1.0]]))

    def oracle(x):
        return LieJet((float(x[0]), float(x[1]), float(a[1] @ x)), [1.0])

    safety = SafetyFunction(2, lambda x: float(x[0]), oracle)
    samples = [np.array([0.3, -1.7]), np.array([1.1, 2.9])]
    assert validate_oracle(lin, safety, samples, tol=1e-6).passed
    assert not validate_oracle(lin, safety, samples, tol=0.0).passed


def test_corrupted_oracle_reports_twice_first_derivative(params, model):
    good = acc_safety(params)

    def flipped(x):
        jet = acc_lie_jet(params, x)
        h0, h1, h2 = jet.h_vals
        return dataclasses.replace(jet, h_vals=(h0, -h1, h2))

    bad = SafetyFunction(2, good.h, flipped)
    x = np.array([24.0, 90.0])
    report = validate_oracle(model, bad, [x], tol=1e-3, include_mixed=False)
    assert not report.passed
    assert report.max_error["h_vals[1]"] == pytest.approx(2 * 10.11, rel=1e-6)


def test_validate_oracle_rejects_empty(model, safety):
    with pytest.raises(ValueError):
        validate_oracle(model, safety, [], tol=1e-3)


def test_relative_degree_structure(model, safety):
    # h does not see u directly: derivative of h along g vanishes
    for x in _grid(4, 4):
        col = model.actuation(x)[:, 0]
        s = 1e-3
        d = (safety.h(x + s * col) - safety.h(x - s * col)) / (2 * s)
        assert abs(d) <= 1e-9
        assert eval_lie_jet(model, safety, x).lgh_m1[0] != 0.0


def test_mixed_terms_match_closed_form(model, safety):
    x = np.array([18.0, 40.0])
    fd = fd_mixed_terms(model, safety, x)
    jet = acc_lie_jet(AccParams(), x)
    assert fd["lgh_m1"][0] == pytest.approx(jet.lgh_m1[0], rel=1e-6)
    assert fd["h_m1"] == pytest.approx(jet.h_m1, rel=1e-5)
    assert fd["lflg"][0] == pytest.approx(0.0, abs=1e-12)
    assert fd["lg2"][0] == pytest.approx(0.0, abs=1e-12)


def test_determinism(model, safety):
    a = eval_lie_jet(model, safety, [17.3, 55.1])
    b = eval_lie_jet(model, safety, [17.3, 55.1])
    assert a.h_vals == b.h_vals
    assert a.lgh_m1.tobytes() == b.lgh_m1.tobytes()
    assert a.h_m1 == b.h_m1


def test_non_finite_state_raises(model, safety):
    with pytest.raises(LieEvaluationError):
        eval_lie_jet(model, safety, [np.nan, 3.0])


def test_non_finite_term_is_named(model):
    safety = SafetyFunction(2, lambda x: float(x[1]),
                            lambda x: LieJet((float(x[1]), np.inf, 0.0), [1.0]))
    with pytest.raises(LieEvaluationError, match="h_vals\\[1\\]"):
        eval_lie_jet(model, safety, [1.0, 2.0])


def test_oracle_must_match_h(model):
    safety = SafetyFunction(2, lambda x: float(x[1]),
                            lambda x: LieJet((float(x[1]) + 1.0, 0.0, 0.0), [1.0]))
    with pytest.raises(ValueError):
        eval_lie_jet(model, safety, [1.0, 2.0])


def test_shape_checks(model, safety):
    with pytest.raises(ValueError):
        eval_lie_jet(model, safety, [1.0, 2.0, 3.0])
    bad = DynamicsModel(2, 1, model.f, lambda x: np.ones((2, 2)))
    with pytest.raises(ValueError):
        bad.actuation([1.0, 2.0])


def test_box_and_bounds_validation():
    with pytest.raises(ValueError):
        StateBox([1.0], [0.0])
    with pytest.raises(ValueError):
        ControlBounds([1.0], [0.0])
    assert StateBox([0.0, 0.0], [1.0, 1.0]).contains([0.5, 1.0])
    assert not ControlBounds([-1.0], [1.0]).contains([1.5])
    with pytest.raises(ValueError):
        SafetyFunction(0, lambda x: 0.0, lambda x: None)
