import numpy as np
import pytest

from rtlc.acc import AccParams, acc_model, acc_safety
from rtlc.qp import QpProblem

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def params():
    return AccParams()


@pytest.fixture(scope="session")
def model(params):
    return acc_model(params)


@pytest.fixture(scope="session")
def safety(params):
    return acc_safety(params)


@pytest.fixture
def rng():
    return np.random.default_rng(20251015)


def random_feasible_qp(rng, dim=2, max_rows=3):
    """Random strictly convex QP on a finite box whose rows all hold at an interior point."""
    L = rng.normal(size=(dim, dim))
    quad = L @ L.T + rng.uniform(0.05, 1.0) * np.eye(dim)
    lin = rng.normal(scale=3.0, size=dim)
    lo = -rng.uniform(0.5, 3.0, size=dim)
    hi = rng.uniform(0.5, 3.0, size=dim)
    anchor = lo + rng.uniform(0.2, 0.8, size=dim) * (hi - lo)
    n_rows = int(rng.integers(0, max_rows + 1))
    rows_a = rng.normal(size=(n_rows, dim))
    rows_b = -rows_a @ anchor + rng.uniform(0.0, 0.5, size=n_rows)
    return QpProblem(quad, lin, rows_a, rows_b, lo, hi, const=float(rng.normal()))


@pytest.fixture
def report_criterion():
    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
