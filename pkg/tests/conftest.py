import numpy as np
import pytest

from cmprelax import solver

# (excess, allowance, method, status) for every solve of the whole run
DUALITY_LOG = []


def _record(cp, res):
    excess, allowance = solver.duality_check(cp, res)
    DUALITY_LOG.append((excess, allowance, getattr(cp, "method", ""), res.status))


@pytest.fixture(autouse=True)
def weak_duality():
    """Every solve made by a test must satisfy weak duality up to its residuals."""
    start = len(DUALITY_LOG)
    solver.OBSERVERS.append(_record)
    try:
        yield
    finally:
        solver.OBSERVERS.remove(_record)
    bad = [r for r in DUALITY_LOG[start:] if r[0] > r[1]]
    assert not bad, f"weak duality violated: {bad[:3]}"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_sym(rng, n, scale=1.0):
    M = rng.normal(scale=scale, size=(n, n))
    return 0.5 * (M + M.T)


def random_psd(rng, n, rank=None):
    F = rng.normal(size=(n, rank or n))
    return F @ F.T


# "PASS/FAIL criterion N: ..." lines, printed again in the terminal summary
ACCEPTANCE = []


def record(number, ok, message):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {message}"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_collection_modifyitems(session, config, items):
    # acceptance criteria last, so the weak-duality criterion sees every solve
    items.sort(key=lambda it: "test_acceptance.py" in it.nodeid)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE and not DUALITY_LOG:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for line in ACCEPTANCE:
        tr.write_line(line)
    bad = sum(e > a for e, a, _, _ in DUALITY_LOG)
    tr.write_line(f"weak duality over the whole run: {len(DUALITY_LOG)} solves, {bad} violations")
