import numpy as np
import pytest

from cmprelax.errors import InputError
from cmprelax.linalg import min_eigenvalue, svec
from cmprelax.model import CandidateSolution, make_instance
from cmprelax.relax import ConeTag, ConicProgram, build, lift
from cmprelax.solver import (OPTIMAL, SUSPECTED_INFEASIBLE, SUSPECTED_UNBOUNDED, SolveSettings, duality_check,
                             residuals, solve)

from conftest import random_sym


def lp(c, A, b, kind="nonneg"):
    c = np.asarray(c, float)
    return ConicProgram(c, np.atleast_2d(np.asarray(A, float)), np.asarray(b, float), [ConeTag(kind, c.size)])


def min_eig_program(C):
    n = C.shape[0]
    return ConicProgram(svec(C), svec(np.eye(n))[None, :], np.array([1.0]), [ConeTag("psd", n)])


def test_trivial_lp():
    cp = lp([1.0], [[1.0]], [1.0])
    res = solve(cp)
    assert res.status == OPTIMAL and np.isclose(res.objective, 1.0, atol=1e-7)
    rp, rd, gap = residuals(cp, res.x, res.y)
    assert max(rp, rd, gap) <= 1e-7
    assert residuals(cp, res.x + 0.1)[0] > 1e-3


def test_trace_with_fixed_corner():
    E = np.zeros((2, 2))
    E[0, 0] = 1.0
    cp = ConicProgram(svec(np.eye(2)), svec(E)[None, :], np.array([1.0]), [ConeTag("psd", 2)])
    res = solve(cp)
    assert res.optimal and np.isclose(res.objective, 1.0, atol=1e-6)
    assert np.allclose(res.x, svec(E), atol=1e-5)


def test_min_eigenvalue_sdp(rng):
    for n in (2, 5, 8):
        C = random_sym(rng, n)
        res = solve(min_eig_program(C))
        lam = min_eigenvalue(C)
        assert res.optimal
        assert abs(res.objective - lam) <= 1e-5 * max(1.0, abs(lam))


def test_masked_psd_block():
    # min X12 over DNN(2) with trace 1: the mask keeps X12 >= 0, optimum 0
    mask = np.array([[False, True], [True, False]])
    C = np.array([[0.0, 0.5], [0.5, 0.0]])
    cp = ConicProgram(svec(C), svec(np.eye(2))[None, :], np.array([1.0]), [ConeTag("psd", 2, mask)])
    res = solve(cp)
    assert res.optimal and abs(res.objective) <= 1e-6
    free = solve(min_eig_program(C))
    assert np.isclose(free.objective, -0.5, atol=1e-6)


def test_infeasible_detected():
    res = solve(lp([1.0], [[1.0]], [-1.0]))
    assert res.status == SUSPECTED_INFEASIBLE


def test_unbounded_detected():
    res = solve(lp([-1.0, 0.0], [[1.0, -1.0]], [0.0]))
    assert res.status == SUSPECTED_UNBOUNDED
    assert res.ray is not None and res.ray @ np.array([-1.0, 0.0]) < 0


def test_settings_validation():
    with pytest.raises(InputError):
        SolveSettings(eps_primal=0.0)
    with pytest.raises(InputError):
        SolveSettings(alpha=2.5)
    with pytest.raises(InputError):
        SolveSettings(max_iterations=0)


def test_max_iterations_status():
    C = np.diag([1.0, 2.0, 3.0]) + 0.3
    res = solve(min_eig_program(C), SolveSettings(max_iterations=3, check_every=1))
    assert res.status == "MaxIterations" and res.iterations == 3


def test_random_feasible_lift_has_small_residual(rng):
    inst = make_instance("F1", 2, 2, 3, 3, 1)
    cp = build(inst, "cpi")
    x = rng.dirichlet(np.ones(2)) * 0.4
    cand = CandidateSolution(x, tuple(rng.dirichlet(np.ones(3)) * (1 - x.sum()) for _ in range(3)))
    assert residuals(cp, lift(cp, inst, cand))[0] <= 1e-9


def test_weak_duality_on_relaxations():
    for fam, n1, S in (("F1", 2, 3), ("F2", 3, 3), ("F3", 2, 2)):
        inst = make_instance(fam, 2, n1, 3, S, 0)
        for m in ("cpi", "full_dnn"):
            cp = build(inst, m)
            res = solve(cp, SolveSettings(max_iterations=5000))
            excess, allowance = duality_check(cp, res)
            assert excess <= allowance


def test_scaling_toggle_agrees(rng):
    C = random_sym(rng, 4)
    a = solve(min_eig_program(C), SolveSettings(scaling=True))
    b = solve(min_eig_program(C), SolveSettings(scaling=False))
    assert abs(a.objective - b.objective) <= 1e-5
