import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from cmprelax.errors import InputError
from cmprelax.linalg import (SymMat, frobenius, min_eigenvalue, project_psd, pseudo_inverse, smat, svec,
                             sym_eig, trust_region_sphere)

from conftest import random_psd, random_sym


def sym_matrices(max_order=6):
    def build(n):
        return arrays(np.float64, (n, n), elements=st.floats(-10, 10, allow_nan=False)).map(
            lambda M: 0.5 * (M + M.T))
    return st.integers(1, max_order).flatmap(build)


@given(sym_matrices())
def test_svec_roundtrip_and_inner_product(M):
    assert np.allclose(smat(svec(M)), M)
    assert np.isclose(svec(M) @ svec(M), np.sum(M * M))


def test_symmat_frobenius_uses_scaled_storage(rng):
    A, B = random_sym(rng, 5), random_sym(rng, 5)
    assert np.isclose(frobenius(SymMat.from_dense(A), SymMat.from_dense(B)), np.trace(A @ B))
    with pytest.raises(InputError):
        SymMat(3, np.zeros(5))


def test_sym_eig_diagonal():
    eig = sym_eig(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(eig.eigenvalues, [3, 2, 1])
    assert np.allclose(np.abs(eig.eigenvectors), np.eye(3)[:, [0, 2, 1]])


def test_sym_eig_identity():
    assert np.allclose(sym_eig(np.eye(4)).eigenvalues, 1.0)


def test_sym_eig_reconstructs_random(rng):
    for _ in range(5):
        M = random_sym(rng, 8)
        eig = sym_eig(M)
        assert np.allclose(eig.reconstruct(), M, atol=1e-9)
        assert np.allclose(eig.eigenvectors.T @ eig.eigenvectors, np.eye(8), atol=1e-10)
        assert np.all(np.diff(eig.eigenvalues) <= 0)


@settings(max_examples=40, deadline=None)
@given(sym_matrices(7))
def test_sym_eig_matches_lapack(M):
    assert np.allclose(sym_eig(M).eigenvalues, np.linalg.eigvalsh(M)[::-1], atol=1e-9 * max(1, np.abs(M).max()))


def test_sym_eig_rejects_nonfinite():
    with pytest.raises(InputError):
        sym_eig(np.array([[1.0, np.nan], [np.nan, 0.0]]))
    with pytest.raises(InputError):
        sym_eig(np.ones((2, 3)))


def test_project_psd_examples(rng):
    P = random_psd(rng, 4)
    assert np.allclose(project_psd(P), P, atol=1e-10)
    assert np.allclose(project_psd(np.diag([1.0, -1.0])), np.diag([1.0, 0.0]))


def test_project_psd_nearest_point(rng):
    M = random_sym(rng, 5)
    out = project_psd(M)
    assert min_eigenvalue(out) >= -1e-10
    d = np.linalg.norm(out - M)
    for _ in range(100):
        assert d <= np.linalg.norm(random_psd(rng, 5, rank=rng.integers(1, 6)) * rng.uniform(0, 1) - M) + 1e-12


def test_pseudo_inverse(rng):
    assert np.allclose(pseudo_inverse(np.eye(3)), np.eye(3))
    assert np.allclose(pseudo_inverse(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))
    M = random_psd(rng, 6, rank=3)
    assert np.allclose(M @ pseudo_inverse(M) @ M, M, atol=1e-8)


def test_trust_region_examples():
    y, val = trust_region_sphere(np.diag([1.0, 2.0]), np.zeros(2))
    assert np.isclose(val, 1.0) and np.allclose(np.abs(y), [1, 0])
    y, val = trust_region_sphere(np.eye(2), np.array([-2.0, 0.0]))
    assert np.isclose(val, -1.0) and np.allclose(y, [1, 0])


def _grid_min(C, b, n=100):
    # sphere grid in 3d, then a few projected gradient steps from the best points
    th, ph = np.meshgrid(np.linspace(0, np.pi, n), np.linspace(0, 2 * np.pi, n))
    Y = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], -1).reshape(-1, 3)
    vals = np.einsum("ij,jk,ik->i", Y, C, Y) + Y @ b
    best = np.inf
    for y in Y[np.argsort(vals)[:5]]:
        for _ in range(500):
            y = y - 0.05 * (2 * C @ y + b)
            y /= np.linalg.norm(y)
        best = min(best, y @ C @ y + b @ y)
    return best


def test_trust_region_matches_grid(rng):
    for _ in range(5):
        C, b = random_sym(rng, 3), rng.normal(size=3)
        y, val = trust_region_sphere(C, b)
        assert np.isclose(np.linalg.norm(y), 1.0)
        assert np.isclose(val, y @ C @ y + b @ y)
        assert abs(val - _grid_min(C, b)) <= 1e-4


def test_trust_region_hard_case():
    # b orthogonal to the bottom eigenvector: the solution tilts into it
    C = np.diag([-1.0, 1.0])
    b = np.array([0.0, 1.0])
    y, val = trust_region_sphere(C, b)
    # -cos^2 + sin^2 + sin is smallest at sin = -1/4
    assert np.isclose(val, -1.125, atol=1e-12)
    assert np.isclose(y[1], -0.25) and np.isclose(np.linalg.norm(y), 1.0)
    ts = np.linspace(0, 2 * np.pi, 20001)
    grid = min(C[0, 0] * np.cos(t) ** 2 + C[1, 1] * np.sin(t) ** 2 + np.sin(t) for t in ts)
    assert abs(val - grid) < 1e-6


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_trust_region_beats_random_points(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(1, 6))
    C, b = random_sym(r, n), r.normal(size=n)
    _, val = trust_region_sphere(C, b)
    Y = r.normal(size=(200, n))
    Y /= np.linalg.norm(Y, axis=1, keepdims=True)
    assert val <= np.min(np.einsum("ij,jk,ik->i", Y, C, Y) + Y @ b) + 1e-9


def test_trust_region_one_dimensional():
    # the bracket end sits exactly on the root here
    y, val = trust_region_sphere(np.array([[-0.45837528]]), np.array([-1.31408536]))
    assert np.allclose(y, [1.0]) and np.isclose(val, -0.45837528 - 1.31408536)
