import numpy as np
import pytest

from cmprelax.completion import (cbc_complete, cpp_complete_coordinated, ddc_complete, psd_complete_arrowhead,
                                 verify_completion)
from cmprelax.components import (FREE, NONNEG, ConnectedComponents, GroundCones, cmp_generator, gamma,
                                 gamma_inv, gamma_partial, sample_cmp_generator, sample_generator_vectors)
from cmprelax.errors import PreconditionError
from cmprelax.specgraph import PartialMatrix


def test_rank_one_generator_completes_to_outer_product():
    cones = GroundCones.uniform(2, 3, 3)
    x, ys = sample_generator_vectors(cones, 4)
    v = np.concatenate([x, *ys])
    M = psd_complete_arrowhead(cmp_generator(x, ys))
    assert np.allclose(M, np.outer(v, v), atol=1e-10)


def test_identity_x_block(rng):
    Z = tuple(rng.normal(size=(2, 3)) for _ in range(3))
    Y = tuple(z @ z.T + 0.1 * np.eye(2) for z in Z)
    cc = ConnectedComponents(np.eye(3), Z, Y)
    M = psd_complete_arrowhead(cc)
    assert np.allclose(M[3:5, 5:7], Z[0] @ Z[1].T)
    assert verify_completion(gamma_partial(cc), M).ok


def test_zero_component():
    cc = ConnectedComponents.zeros(2, 2, 3)
    assert not np.any(psd_complete_arrowhead(cc))
    assert not np.any(ddc_complete(cc))


def test_non_psd_block_is_rejected():
    cc = ConnectedComponents(np.eye(1), (np.zeros((1, 1)), np.zeros((1, 1))), (np.eye(1), -np.eye(1)))
    with pytest.raises(PreconditionError, match="block 1"):
        psd_complete_arrowhead(cc)


def test_random_psd_blocks_sweep(rng):
    for t in range(100):
        k, m, S = rng.integers(1, 4), rng.integers(1, 4), rng.integers(1, 5)
        F = rng.normal(size=(k + S * m, rng.integers(1, 5)))
        cc = gamma_inv(F @ F.T, k, m, S)
        rep = verify_completion(gamma_partial(cc), psd_complete_arrowhead(cc))
        assert rep.ok, rep.violations


def test_cpp_coordinated(rng):
    cones = GroundCones.uniform(2, 2, 3)
    x, ys = sample_generator_vectors(cones, 11)
    M1 = cpp_complete_coordinated(x[:, None], [y[:, None] for y in ys], cones)
    assert np.allclose(M1, psd_complete_arrowhead(cmp_generator(x, ys)))
    Xbar, Ybars = rng.uniform(size=(2, 2)), [rng.uniform(size=(2, 2)) for _ in range(3)]
    M = cpp_complete_coordinated(Xbar, Ybars, cones)
    assert M.min() >= 0 and np.linalg.eigvalsh(M).min() > -1e-12
    M0 = cpp_complete_coordinated(np.zeros((2, 2)), Ybars, cones)
    assert not np.any(M0[:2])


def test_cpp_cone_violation_named():
    cones = GroundCones(1, 2, FREE, (NONNEG,))
    cpp_complete_coordinated([[-1.0, 1.0]], [[[1.0, 0.0], [0.0, 1.0]]], cones)
    with pytest.raises(PreconditionError, match="column 1 .* coordinate 0"):
        cpp_complete_coordinated([[1.0, 1.0]], [[[1.0, -2.0], [0.0, 1.0]]], cones)


def test_cbc_two_rank_one_blocks():
    z1, z2 = np.array([0.5, 1.0]), np.array([2.0, 0.3])
    M = cbc_complete(1.0, [[np.append(z1, 1.0)], [np.append(z2, 1.0)]])
    assert np.allclose(M[3:5, 1:3], np.outer(z2, z1))
    assert np.allclose(M[1:3, 0], z1) and np.allclose(M[3:5, 0], z2)


def test_cbc_zero_corner_block_diagonal(rng):
    f = [[np.append(rng.uniform(size=2), 0.0) for _ in range(2)] for _ in range(2)]
    M = cbc_complete(0.0, f)
    assert not np.any(M[1:3, 3:5]) and not np.any(M[0])
    with pytest.raises(PreconditionError):
        cbc_complete(0.0, [[np.array([1.0, 1.0, 1.0])]])


def test_cbc_random_rank_two(rng):
    for _ in range(10):
        x0 = rng.uniform(0.5, 2.0)
        facs, blocks = [], []
        for i in range(3):
            F = rng.uniform(size=(3, 2))
            F[2] *= np.sqrt(x0) / np.linalg.norm(F[2])
            facs.append(list(F.T))
            blocks.append(F @ F.T)
        M = cbc_complete(x0, facs)
        assert M.min() >= 0 and np.linalg.eigvalsh(M).min() > -1e-9
        for i, B in enumerate(blocks):
            idx = [1 + 2 * i, 2 + 2 * i, 0]
            assert np.allclose(M[np.ix_(idx, idx)], B, atol=1e-9)


def test_cbc_missing_factorization():
    with pytest.raises(PreconditionError):
        cbc_complete(1.0, [[np.array([1.0, 1.0])], None])


def test_ddc_complete():
    cc = cmp_generator([1.0, 2.0], [np.zeros(2), np.array([0.0, 3.0])])
    assert np.allclose(ddc_complete(cc), gamma(cc))
    back = gamma_inv(ddc_complete(cc), 2, 2, 2)
    assert np.array_equal(back.Y[1], cc.Y[1])
    two = cmp_generator([1.0, 2.0], [np.array([1.0, 0.0]), np.array([0.0, 3.0])])
    with pytest.raises(PreconditionError, match="2 active"):
        ddc_complete(two)


def test_verify_completion_flags_perturbation(rng):
    cc = sample_cmp_generator(GroundCones.uniform(1, 2, 2), 3)
    P = gamma_partial(cc)
    M = psd_complete_arrowhead(cc)
    assert verify_completion(P, M, "dnn").ok
    M[0, 1] += 1e-3
    M[1, 0] += 1e-3
    rep = verify_completion(P, M)
    assert not rep.ok and "specified entry" in rep.violations[0]


def test_verify_completion_dnn_mode():
    P = PartialMatrix(np.eye(2), np.eye(2, dtype=bool))
    M = np.array([[1.0, -0.5], [-0.5, 1.0]])
    assert verify_completion(P, M, "psd").ok
    assert not verify_completion(P, M, "dnn").ok
