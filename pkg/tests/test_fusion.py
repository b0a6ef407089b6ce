import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from torquefusion import fusion
from torquefusion.controllers import LinearController
from torquefusion.errors import ContractError
from torquefusion.fusion import GaussianBelief, TorqueDistribution


def random_spd(rng, n, scale=1.0):
    B = rng.standard_normal((n, n))
    return scale * (B @ B.T + 0.1 * np.eye(n))


def random_dists(rng, n, P):
    return [fusion.precision(GaussianBelief(rng.standard_normal(n), random_spd(rng, n))) for _ in range(P)]


def test_push_forward_identity_and_deterministic_reference():
    ref = GaussianBelief([1.0, 2.0], [[2.0, 0.3], [0.3, 1.0]])
    out = fusion.push_forward(LinearController(np.eye(2), np.zeros(2), "joint"), ref)
    assert np.array_equal(out.mean, ref.mean) and np.allclose(out.cov, ref.cov)
    A = np.random.default_rng(0).standard_normal((3, 2))
    out = fusion.push_forward(LinearController(A, np.ones(3), "joint"), GaussianBelief([1.0, 2.0], np.zeros((2, 2))))
    assert np.array_equal(out.cov, np.zeros((3, 3)))


def test_push_forward_matches_naive_triple_product():
    rng = np.random.default_rng(1)
    A, b = rng.standard_normal((3, 6)), rng.standard_normal(3)
    S = random_spd(rng, 6)
    out = fusion.push_forward(LinearController(A, b, "joint"), GaussianBelief(rng.standard_normal(6), S))
    naive = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            naive[i, j] = sum(A[i, k] * S[k, l] * A[j, l] for k in range(6) for l in range(6))
    assert np.max(np.abs(out.cov - naive)) < 1e-12
    assert np.array_equal(out.cov, out.cov.T)


def test_push_forward_rejects_wrong_reference_dimension():
    with pytest.raises(ContractError):
        fusion.push_forward(LinearController(np.eye(2), np.zeros(2), "joint"), GaussianBelief([0.0], [[1.0]]))


def test_precision_examples():
    d = fusion.precision(GaussianBelief([0.0, 0.0], np.eye(2)), epsilon=1e-14)
    assert np.allclose(d.precision, np.eye(2), atol=1e-12)
    d = fusion.precision(GaussianBelief([0.0, 0.0], np.diag([4.0, 1.0])), epsilon=1e-14)
    assert np.allclose(d.precision, np.diag([0.25, 1.0]), atol=1e-12)
    with pytest.raises(ContractError):
        fusion.precision(GaussianBelief([0.0], [[1.0]]), epsilon=0.0)
    # default epsilon follows the covariance scale
    cov = np.diag([40.0, 20.0])
    assert fusion.precision(GaussianBelief([0, 0], cov)).epsilon == pytest.approx(1e-6 * 30.0)
    assert fusion.default_epsilon(np.diag([0.1, 0.1])) == pytest.approx(1e-6)


def test_rank_deficient_force_covariance_gets_high_null_space_precision():
    rng = np.random.default_rng(2)
    J = rng.standard_normal((2, 3))
    A = -J.T @ np.diag([4.0, 2.0])
    cov = A @ random_spd(rng, 2) @ A.T
    d = fusion.precision(GaussianBelief(np.zeros(3), cov))
    w, V = np.linalg.eigh(d.precision)
    assert w.min() > 0 and np.allclose(d.precision, d.precision.T)
    null = np.linalg.svd(J)[2][-1]
    assert abs(abs(V[:, -1] @ null) - 1.0) < 1e-8
    assert w[-1] == pytest.approx(1.0 / d.epsilon, rel=1e-6)


def test_fuse_examples():
    d = fusion.precision(GaussianBelief([1.0, -2.0, 0.5], np.diag([2.0, 1.0, 0.5])), epsilon=1e-300)
    fused = fusion.fuse([d])
    assert np.allclose(fused.mean, d.mean) and np.allclose(fused.cov, np.linalg.inv(d.precision))
    eye = np.eye(3)
    a = TorqueDistribution(np.array([1.0, 0.0, 0.0]), eye, eye)
    b = TorqueDistribution(np.array([0.0, 1.0, 0.0]), eye, eye)
    fused = fusion.fuse([a, b])
    assert np.allclose(fused.mean, [0.5, 0.5, 0.0]) and np.allclose(fused.cov, 0.5 * eye)
    with pytest.raises(ContractError):
        fusion.fuse([])
    with pytest.raises(ContractError):
        fusion.fuse([a, TorqueDistribution(np.zeros(2), np.eye(2), np.eye(2))])


def test_fuse_matches_numeric_minimizer_and_perturbations():
    rng = np.random.default_rng(3)
    for _ in range(50):
        P = int(rng.integers(2, 5))
        dists = random_dists(rng, 3, P)
        fused = fusion.fuse(dists)
        tau = oracles.weighted_least_squares_minimizer([d.mean for d in dists], [d.precision for d in dists])
        assert np.max(np.abs(fused.mean - tau)) < 1e-8
        assert np.max(np.abs(fused.cov - np.linalg.inv(sum(d.precision for d in dists)))) < 1e-10
        best = fusion.fusion_objective(fused.mean, dists)
        for delta in rng.standard_normal((100, 3)) * 1e-3:
            assert best <= fusion.fusion_objective(fused.mean + delta, dists)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), P=st.integers(1, 4), scale=st.floats(1e-3, 1e3))
def test_fuse_invariants(seed, P, scale):
    rng = np.random.default_rng(seed)
    dists = random_dists(rng, 3, P)
    fused = fusion.fuse(dists)
    # fused covariance is dominated by every input covariance
    for d in dists:
        assert np.linalg.eigvalsh(np.linalg.inv(d.precision) - fused.cov).min() >= -1e-9
    # a common precision scale leaves the mean and inversely scales the covariance
    scaled = fusion.fuse([TorqueDistribution(d.mean, d.cov, scale * d.precision) for d in dists])
    assert np.allclose(scaled.mean, fused.mean, atol=1e-10 * max(1, np.abs(fused.mean).max()))
    assert np.allclose(scaled.cov, fused.cov / scale, rtol=1e-8, atol=1e-12)
    # order does not matter
    perm = fusion.fuse(dists[::-1])
    assert np.allclose(perm.mean, fused.mean, atol=1e-12) and np.allclose(perm.cov, fused.cov, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), d=st.integers(1, 6))
def test_push_forward_covariance_is_psd(seed, d):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((3, d))
    B = rng.standard_normal((d, max(1, d - 1)))
    out = fusion.push_forward(LinearController(A, np.zeros(3), "joint"), GaussianBelief(np.zeros(d), B @ B.T))
    assert out.is_valid(tol=1e-9)


def test_task_torque_zero_error_and_dominance_limit():
    rng = np.random.default_rng(4)
    n = 3
    A = np.hstack([np.diag([30.0, 20.0, 10.0]), np.diag([5.0, 4.0, 3.0])])
    q, qdot = rng.standard_normal(n), rng.standard_normal(n)
    ctrl = LinearController(A, -A @ np.concatenate([q, qdot]), "joint")
    ref = GaussianBelief(np.concatenate([q, qdot]), 0.1 * np.eye(2 * n))
    assert np.allclose(fusion.task_torque([(ctrl, ref)]).tau, 0.0, atol=1e-12)
    other = LinearController(rng.standard_normal((n, 2 * n)), rng.standard_normal(n), "joint")
    other_ref = GaussianBelief(rng.standard_normal(2 * n), random_spd(rng, 2 * n))
    target = ctrl.A @ np.ones(2 * n) + ctrl.b
    gaps = []
    for sigma2 in (1e-2, 1e-4, 1e-6):
        result = fusion.task_torque([(ctrl, GaussianBelief(np.ones(2 * n), sigma2 * np.eye(2 * n))),
                                     (other, other_ref)], epsilon=1e-12)
        gaps.append(np.linalg.norm(result.tau - target))
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 1e-3 * gaps[0]


def test_task_torque_matches_manual_composition():
    rng = np.random.default_rng(5)
    pairs = [(LinearController(rng.standard_normal((3, 4)), rng.standard_normal(3), "joint"),
              GaussianBelief(rng.standard_normal(4), random_spd(rng, 4))) for _ in range(3)]
    result = fusion.task_torque(pairs, epsilon_scale=1e-6)
    means, gammas = [], []
    for ctrl, ref in pairs:
        cov = ctrl.A @ ref.cov @ ctrl.A.T
        means.append(ctrl.A @ ref.mean + ctrl.b)
        gammas.append(oracles.regularized_precision(cov, 1e-6 * max(np.trace(cov) / 3, 1.0)))
    expected = np.linalg.solve(sum(gammas), sum(G @ m for G, m in zip(gammas, means)))
    assert np.allclose(result.tau, expected, atol=1e-9)
    with pytest.raises(ContractError):
        fusion.task_torque([])
