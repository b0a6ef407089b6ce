import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from torquefusion import gmm
from torquefusion.errors import ContractError, DegenerateComponentError


def two_blobs(rng, T=2000, sep=5.0):
    n = T // 2
    a = rng.standard_normal((n, 2)) + [0.0, 0.0]
    b = rng.standard_normal((T - n, 2)) + [sep, 0.0]
    return np.vstack([a, b])


def random_mixture(rng, K=3):
    priors = rng.dirichlet(np.ones(K) * 3)
    means = rng.uniform(-2, 2, (K, 2))
    covs = []
    for _ in range(K):
        B = rng.standard_normal((2, 2)) * 0.5
        covs.append(B @ B.T + 0.05 * np.eye(2))
    return gmm.Gmm(priors, means, np.array(covs), input_dims=(0,))


def test_kmeans_single_cluster_is_sample_statistics():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((300, 3))
    model = gmm.kmeans_init(X, 1, seed=1, reg=1e-6)
    assert np.allclose(model.means[0], X.mean(axis=0))
    assert np.allclose(model.covs[0], np.cov(X.T, bias=True) + 1e-6 * np.eye(3))


def test_kmeans_separates_blobs_and_is_deterministic():
    X = two_blobs(np.random.default_rng(1), T=600, sep=8.0)
    a = gmm.kmeans_init(X, 2, seed=3)
    b = gmm.kmeans_init(X, 2, seed=3)
    assert np.array_equal(a.means, b.means) and np.array_equal(a.covs, b.covs)
    centers = sorted(a.means.tolist())
    assert np.allclose(centers[0], [0, 0], atol=0.15) and np.allclose(centers[1], [8, 0], atol=0.15)
    with pytest.raises(ContractError):
        gmm.kmeans_init(X[:3], 4)


def test_em_single_component_is_a_fixed_point():
    X = np.random.default_rng(2).standard_normal((500, 2)) @ [[1.0, 0.3], [0.0, 0.5]]
    model, trace = gmm.em_fit(X, 1, seed=0)
    assert np.allclose(model.means[0], X.mean(axis=0), atol=1e-12)
    assert np.allclose(model.covs[0], np.cov(X.T, bias=True) + 1e-6 * np.eye(2), atol=1e-12)
    assert len(trace) <= 3


def test_em_recovers_two_component_mixture():
    rng = np.random.default_rng(3)
    X = two_blobs(rng, T=2000, sep=5.0)
    model, _ = gmm.em_fit(X, 2, seed=0)
    order = np.argsort(model.means[:, 0])
    means, covs, priors = model.means[order], model.covs[order], model.priors[order]
    assert np.allclose(priors, [0.5, 0.5], atol=0.025)
    assert np.allclose(means[1], [5.0, 0.0], atol=0.25) and np.allclose(means[0], [0.0, 0.0], atol=0.25)
    for c in covs:
        assert np.allclose(np.diag(c), [1.0, 1.0], rtol=0.1)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), K=st.integers(1, 4))
def test_exact_em_never_decreases_the_likelihood(seed, K):
    # with negligible regularization every M-step is the exact maximizer, so EM is an ascent method
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((120, 2)) * [1.0, 0.5] + rng.integers(0, 3, (120, 1)) * [2.0, 1.0]
    _, trace = gmm.em_fit(X, K, seed=seed, reg=1e-12, tol=1e-12, max_iter=60)
    assert np.min(np.diff(trace), initial=0.0) >= -1e-9


def test_em_collapse_names_the_component(monkeypatch):
    X = np.random.default_rng(7).standard_normal((100, 2))
    # seed a second component far from every sample so its responsibilities underflow
    stranded = gmm.Gmm([0.5, 0.5], [[0.0, 0.0], [1e3, 1e3]], np.array([np.eye(2)] * 2))
    monkeypatch.setattr(gmm, "kmeans_init", lambda *a, **k: stranded)
    with pytest.raises(DegenerateComponentError) as info:
        gmm.em_fit(X, 2)
    assert info.value.component == 1 and "component 1" in str(info.value)


def test_gmr_single_component_is_exact_conditioning():
    rng = np.random.default_rng(4)
    B = rng.standard_normal((4, 4))
    mean, cov = rng.standard_normal(4), B @ B.T + 0.1 * np.eye(4)
    model = gmm.Gmm([1.0], [mean], [cov], input_dims=(0, 2))
    for _ in range(10):
        x = rng.standard_normal(2)
        out = gmm.gmr_condition(model, x)
        mu, S = oracles.condition_gaussian(mean, cov, [0, 2], [1, 3], x)
        assert np.max(np.abs(out.mean - mu)) < 1e-12 and np.max(np.abs(out.cov - S)) < 1e-12


def test_gmr_matches_grid_integration():
    rng = np.random.default_rng(5)
    grid = np.linspace(-12, 12, 40001)
    for _ in range(5):
        model = random_mixture(rng)
        for x in rng.uniform(-2, 2, 5):
            out = gmm.gmr_condition(model, [x])
            mean, var = oracles.gmr_grid(model.priors, model.means, model.covs, x, grid)
            assert abs(out.mean[0] - mean) < 1e-3 and abs(out.cov[0, 0] - var) < 1e-3


def test_gmr_dominant_component():
    covs = np.array([np.eye(2), np.eye(2)])
    model = gmm.Gmm([0.5, 0.5], [[0.0, 1.0], [10.0, -1.0]], covs, input_dims=(0,))
    h = gmm.responsibilities(model, [0.0])
    assert h[0] > 0.999
    assert gmm.gmr_condition(model, [0.0]).mean[0] == pytest.approx(1.0, abs=1e-3)


def test_gmr_underflow_falls_back_to_nearest_component():
    model = gmm.Gmm([0.5, 0.5], [[0.0, 1.0], [1.0, -1.0]], np.array([1e-6 * np.eye(2)] * 2), input_dims=(0,))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        out = gmm.gmr_condition(model, [1e6])
    assert np.isfinite(out.mean).all()
    if caught:
        assert "nearest component" in str(caught[0].message)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), x=st.floats(-5, 5))
def test_gmr_outputs_are_valid(seed, x):
    model = random_mixture(np.random.default_rng(seed))
    h = gmm.responsibilities(model, [x])
    assert abs(h.sum() - 1.0) < 1e-12
    assert np.linalg.eigvalsh(gmm.gmr_condition(model, [x]).cov).min() >= -1e-12


def test_weighted_conditional_variant_drops_the_spread_term():
    model = gmm.Gmm([0.5, 0.5], [[0.0, 1.0], [0.0, -1.0]], np.array([np.eye(2)] * 2), input_dims=(0,))
    mm = gmm.gmr_condition(model, [0.0])
    wc = gmm.gmr_condition(gmm.Gmm(model.priors, model.means, model.covs, (0,), None, False), [0.0])
    assert mm.cov[0, 0] == pytest.approx(2.0) and wc.cov[0, 0] == pytest.approx(1.0)


def test_serialization_round_trip():
    model = random_mixture(np.random.default_rng(6))
    back = gmm.from_dict(gmm.to_dict(model))
    assert np.array_equal(back.means, model.means) and np.array_equal(back.covs, model.covs)
    assert back.input_dims == model.input_dims and back.moment_matching == model.moment_matching
    with pytest.raises(ContractError):
        gmm.from_dict({"format": "other"})


def test_model_validation():
    with pytest.raises(ContractError):
        gmm.Gmm([0.6, 0.6], [[0, 0], [1, 1]], np.array([np.eye(2)] * 2))
    with pytest.raises(ContractError):
        gmm.Gmm([1.0], [[0, 0]], np.array([np.eye(2)]), input_dims=(0,), output_dims=(0,))
    with pytest.raises(ContractError):
        gmm.em_fit(np.zeros((10, 2)), 1, reg=0.0)
