"""
Gaussian mixture models fitted by EM, and Gaussian mixture regression.

Datasets are arrays of shape (T, D): one row per datapoint.  GMR conditions
the joint density on the input dimensions and returns a single Gaussian over
the output dimensions whose covariance encodes demonstration variability.
"""
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from .errors import ContractError, DegenerateComponentError
from .fusion import GaussianBelief

FORMAT = "torquefusion.gmm"
VERSION = 1
COLLAPSE_PRIOR = 1e-8
CONDITIONAL_FLOOR = 1e-9
LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class Gmm:
    priors: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    input_dims: tuple = (0,)
    output_dims: tuple = None
    moment_matching: bool = True

    def __post_init__(self):
        priors = np.asarray(self.priors, dtype=float).ravel()
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        covs = np.asarray(self.covs, dtype=float).reshape(means.shape[0], means.shape[1], means.shape[1])
        K, D = means.shape
        if priors.shape != (K,):
            raise ContractError("priors must have one entry per component")
        if np.any(priors <= 0) or abs(priors.sum() - 1.0) > 1e-12:
            raise ContractError("priors must be positive and sum to one")
        inputs = tuple(int(i) for i in self.input_dims)
        outputs = self.output_dims
        outputs = tuple(i for i in range(D) if i not in inputs) if outputs is None else tuple(int(i) for i in outputs)
        if sorted(inputs + outputs) != list(range(D)):
            raise ContractError("input_dims and output_dims must partition the data dimensions")
        object.__setattr__(self, "priors", priors)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covs", covs)
        object.__setattr__(self, "input_dims", inputs)
        object.__setattr__(self, "output_dims", outputs)

    @property
    def K(self):
        return self.priors.size

    @property
    def D(self):
        return self.means.shape[1]

    def with_io(self, input_dims, output_dims=None):
        return Gmm(self.priors, self.means, self.covs, input_dims, output_dims, self.moment_matching)

    @cached_property
    def _conditioning(self):
        I, O = list(self.input_dims), list(self.output_dims)
        chol_in, regress, cond_covs = [], [], []
        for cov in self.covs:
            c_ii = cov[np.ix_(I, I)]
            c_oi = cov[np.ix_(O, I)]
            L = linalg.cholesky(c_ii, lower=True)
            gain = linalg.cho_solve((L, True), c_oi.T).T
            cond = cov[np.ix_(O, O)] - gain @ c_oi.T
            cond = 0.5 * (cond + cond.T)
            idx = np.diag_indices_from(cond)
            cond[idx] = np.maximum(cond[idx], CONDITIONAL_FLOOR)
            chol_in.append(L)
            regress.append(gain)
            cond_covs.append(cond)
        return np.array(chol_in), np.array(regress), np.array(cond_covs)


def _log_gaussian(X, mean, cov):
    """Row-wise log N(x; mean, cov) for X of shape (T, d)."""
    L = linalg.cholesky(cov, lower=True)
    z = linalg.solve_triangular(L, (X - mean).T, lower=True)
    return -0.5 * np.sum(z * z, axis=0) - np.log(np.diag(L)).sum() - 0.5 * mean.size * LOG_2PI


def _as_dataset(data):
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2 or not np.all(np.isfinite(data)):
        raise ContractError("data must be a finite (T, D) array")
    return data


def _kmeans_pp(Z, K, rng):
    T = Z.shape[0]
    centers = [Z[rng.integers(T)]]
    d2 = np.sum((Z - centers[0]) ** 2, axis=1)
    for _ in range(1, K):
        total = d2.sum()
        idx = rng.integers(T) if total <= 0 else rng.choice(T, p=d2 / total)
        centers.append(Z[idx])
        d2 = np.minimum(d2, np.sum((Z - Z[idx]) ** 2, axis=1))
    return np.array(centers)


def kmeans_init(data, K, seed=0, reg=1e-6, max_iter=50):
    """k-means++ seeding followed by Lloyd iterations.

    Clustering runs on per-dimension standardized data so that time, angles
    and forces weigh comparably; the returned statistics are in data units.
    """
    X = _as_dataset(data)
    T, D = X.shape
    if K < 1 or K > T:
        raise ContractError(f"need 1 <= K <= T, got K={K}, T={T}")
    rng = np.random.default_rng(seed)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = (X - X.mean(axis=0)) / scale
    centers = _kmeans_pp(Z, K, rng)
    labels = None
    for _ in range(max_iter):
        dist = np.sum((Z[:, None, :] - centers[None]) ** 2, axis=2)
        new_labels = np.argmin(dist, axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for k in range(K):
            members = Z[labels == k]
            if len(members):
                centers[k] = members.mean(axis=0)
            else:
                # re-seed an empty cluster at the worst-fitting point
                far = np.argmax(np.min(dist, axis=1))
                centers[k] = Z[far]
                labels[far] = k
    priors = np.empty(K)
    means = np.empty((K, D))
    covs = np.empty((K, D, D))
    for k in range(K):
        members = X[labels == k]
        priors[k] = len(members) / T
        means[k] = members.mean(axis=0)
        diff = members - means[k]
        covs[k] = diff.T @ diff / len(members) + reg * np.eye(D)
    return Gmm(priors / priors.sum(), means, covs, input_dims=(0,))


def log_likelihood(model, data):
    X = _as_dataset(data)
    log_p = np.column_stack([np.log(model.priors[k]) + _log_gaussian(X, model.means[k], model.covs[k])
                             for k in range(model.K)])
    return float(logsumexp(log_p, axis=1).sum())


def em_fit(data, K, seed=0, reg=1e-6, tol=1e-6, max_iter=200, input_dims=(0,), output_dims=None):
    """Fit a K-state GMM by EM.

    Returns ``(model, trace)`` where ``trace`` holds the data log-likelihood
    before every M-step and after the last one.  Iteration stops when the
    relative improvement drops below ``tol``.
    """
    if not reg > 0 or not tol > 0:
        raise ContractError("reg and tol must be positive")
    X = _as_dataset(data)
    T, D = X.shape
    model = kmeans_init(X, K, seed=seed, reg=reg)
    priors, means, covs = model.priors, model.means, model.covs
    trace = []
    for it in range(max_iter + 1):
        log_p = np.column_stack([np.log(priors[k]) + _log_gaussian(X, means[k], covs[k]) for k in range(K)])
        log_norm = logsumexp(log_p, axis=1)
        ll = float(log_norm.sum())
        trace.append(ll)
        if it > 0 and (ll - trace[-2]) < tol * abs(trace[-2]):
            break
        if it == max_iter:
            break
        gamma = np.exp(log_p - log_norm[:, None])
        mass = gamma.sum(axis=0)
        priors = mass / T
        bad = np.flatnonzero(priors < COLLAPSE_PRIOR)
        if bad.size:
            raise DegenerateComponentError(
                f"component {bad[0]} collapsed (prior {priors[bad[0]]:.3g})", int(bad[0]))
        means = (gamma.T @ X) / mass[:, None]
        covs = np.empty((K, D, D))
        for k in range(K):
            diff = X - means[k]
            covs[k] = (gamma[:, k, None] * diff).T @ diff / mass[k] + reg * np.eye(D)
            covs[k] = 0.5 * (covs[k] + covs[k].T)
    model = Gmm(priors / priors.sum(), means, covs, input_dims=input_dims, output_dims=output_dims)
    return model, trace


def responsibilities(model, x_in):
    """Posterior weights of each component given the input, computed in log space."""
    x_in = np.atleast_1d(np.asarray(x_in, dtype=float))
    I = list(model.input_dims)
    if x_in.shape != (len(I),) or not np.all(np.isfinite(x_in)):
        raise ContractError(f"input must be a finite vector of length {len(I)}")
    chol_in = model._conditioning[0]
    log_h = np.empty(model.K)
    maha = np.empty(model.K)
    for k in range(model.K):
        L = chol_in[k]
        z = linalg.solve_triangular(L, x_in - model.means[k, I], lower=True, check_finite=False)
        maha[k] = z @ z
        log_h[k] = np.log(model.priors[k]) - 0.5 * maha[k] - np.log(np.diag(L)).sum() - 0.5 * len(I) * LOG_2PI
    if not np.any(np.isfinite(log_h)):
        warnings.warn("all GMR responsibilities underflowed; using the nearest component", RuntimeWarning)
        h = np.zeros(model.K)
        h[np.argmin(maha)] = 1.0
        return h
    h = np.exp(log_h - logsumexp(log_h))
    return h / h.sum()


def gmr_condition(model, x_in):
    """Gaussian over the output dimensions given ``x_in`` on the input dimensions."""
    x_in = np.atleast_1d(np.asarray(x_in, dtype=float))
    h = responsibilities(model, x_in)
    I, O = list(model.input_dims), list(model.output_dims)
    _, regress, cond_covs = model._conditioning
    mu_hat = model.means[:, O] + np.einsum("koi,ki->ko", regress, x_in - model.means[:, I])
    mean = h @ mu_hat
    if model.moment_matching:
        second = np.einsum("k,kij->ij", h, cond_covs + np.einsum("ki,kj->kij", mu_hat, mu_hat))
        cov = second - np.outer(mean, mean)
    else:
        cov = np.einsum("k,kij->ij", h, cond_covs)
    return GaussianBelief(mean, 0.5 * (cov + cov.T))


def to_dict(model):
    return {
        "format": FORMAT,
        "version": VERSION,
        "K": model.K,
        "D": model.D,
        "priors": model.priors.tolist(),
        "means": model.means.tolist(),
        "covariances": [c.ravel().tolist() for c in model.covs],
        "input_dims": list(model.input_dims),
        "output_dims": list(model.output_dims),
        "covariance_mode": "moment-matching" if model.moment_matching else "weighted-conditional",
    }


def from_dict(doc):
    if doc.get("format") != FORMAT or doc.get("version") != VERSION:
        raise ContractError(f"not a {FORMAT} v{VERSION} document")
    D = int(doc["D"])
    covs = np.array(doc["covariances"], dtype=float).reshape(-1, D, D)
    return Gmm(doc["priors"], doc["means"], covs, doc["input_dims"], doc["output_dims"],
               doc.get("covariance_mode", "moment-matching") == "moment-matching")
