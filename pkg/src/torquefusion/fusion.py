"""
Probabilistic torque controllers and their product-of-Gaussians fusion.

A Gaussian reference N(mu, Sigma) pushed through a controller tau = A ref + b
gives N(A mu + b, A Sigma A^T).  The precision of that torque distribution is
the controller's importance; fusing P of them solves

    argmin_tau  sum_p (tau - tau_p)^T Gamma_p (tau - tau_p)

whose minimizer and inverse Hessian are the mean and covariance of the
product of the Gaussians.
"""
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import ContractError, NumericalError

DEFAULT_EPSILON_SCALE = 1e-6


def _symmetrize(S):
    return 0.5 * (S + S.T)


@dataclass(frozen=True)
class GaussianBelief:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ContractError(f"covariance shape {cov.shape} does not match mean of size {mean.size}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self):
        return self.mean.size

    def is_valid(self, tol=1e-10):
        if np.max(np.abs(self.cov - self.cov.T), initial=0.0) > tol:
            return False
        return bool(np.min(np.linalg.eigvalsh(_symmetrize(self.cov))) >= -tol)


@dataclass(frozen=True)
class TorqueDistribution:
    mean: np.ndarray
    cov: np.ndarray
    precision: np.ndarray
    source: str = ""
    epsilon: float = 0.0

    @property
    def n(self):
        return self.mean.size


def push_forward(ctrl, ref):
    """Torque distribution induced by a Gaussian reference through ``ctrl``."""
    if ref.dim != ctrl.reference_dim:
        raise ContractError(
            f"{ctrl.space} controller expects a {ctrl.reference_dim}-d reference, got {ref.dim}")
    A = ctrl.A
    return GaussianBelief(A @ ref.mean + ctrl.b, _symmetrize(A @ ref.cov @ A.T))


def default_epsilon(cov, scale=DEFAULT_EPSILON_SCALE):
    n = cov.shape[0]
    return scale * max(np.trace(cov) / n, 1.0)


def precision(torque_belief, epsilon=None, source="", epsilon_scale=DEFAULT_EPSILON_SCALE):
    """Regularized inverse covariance, (cov + eps I)^-1, via Cholesky.

    ``epsilon`` defaults to ``epsilon_scale * max(trace(cov) / n, 1)``.
    """
    cov = torque_belief.cov
    n = cov.shape[0]
    if epsilon is None:
        epsilon = default_epsilon(cov, epsilon_scale)
    if not epsilon > 0:
        raise ContractError("epsilon must be positive")
    try:
        factor = linalg.cho_factor(cov + epsilon * np.eye(n), lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"covariance not positive definite after adding {epsilon:g} I") from exc
    gamma = _symmetrize(linalg.cho_solve(factor, np.eye(n), check_finite=False))
    return TorqueDistribution(torque_belief.mean, cov, gamma, source, float(epsilon))


def fuse(dists):
    """Product of Gaussians given in precision form; returns the fused belief."""
    dists = list(dists)
    if not dists:
        raise ContractError("fuse needs at least one torque distribution")
    n = dists[0].n
    if any(d.n != n for d in dists):
        raise ContractError("all torque distributions must have the same dimension")
    total = np.zeros((n, n))
    info = np.zeros(n)
    for d in dists:
        total += d.precision
        info += d.precision @ d.mean
    total = _symmetrize(total)
    try:
        factor = linalg.cho_factor(total, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError("summed precision is not positive definite") from exc
    mean = linalg.cho_solve(factor, info, check_finite=False)
    cov = _symmetrize(linalg.cho_solve(factor, np.eye(n), check_finite=False))
    return GaussianBelief(mean, cov)


def fusion_objective(tau, dists):
    """Weighted least-squares cost minimized by :func:`fuse`."""
    tau = np.asarray(tau, dtype=float)
    return float(sum((tau - d.mean) @ d.precision @ (tau - d.mean) for d in dists))


@dataclass(frozen=True)
class FusionResult:
    tau: np.ndarray
    fused: GaussianBelief
    components: tuple


def task_torque(controllers, epsilon=None, epsilon_scale=DEFAULT_EPSILON_SCALE):
    """Fuse ``(LinearController, GaussianBelief)`` pairs into a task torque.

    Returns a :class:`FusionResult` whose ``components`` keeps each
    per-controller :class:`TorqueDistribution` for logging.
    """
    controllers = list(controllers)
    if not controllers:
        raise ContractError("task_torque needs at least one controller")
    components = tuple(
        precision(push_forward(ctrl, ref), epsilon, source=ctrl.space, epsilon_scale=epsilon_scale)
        for ctrl, ref in controllers
    )
    fused = fuse(components)
    return FusionResult(fused.mean, fused, components)
