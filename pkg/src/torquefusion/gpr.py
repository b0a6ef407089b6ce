"""
Gaussian process regression, one independent GP per output dimension.

All output dimensions share one kernel and noise level but keep their own
constant prior mean; predictions far from the data revert to that mean and
to the prior variance.  Hyperparameters are found by a derivative-free
search over log-parameters minimizing the negative log marginal likelihood.
"""
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import ConfigError, ContractError, NumericalError
from .fusion import GaussianBelief

SQUARED_EXPONENTIAL = "squared-exponential"
MATERN32 = "matern-3/2"
FAMILIES = (SQUARED_EXPONENTIAL, MATERN32)
FORMAT = "torquefusion.gp"
VERSION = 1
VARIANCE_FLOOR = 1e-12
LOG_2PI = np.log(2.0 * np.pi)
SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class Kernel:
    family: str
    lengthscale: object
    signal_variance: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ContractError(f"unknown kernel family {self.family!r}")
        ls = np.asarray(self.lengthscale, dtype=float)
        if np.any(ls <= 0) or not self.signal_variance > 0:
            raise ContractError("kernel hyperparameters must be strictly positive")
        object.__setattr__(self, "lengthscale", float(ls) if ls.ndim == 0 else ls.ravel())
        object.__setattr__(self, "signal_variance", float(self.signal_variance))

    def __call__(self, A, B):
        """Cross-covariance matrix between the rows of ``A`` and ``B``."""
        A = np.atleast_2d(A) / self.lengthscale
        B = np.atleast_2d(B) / self.lengthscale
        sq = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * A @ B.T
        r = np.sqrt(np.maximum(sq, 0.0))
        return self._profile(r)

    def _profile(self, r):
        if self.family == SQUARED_EXPONENTIAL:
            return self.signal_variance * np.exp(-0.5 * r * r)
        s = SQRT3 * r
        return self.signal_variance * (1.0 + s) * np.exp(-s)


def kernel_eval(kernel, a, b):
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise ContractError("kernel arguments must have equal dimension")
    r = np.sqrt(np.sum(((a - b) / kernel.lengthscale) ** 2))
    return float(kernel._profile(r))


@dataclass(frozen=True)
class GpModel:
    inputs: np.ndarray
    targets: np.ndarray
    kernel: Kernel
    noise: float
    prior_mean: np.ndarray
    chol: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    jitter: float = 0.0

    @property
    def T(self):
        return self.inputs.shape[0]

    @property
    def output_dim(self):
        return self.targets.shape[1]


def _as_rows(x):
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def gp_fit(inputs, targets, kernel, noise, prior_mean=0.0):
    """Factorize K + noise I once and cache the per-dimension solve vectors.

    Cholesky failures are retried with a jitter growing by 10x up to
    ``1e-2 * signal_variance``.
    """
    X = _as_rows(inputs)
    Y = _as_rows(targets)
    if X.shape[0] < 1 or X.shape[0] != Y.shape[0]:
        raise ContractError("inputs and targets need the same, non-zero number of rows")
    if not noise > 0:
        raise ContractError("noise must be positive")
    m = np.broadcast_to(np.asarray(prior_mean, dtype=float), (Y.shape[1],)).copy()
    gram = kernel(X, X)
    gram = 0.5 * (gram + gram.T) + noise * np.eye(X.shape[0])
    jitter, limit = 0.0, 1e-2 * kernel.signal_variance
    while True:
        try:
            L = linalg.cholesky(gram + jitter * np.eye(X.shape[0]), lower=True)
            break
        except linalg.LinAlgError:
            jitter = 1e-10 * kernel.signal_variance if jitter == 0.0 else 10.0 * jitter
            if jitter > limit:
                raise NumericalError("Gram matrix is not positive definite even with jitter")
    alpha = linalg.cho_solve((L, True), Y - m)
    return GpModel(X, Y, kernel, float(noise), m, L, alpha, jitter)


def gp_predict_batch(model, queries):
    """Means (Q, D_O) and shared variances (Q,) for a batch of query rows."""
    Q = _as_rows(queries)
    if Q.shape[1] != model.inputs.shape[1]:
        raise ContractError("query dimension does not match the training inputs")
    k_star = model.kernel(Q, model.inputs)
    means = model.prior_mean + k_star @ model.alpha
    v = linalg.solve_triangular(model.chol, k_star.T, lower=True, check_finite=False)
    k_ss = model.kernel.signal_variance
    var = np.maximum(k_ss - np.sum(v * v, axis=0), VARIANCE_FLOOR)
    return means, var


def gp_predict(model, query):
    """Gaussian over the outputs with diagonal covariance; the noise term is not added."""
    query = np.atleast_1d(np.asarray(query, dtype=float))
    means, var = gp_predict_batch(model, query[None, :])
    return GaussianBelief(means[0], var[0] * np.eye(model.output_dim))


def nlml(model):
    residual = model.targets - model.prior_mean
    fit = 0.5 * np.sum(residual * model.alpha)
    log_det = np.log(np.diag(model.chol)).sum()
    return float(fit + model.output_dim * (log_det + 0.5 * model.T * LOG_2PI))


@dataclass(frozen=True)
class SearchSpec:
    """Absolute bounds (low, high) for the lengthscale, signal variance and noise."""
    lengthscale: tuple
    signal_variance: tuple
    noise: tuple
    grid_points: int = 5
    refine_iters: int = 50
    starts: int = 3

    def __post_init__(self):
        for name in ("lengthscale", "signal_variance", "noise"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ConfigError(f"search bounds for {name} must satisfy 0 < low <= high", name)

    @classmethod
    def default(cls, inputs, targets, prior_mean=None):
        X = _as_rows(inputs)
        Y = _as_rows(targets)
        span = float(np.max(np.ptp(X, axis=0))) if X.shape[0] > 1 else 1.0
        span = span if span > 0 else 1.0
        centre = Y.mean(axis=0) if prior_mean is None else np.broadcast_to(prior_mean, (Y.shape[1],))
        scale = float(np.mean((Y - centre) ** 2))
        scale = scale if scale > 0 else 1.0
        return cls((1e-2 * span, 1e1 * span), (1e-4 * scale, 1e2 * scale), (1e-8 * scale, scale))


GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _golden_section(f, lo, hi, iters):
    a, b = lo, hi
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def optimize_hyperparams(inputs, targets, kernel_family, search_spec=None, prior_mean=0.0):
    """Minimize the NLML over (log lengthscale, log signal variance, log noise).

    A log-spaced grid (``grid_points`` per axis) is evaluated first; the best
    ``starts`` grid points are then refined by cyclic per-axis golden-section
    searches, each bracket spanning one grid step either side of the current
    point and halving once a sweep leaves an axis in place.

    Returns ``(kernel, noise, nlml_value)``.
    """
    X, Y = _as_rows(inputs), _as_rows(targets)
    spec = search_spec or SearchSpec.default(X, Y, prior_mean)
    lows = np.log([spec.lengthscale[0], spec.signal_variance[0], spec.noise[0]])
    highs = np.log([spec.lengthscale[1], spec.signal_variance[1], spec.noise[1]])
    cache = {}

    def objective(theta):
        key = tuple(np.round(theta, 12))
        if key not in cache:
            ell, sf2, sn2 = np.exp(theta)
            try:
                value = nlml(gp_fit(X, Y, Kernel(kernel_family, ell, sf2), sn2, prior_mean))
            except (NumericalError, ContractError):
                value = np.nan
            cache[key] = value if np.isfinite(value) else np.inf
        return cache[key]

    axes = [np.linspace(lo, hi, spec.grid_points) for lo, hi in zip(lows, highs)]
    grid = [np.array(p) for p in itertools.product(*axes)]
    scores = np.array([objective(p) for p in grid])
    if not np.any(np.isfinite(scores)):
        raise ConfigError("negative log marginal likelihood is undefined over the whole search grid")
    steps = (highs - lows) / max(spec.grid_points - 1, 1)
    best_theta, best_value = None, np.inf
    for idx in np.argsort(scores, kind="stable")[:spec.starts]:
        if not np.isfinite(scores[idx]):
            continue
        theta, value = _refine(objective, grid[idx].copy(), scores[idx], steps.copy(), lows, highs, spec.refine_iters)
        if value < best_value:
            best_theta, best_value = theta, value
    ell, sf2, sn2 = np.exp(best_theta)
    return Kernel(kernel_family, ell, sf2), float(sn2), float(best_value)


def _refine(objective, theta, value, widths, lows, highs, iters):
    for _ in range(iters):
        moved = np.zeros(theta.size, dtype=bool)
        for axis in range(theta.size):
            lo = max(lows[axis], theta[axis] - widths[axis])
            hi = min(highs[axis], theta[axis] + widths[axis])
            if hi - lo < 1e-12:
                continue

            def along(x, axis=axis):
                trial = theta.copy()
                trial[axis] = x
                return objective(trial)

            x, fx = _golden_section(along, lo, hi, 24)
            if fx < value - 1e-12:
                moved[axis] = abs(x - theta[axis]) > 0.5 * widths[axis]
                theta[axis], value = x, fx
        widths = np.where(moved, widths, 0.5 * widths)
        if np.all(widths < 1e-4):
            break
    return theta, value


def to_dict(model):
    ls = model.kernel.lengthscale
    return {
        "format": FORMAT,
        "version": VERSION,
        "kernel": {
            "family": model.kernel.family,
            "lengthscale": ls.tolist() if isinstance(ls, np.ndarray) else ls,
            "signal_variance": model.kernel.signal_variance,
        },
        "noise": model.noise,
        "prior_mean": model.prior_mean.tolist(),
        "inputs": model.inputs.tolist(),
        "targets": model.targets.tolist(),
    }


def from_dict(doc):
    if doc.get("format") != FORMAT or doc.get("version") != VERSION:
        raise ContractError(f"not a {FORMAT} v{VERSION} document")
    k = doc["kernel"]
    kernel = Kernel(k["family"], k["lengthscale"], k["signal_variance"])
    return gp_fit(doc["inputs"], doc["targets"], kernel, doc["noise"], doc["prior_mean"])
