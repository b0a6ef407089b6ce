"""
Per-controller training datasets and the trained trajectory models that
turn an input (time or an external point) into a Gaussian reference.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .. import gmm, gpr
from ..errors import ContractError

MODEL_FORMAT = "torquefusion.trajectory-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class Dataset:
    """Rows of ``[inputs..., outputs...]`` with the demonstration id of every row."""
    name: str
    input_names: tuple
    output_names: tuple
    data: np.ndarray
    demo: np.ndarray
    prior_mean: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        width = len(self.input_names) + len(self.output_names)
        if data.ndim != 2 or data.shape[1] != width:
            raise ContractError(f"dataset {self.name!r} must have {width} columns")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "demo", np.asarray(self.demo, dtype=int).ravel())
        object.__setattr__(self, "input_names", tuple(self.input_names))
        object.__setattr__(self, "output_names", tuple(self.output_names))
        if self.prior_mean is not None:
            object.__setattr__(self, "prior_mean", np.asarray(self.prior_mean, dtype=float))

    @property
    def T(self):
        return self.data.shape[0]

    @property
    def inputs(self):
        return self.data[:, :len(self.input_names)]

    @property
    def outputs(self):
        return self.data[:, len(self.input_names):]

    def for_demo(self, demo_id):
        return self.data[self.demo == demo_id]


class GmmTrajectory:
    backend = "gmm"

    def __init__(self, name, model, log_likelihood=None):
        self.name = name
        self.model = model
        self.log_likelihood = log_likelihood

    def predict(self, x_in):
        return gmm.gmr_condition(self.model, x_in)

    def report(self):
        return {"controller": self.name, "backend": "gmm", "K": self.model.K,
                "final_log_likelihood": self.log_likelihood}

    def to_dict(self):
        return {"format": MODEL_FORMAT, "version": MODEL_VERSION, "controller": self.name,
                "backend": "gmm", "final_log_likelihood": self.log_likelihood, "model": gmm.to_dict(self.model)}


class GpTrajectory:
    backend = "gp"

    def __init__(self, name, model):
        self.name = name
        self.model = model

    def predict(self, x_in):
        return gpr.gp_predict(self.model, x_in)

    def predict_batch(self, queries):
        return gpr.gp_predict_batch(self.model, queries)

    def report(self):
        k = self.model.kernel
        ls = k.lengthscale
        return {"controller": self.name, "backend": "gp", "kernel": k.family,
                "lengthscale": ls.tolist() if isinstance(ls, np.ndarray) else ls,
                "signal_variance": k.signal_variance, "noise": self.model.noise,
                "nlml": gpr.nlml(self.model)}

    def to_dict(self):
        return {"format": MODEL_FORMAT, "version": MODEL_VERSION, "controller": self.name,
                "backend": "gp", "model": gpr.to_dict(self.model)}


def model_from_dict(doc):
    if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
        raise ContractError(f"not a {MODEL_FORMAT} v{MODEL_VERSION} document")
    if doc["backend"] == "gmm":
        return GmmTrajectory(doc["controller"], gmm.from_dict(doc["model"]), doc.get("final_log_likelihood"))
    if doc["backend"] == "gp":
        return GpTrajectory(doc["controller"], gpr.from_dict(doc["model"]))
    raise ContractError(f"unknown backend {doc['backend']!r}")


def train_model(spec, dataset, seed):
    """Fit the regression backend declared in ``spec`` to ``dataset``."""
    backend = spec.backend
    n_in = len(dataset.input_names)
    if backend.kind == "gmm":
        model, trace = gmm.em_fit(dataset.data, backend.K, seed=seed, reg=backend.reg, tol=backend.tol,
                                  max_iter=backend.max_iter, input_dims=tuple(range(n_in)))
        if not backend.moment_matching:
            model = gmm.Gmm(model.priors, model.means, model.covs, model.input_dims, model.output_dims, False)
        return GmmTrajectory(spec.name, model, trace[-1])
    prior = 0.0 if dataset.prior_mean is None else dataset.prior_mean
    search = gpr.SearchSpec.default(dataset.inputs, dataset.outputs, prior)
    search = replace(search, **{name: value for name, value in (
        ("lengthscale", backend.lengthscale_bounds),
        ("signal_variance", backend.signal_variance_bounds),
        ("noise", backend.noise_bounds)) if value is not None})
    kernel, noise, _ = gpr.optimize_hyperparams(dataset.inputs, dataset.outputs, backend.kernel, search, prior)
    return GpTrajectory(spec.name, gpr.gp_fit(dataset.inputs, dataset.outputs, kernel, noise, prior))
