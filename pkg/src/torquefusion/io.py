"""
Artifact files: dataset and log CSVs, model/metrics/manifest JSON.

CSV numbers use 17 significant digits so every double round-trips exactly.
JSON floats use Python's shortest round-trip repr, which is equally exact.
"""
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ContractError
from .scenarios.models import Dataset, model_from_dict

FLOAT_FORMAT = "%.17g"
DATASET_INDEX = "datasets.json"
MODEL_INDEX = "models.json"


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value


def write_json(path, doc):
    path = Path(path)
    path.write_text(json.dumps(_plain(doc), indent=2, sort_keys=True, allow_nan=True) + "\n")
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


def write_csv(path, columns, data):
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if data.size and data.shape[1] != len(columns):
        raise ContractError(f"{len(columns)} column names for {data.shape[1]} columns")
    path = Path(path)
    with path.open("w", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        if data.size:
            np.savetxt(fh, data, fmt=FLOAT_FORMAT, delimiter=",")
    return path


def read_csv(path):
    path = Path(path)
    with path.open() as fh:
        columns = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return columns, data


def checksum(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def save_datasets(out_dir, datasets):
    """One CSV per controller plus an index with column roles and prior means."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = {}
    paths = []
    for name, ds in datasets.items():
        path = write_csv(out_dir / f"{name}.csv", ("demo_id",) + ds.input_names + ds.output_names,
                         np.column_stack([ds.demo, ds.data]))
        paths.append(path)
        index[name] = {"file": path.name, "inputs": list(ds.input_names), "outputs": list(ds.output_names),
                       "prior_mean": None if ds.prior_mean is None else ds.prior_mean.tolist(),
                       "meta": ds.meta, "rows": ds.T}
    paths.append(write_json(out_dir / DATASET_INDEX, index))
    return paths


def load_datasets(data_dir):
    data_dir = Path(data_dir)
    index_path = data_dir / DATASET_INDEX
    if not index_path.exists():
        raise FileNotFoundError(str(index_path))
    index = read_json(index_path)
    datasets = {}
    for name, entry in index.items():
        path = data_dir / entry["file"]
        if not path.exists():
            raise FileNotFoundError(str(path))
        columns, rows = read_csv(path)
        expected = ["demo_id"] + entry["inputs"] + entry["outputs"]
        if columns != expected:
            raise ContractError(f"{path}: expected columns {expected}, found {columns}")
        datasets[name] = Dataset(name, entry["inputs"], entry["outputs"], rows[:, 1:], rows[:, 0].astype(int),
                                 prior_mean=entry["prior_mean"], meta=entry.get("meta", {}))
    return datasets


def save_models(out_dir, models):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [write_json(out_dir / f"{name}.json", m.to_dict()) for name, m in models.items()]
    paths.append(write_json(out_dir / MODEL_INDEX, {name: f"{name}.json" for name in models}))
    return paths


def load_models(models_dir, names):
    models_dir = Path(models_dir)
    models = {}
    for name in names:
        path = models_dir / f"{name}.json"
        if not path.exists():
            raise FileNotFoundError(str(path))
        models[name] = model_from_dict(read_json(path))
    return models
