import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torquefusion import io
from torquefusion.errors import ContractError
from torquefusion.scenarios.models import Dataset


@settings(max_examples=30, deadline=None)
@given(values=st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=40))
def test_csv_round_trip_is_exact(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("csv") / "v.csv"
    data = np.array(values)[:, None]
    io.write_csv(path, ["v"], data)
    columns, back = io.read_csv(path)
    assert columns == ["v"] and np.array_equal(back, data)


def test_json_round_trip_is_exact(tmp_path):
    doc = {"a": np.float64(0.1) + np.float64(0.2), "b": np.arange(3), "c": {"d": (1.0 / 3.0, 2)}}
    back = io.read_json(io.write_json(tmp_path / "x.json", doc))
    assert back == {"a": 0.1 + 0.2, "b": [0, 1, 2], "c": {"d": [1.0 / 3.0, 2]}}


def test_dataset_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    ds = Dataset("joint", ("t_s",), ("q1_rad", "q2_rad"), rng.standard_normal((7, 3)), [1, 1, 1, 2, 2, 2, 2],
                 prior_mean=[0.5, -0.5], meta={"aligned": True})
    paths = io.save_datasets(tmp_path, {"joint": ds})
    assert sorted(p.name for p in paths) == ["datasets.json", "joint.csv"]
    back = io.load_datasets(tmp_path)["joint"]
    assert np.array_equal(back.data, ds.data) and np.array_equal(back.demo, ds.demo)
    assert np.array_equal(back.prior_mean, ds.prior_mean) and back.meta == ds.meta
    assert back.output_names == ds.output_names


def test_missing_and_inconsistent_datasets(tmp_path):
    with pytest.raises(FileNotFoundError):
        io.load_datasets(tmp_path)
    ds = Dataset("force", ("t_s",), ("F1_N",), np.zeros((2, 2)), [1, 1])
    io.save_datasets(tmp_path, {"force": ds})
    (tmp_path / "force.csv").write_text("demo_id,t_s,wrong\n1,0,0\n")
    with pytest.raises(ContractError):
        io.load_datasets(tmp_path)
    (tmp_path / "force.csv").unlink()
    with pytest.raises(FileNotFoundError) as info:
        io.load_datasets(tmp_path)
    assert "force.csv" in str(info.value)


def test_model_round_trip(tmp_path, shaker):
    io.save_models(tmp_path, shaker.models)
    back = io.load_models(tmp_path, list(shaker.models))
    for name, model in shaker.models.items():
        assert back[name].to_dict() == io.read_json(tmp_path / f"{name}.json")
        a, b = model.predict([2.0]), back[name].predict([2.0])
        assert np.array_equal(a.mean, b.mean) and np.array_equal(a.cov, b.cov)
    with pytest.raises(FileNotFoundError):
        io.load_models(tmp_path, ["missing"])


def test_csv_column_count_is_checked(tmp_path):
    with pytest.raises(ContractError):
        io.write_csv(tmp_path / "x.csv", ["a"], np.zeros((2, 2)))
