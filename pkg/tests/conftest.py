import time
from pathlib import Path
from types import SimpleNamespace

import pytest

from torquefusion import cli, scenarios

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

_acceptance = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        measured = dict(item.user_properties).get("measured", "")
        if not report.passed:
            measured = measured or str(report.longrepr).strip().splitlines()[-1][:160]
        _acceptance.append((marker.args[0], marker.args[1], report.passed, measured))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, measured in sorted(_acceptance):
        terminalreporter.write_line(f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {measured}")


def _train(name):
    config = scenarios.load_config(CONFIGS / f"{name}.json")
    datasets = scenarios.generate(config)
    return SimpleNamespace(config=config, datasets=datasets, models=scenarios.train(config, datasets))


@pytest.fixture(scope="session")
def shaker():
    """Shaker config with its generated datasets and trained models."""
    return _train("shaker")


@pytest.fixture(scope="session")
def painting():
    return _train("painting")


def run_cli_chain(name, out):
    """generate, train and reproduce through the command line; returns the wall time of each step."""
    config = str(CONFIGS / f"{name}.json")
    data, models, run = out / "data", out / "models", out / "run"
    timings = {}
    for step, argv in (("generate", ["generate", "--config", config, "--out", str(data)]),
                       ("train", ["train", "--config", config, "--data", str(data), "--out", str(models)]),
                       ("reproduce", ["reproduce", "--config", config, "--data", str(data), "--models", str(models),
                                      "--out", str(run)])):
        start = time.perf_counter()
        code = cli.main(argv)
        timings[step] = time.perf_counter() - start
        assert code == cli.EXIT_OK, f"{step} exited with {code}"
    return SimpleNamespace(root=out, data=data, models=models, run=run, timings=timings)


@pytest.fixture(scope="session")
def shaker_runs(tmp_path_factory):
    """Two independent command-line runs of the shaker scenario."""
    return [run_cli_chain("shaker", tmp_path_factory.mktemp(f"shaker{i}")) for i in range(2)]


@pytest.fixture(scope="session")
def painting_runs(tmp_path_factory):
    return [run_cli_chain("painting", tmp_path_factory.mktemp(f"painting{i}")) for i in range(2)]
