"""
Desk-scale scenarios: demonstration generation, training and closed-loop reproduction.

The helpers here dispatch on ``config.scenario`` so the command line and the
tests drive both scenarios through the same calls.
"""
from . import painting, reproduce, shaker
from .config import PAINTING, SHAKER, ScenarioConfig, config_hash, load_config, parse_config
from .demos import Demonstration, dtw_align, dtw_path, filter_and_subsample
from .models import Dataset, GmmTrajectory, GpTrajectory, model_from_dict, train_model
from .reproduce import ReproductionLog, epsilon_sensitivity

__all__ = [
    "PAINTING", "SHAKER", "ScenarioConfig", "config_hash", "load_config", "parse_config",
    "Demonstration", "dtw_align", "dtw_path", "filter_and_subsample",
    "Dataset", "GmmTrajectory", "GpTrajectory", "model_from_dict", "train_model",
    "ReproductionLog", "epsilon_sensitivity",
    "generate", "train", "run", "metrics",
]


def generate(config):
    """Per-controller training datasets for the configured scenario."""
    if config.scenario == SHAKER:
        return shaker.generate_shaker_demos(config)
    return painting.generate_painting_demos(config)


def train(config, datasets):
    """One trained trajectory model per declared controller."""
    missing = [s.name for s in config.controllers if s.name not in datasets]
    if missing:
        raise KeyError(f"no dataset for controller(s) {', '.join(missing)}")
    return {spec.name: train_model(spec, datasets[spec.name], config.seed) for spec in config.controllers}


def run(config, models, duration=None, epsilon_scale=None):
    """Closed-loop reproduction from the scenario's initial state (and scripted input)."""
    if config.scenario == SHAKER:
        return reproduce.reproduce(config, models, duration=duration,
                                   initial_state=shaker.initial_state(config), epsilon_scale=epsilon_scale)
    return reproduce.reproduce(config, models, duration=duration, input_signal=painting.input_path(config),
                               initial_state=painting.initial_state(config), epsilon_scale=epsilon_scale)


def metrics(config, log, datasets):
    """Scenario metrics; adds the fused-torque sensitivity to epsilon when scales are configured."""
    if config.scenario == SHAKER:
        out = shaker.shaker_metrics(config, log, datasets)
    else:
        out = painting.painting_metrics(config, log)
    scales = config.evaluation.get("epsilon_scales")
    if scales and len(log):
        out["epsilon_scales"] = [float(s) for s in scales]
        out["epsilon_sensitivity"] = epsilon_sensitivity(log, tuple(scales))
    return out
