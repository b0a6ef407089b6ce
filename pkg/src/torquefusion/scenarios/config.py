"""
Scenario configuration: a single JSON document per scenario.

Field names carry their units.  Parsing validates everything up front and
raises :class:`ConfigError` naming the offending field.
"""
import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import controllers as ctl
from ..dynamics import ContactEnvironment, RobotModel, TASK_DIM
from ..errors import ConfigError, ContractError
from ..gpr import FAMILIES

SHAKER = "shaker"
PAINTING = "painting"
TIME_INPUT = "time"
EXTERNAL_INPUT = "external"


@dataclass(frozen=True)
class BackendSpec:
    kind: str
    K: int = 0
    reg: float = 1e-6
    tol: float = 1e-6
    max_iter: int = 200
    moment_matching: bool = True
    kernel: str = "matern-3/2"
    lengthscale_bounds: tuple = None
    signal_variance_bounds: tuple = None
    noise_bounds: tuple = None


@dataclass(frozen=True)
class ControllerSpec:
    name: str
    type: str
    gains: ctl.GainSet
    backend: BackendSpec
    input: str = TIME_INPUT
    feedforward: bool = False
    sign: int = 1
    zero_velocity_reference: bool = False

    def reference_dim(self, n):
        if self.type == ctl.FORCE:
            return TASK_DIM
        base = n if self.type == ctl.JOINT else TASK_DIM
        if self.zero_velocity_reference:
            return base
        return 3 * base if self.feedforward else 2 * base


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    seed: int
    robot: RobotModel
    env: ContactEnvironment
    controllers: tuple
    demonstrations: dict
    reproduction: dict
    evaluation: dict = field(default_factory=dict)
    dt: float = 1e-3
    epsilon_scale: float = 1e-6
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    def controller(self, name):
        for spec in self.controllers:
            if spec.name == name:
                return spec
        raise KeyError(name)

    def with_seed(self, seed):
        raw = copy.deepcopy(self.raw)
        raw["seed"] = int(seed)
        return parse_config(raw)

    def with_epsilon_scale(self, scale):
        raw = copy.deepcopy(self.raw)
        raw.setdefault("fusion", {})["epsilon_scale"] = float(scale)
        return parse_config(raw)


def _get(doc, key, path, kind=None, default=...):
    if key not in doc:
        if default is ...:
            raise ConfigError(f"missing field {path}.{key}".lstrip("."), f"{path}.{key}".lstrip("."))
        return default
    value = doc[key]
    if kind is not None:
        try:
            value = kind(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"field {path}.{key} is invalid: {exc}", f"{path}.{key}") from exc
    return value


def _parse_robot(doc):
    try:
        return RobotModel(
            link_lengths=_get(doc, "link_lengths_m", "robot"),
            link_masses=_get(doc, "link_masses_kg", "robot"),
            gravity=_get(doc, "gravity_m_per_s2", "robot", float, 9.81),
            joint_damping=_get(doc, "joint_damping_Nms_per_rad", "robot", None, 0.1),
        )
    except ContractError as exc:
        raise ConfigError(f"robot: {exc}", "robot") from exc


def _parse_env(doc):
    if doc is None:
        return ContactEnvironment()
    try:
        return ContactEnvironment(
            plane_normal=_get(doc, "plane_normal", "environment", None, [1.0, 0.0]),
            plane_offset=_get(doc, "plane_offset_m", "environment", float, 0.0),
            stiffness=_get(doc, "stiffness_N_per_m", "environment", float, 0.0),
            damping=_get(doc, "damping_Ns_per_m", "environment", float, 0.0),
            enabled=_get(doc, "enabled", "environment", bool, True),
        )
    except ContractError as exc:
        raise ConfigError(f"environment: {exc}", "environment") from exc


def _parse_controller(doc, index, n):
    path = f"controllers[{index}]"
    name = _get(doc, "name", path, str)
    kind = _get(doc, "type", path, str)
    if kind not in (ctl.JOINT, ctl.CARTESIAN, ctl.FORCE):
        raise ConfigError(f"{path}.type must be joint, cartesian or force", f"{path}.type")
    gains_doc = _get(doc, "gains", path, dict, {})
    try:
        gains = ctl.GainSet.from_diagonals(n, **gains_doc)
    except (ContractError, TypeError) as exc:
        raise ConfigError(f"{path}.gains: {exc}", f"{path}.gains") from exc
    required = {ctl.JOINT: ("Kq_p",), ctl.CARTESIAN: ("Kx_p",), ctl.FORCE: ("Kf_p",)}[kind]
    for key in required:
        if np.any(np.diag(getattr(gains, key)) <= 0):
            raise ConfigError(f"{path}.gains.{key} must be positive", f"{path}.gains.{key}")
    backend_doc = _get(doc, "backend", path, dict)
    backend_kind = _get(backend_doc, "kind", f"{path}.backend", str)
    if backend_kind == "gmm":
        backend = BackendSpec(
            "gmm",
            K=_get(backend_doc, "K", f"{path}.backend", int),
            reg=_get(backend_doc, "reg", f"{path}.backend", float, 1e-6),
            tol=_get(backend_doc, "tol", f"{path}.backend", float, 1e-6),
            max_iter=_get(backend_doc, "max_iter", f"{path}.backend", int, 200),
            moment_matching=_get(backend_doc, "moment_matching", f"{path}.backend", bool, True),
        )
        if backend.K < 1:
            raise ConfigError(f"{path}.backend.K must be >= 1", f"{path}.backend.K")
    elif backend_kind == "gp":
        bounds = {}
        for key, field_name in (("lengthscale_bounds_m", "lengthscale_bounds"),
                                ("signal_variance_bounds", "signal_variance_bounds"),
                                ("noise_bounds", "noise_bounds")):
            value = _get(backend_doc, key, f"{path}.backend", None, None)
            if value is not None:
                value = tuple(float(v) for v in value)
                if len(value) != 2 or not 0 < value[0] <= value[1]:
                    raise ConfigError(f"{path}.backend.{key} must be [low, high] with 0 < low <= high",
                                      f"{path}.backend.{key}")
            bounds[field_name] = value
        backend = BackendSpec("gp", kernel=_get(backend_doc, "kernel", f"{path}.backend", str, "matern-3/2"),
                              **bounds)
        if backend.kernel not in FAMILIES:
            raise ConfigError(f"{path}.backend.kernel must be one of {FAMILIES}", f"{path}.backend.kernel")
    else:
        raise ConfigError(f"{path}.backend.kind must be gmm or gp", f"{path}.backend.kind")
    signal = _get(doc, "input", path, str, TIME_INPUT)
    if signal not in (TIME_INPUT, EXTERNAL_INPUT):
        raise ConfigError(f"{path}.input must be time or external", f"{path}.input")
    sign = _get(doc, "sign", path, int, 1)
    if sign not in (1, -1):
        raise ConfigError(f"{path}.sign must be +1 or -1", f"{path}.sign")
    spec = ControllerSpec(
        name=name, type=kind, gains=gains, backend=backend, input=signal,
        feedforward=_get(doc, "feedforward", path, bool, False), sign=sign,
        zero_velocity_reference=_get(doc, "zero_velocity_reference", path, bool, False),
    )
    if spec.feedforward and (spec.zero_velocity_reference or kind != ctl.JOINT):
        raise ConfigError(f"{path}.feedforward is only supported for joint controllers with a velocity reference",
                          f"{path}.feedforward")
    return spec


def _boxes_overlap(a, b):
    ca, ha = np.asarray(a["center_m"], float), np.asarray(a["half_extent_m"], float)
    cb, hb = np.asarray(b["center_m"], float), np.asarray(b["half_extent_m"], float)
    return bool(np.all(np.abs(ca - cb) < ha + hb))


def _validate_painting(demos):
    for key in ("region_a", "region_b"):
        region = _get(demos, key, "demonstrations", dict)
        for sub in ("center_m", "half_extent_m"):
            value = np.asarray(_get(region, sub, f"demonstrations.{key}"), dtype=float)
            if value.shape != (TASK_DIM,):
                raise ConfigError(f"demonstrations.{key}.{sub} must be a {TASK_DIM}-vector",
                                  f"demonstrations.{key}.{sub}")
        if np.any(np.asarray(region["half_extent_m"], float) <= 0):
            raise ConfigError(f"demonstrations.{key}.half_extent_m must be positive",
                              f"demonstrations.{key}.half_extent_m")
    if _boxes_overlap(demos["region_a"], demos["region_b"]):
        raise ConfigError("demonstrations.region_a and demonstrations.region_b overlap",
                          "demonstrations.region_a,demonstrations.region_b")


def parse_config(doc):
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object", "")
    scenario = _get(doc, "scenario", "", str)
    if scenario not in (SHAKER, PAINTING):
        raise ConfigError("scenario must be 'shaker' or 'painting'", "scenario")
    if "seed" not in doc:
        raise ConfigError("missing field seed", "seed")
    seed = _get(doc, "seed", "", int)
    robot = _parse_robot(_get(doc, "robot", "", dict))
    env = _parse_env(doc.get("environment"))
    ctrl_docs = _get(doc, "controllers", "", list)
    if not ctrl_docs:
        raise ConfigError("at least one controller is required", "controllers")
    controllers = tuple(_parse_controller(c, i, robot.n) for i, c in enumerate(ctrl_docs))
    names = [c.name for c in controllers]
    if len(set(names)) != len(names):
        raise ConfigError("controller names must be unique", "controllers")
    demos = _get(doc, "demonstrations", "", dict)
    if scenario == PAINTING:
        _validate_painting(demos)
    integration = doc.get("integration", {})
    dt = _get(integration, "dt_s", "integration", float, 1e-3)
    if not dt > 0:
        raise ConfigError("integration.dt_s must be positive", "integration.dt_s")
    fusion_doc = doc.get("fusion", {})
    eps = _get(fusion_doc, "epsilon_scale", "fusion", float, 1e-6)
    if not eps > 0:
        raise ConfigError("fusion.epsilon_scale must be positive", "fusion.epsilon_scale")
    return ScenarioConfig(
        scenario=scenario, seed=seed, robot=robot, env=env, controllers=controllers,
        demonstrations=demos, reproduction=_get(doc, "reproduction", "", dict),
        evaluation=doc.get("evaluation", {}), dt=dt, epsilon_scale=eps, raw=copy.deepcopy(doc),
    )


def load_config(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}", "config") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration {path} is not valid JSON: {exc}", "config") from exc
    return parse_config(doc)


def canonical_json(doc):
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def config_hash(config):
    return hashlib.sha256(canonical_json(config.raw).encode()).hexdigest()
