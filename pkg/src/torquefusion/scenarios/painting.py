"""
Handover-then-paint scenario.

A human hand point ``u`` in the plane drives both controllers.  One
demonstration is recorded per sub-task, each in its own input region: in
region A the end-effector follows the hand (Cartesian sub-task), in region B
the arm applies joint-space strokes as the hand moves up and down (joint
sub-task).  Both regression models revert to a neutral posture away from
their region.
"""
import numpy as np

from .. import controllers as ctl
from .. import dynamics
from ..errors import GenerationError
from .demos import Demonstration
from .models import Dataset
from .shaker import inverse_kinematics

OUTSIDE, REGION_A, REGION_B = 0, 1, 2


def neutral_pose(config):
    """Neutral joint posture m_q and the matching end-effector position m_x."""
    m_q = np.asarray(config.demonstrations["neutral_pose_rad"], dtype=float)
    if m_q.shape != (config.robot.n,):
        raise GenerationError(f"neutral_pose_rad must have {config.robot.n} entries")
    return m_q, dynamics.forward_kinematics(config.robot, m_q)


def _box(region):
    return np.asarray(region["center_m"], float), np.asarray(region["half_extent_m"], float)


def region_labels(config, u):
    """OUTSIDE / REGION_A / REGION_B for each row of ``u``."""
    u = np.atleast_2d(u)
    labels = np.full(len(u), OUTSIDE)
    for key, tag in (("region_a", REGION_A), ("region_b", REGION_B)):
        c, h = _box(config.demonstrations[key])
        labels[np.all(np.abs(u - c) <= h, axis=1)] = tag
    return labels


def handover_target(config, u):
    """End-effector position the handover demonstration associates with hand point ``u``."""
    d = config.demonstrations
    c, _ = _box(d["region_a"])
    ho = d["handover"]
    return np.asarray(ho["target_center_m"], float) + ho["gain"] * (np.atleast_2d(u) - c)


def stroke_posture(config, u):
    """Joint configuration the painting demonstration associates with hand point ``u``."""
    d = config.demonstrations
    c, h = _box(d["region_b"])
    pt = d["painting"]
    s = np.sin(0.5 * np.pi * (np.atleast_2d(u)[:, 1] - c[1]) / h[1])
    return np.asarray(pt["posture_rad"], float) + s[:, None] * np.asarray(pt["stroke_rad"], float)


def _hand_path(rng, region, samples, cycles, jitter):
    """Lissajous sweep covering the box, with small hand tremor."""
    c, h = _box(region)
    s = np.linspace(0.0, 1.0, samples)
    path = c + 0.95 * h * np.column_stack([np.sin(2 * np.pi * cycles[0] * s),
                                           np.sin(2 * np.pi * cycles[1] * s + 0.25 * np.pi)])
    path = path + jitter * rng.standard_normal(path.shape)
    return np.clip(path, c - h, c + h)


def _record(robot, t, q, u, demo_id, label):
    qdot = np.gradient(q, t, axis=0)
    x = np.array([dynamics.forward_kinematics(robot, qi) for qi in q])
    xdot = np.array([dynamics.jacobian(robot, qi) @ vi for qi, vi in zip(q, qdot)])
    demo = Demonstration(t=t, q=q, qdot=qdot, x=x, xdot=xdot, F=np.zeros_like(x), demo_id=demo_id,
                         phase_labels=np.full(len(t), label))
    return demo, u


def record_demonstrations(config):
    """One demonstration per sub-task, each paired with its hand-point input."""
    robot, d = config.robot, config.demonstrations
    rng = np.random.default_rng(config.seed)
    ho, pt = d["handover"], d["painting"]

    u_a = _hand_path(rng, d["region_a"], int(ho["samples"]), ho["sweep_cycles"], ho["hand_jitter_m"])
    targets = handover_target(config, u_a) + ho["noise_m"] * rng.standard_normal((len(u_a), 2))
    seed = np.asarray(d["ik_seed_rad"], float)
    q_a = []
    for target in targets:
        seed = inverse_kinematics(robot, target, seed)
        q_a.append(seed)
    t_a = np.linspace(0.0, ho["duration_s"], len(u_a))
    handover = _record(robot, t_a, np.array(q_a), u_a, 1, REGION_A)

    u_b = _hand_path(rng, d["region_b"], int(pt["samples"]), pt["sweep_cycles"], pt["hand_jitter_m"])
    q_b = stroke_posture(config, u_b) + pt["noise_rad"] * rng.standard_normal((len(u_b), robot.n))
    t_b = np.linspace(0.0, pt["duration_s"], len(u_b))
    painting = _record(robot, t_b, q_b, u_b, 2, REGION_B)
    return handover, painting


def generate_painting_demos(config):
    """Per-controller datasets ``[u; x]`` (Cartesian) and ``[u; q]`` (joint) with their prior means."""
    m_q, m_x = neutral_pose(config)
    (demo_a, u_a), (demo_b, u_b) = record_demonstrations(config)
    inputs = ("u1_m", "u2_m")
    datasets = {}
    for spec in config.controllers:
        if spec.input != "external":
            raise GenerationError(f"controller {spec.name!r} must be driven by the external input")
        if spec.type == ctl.CARTESIAN:
            data = np.column_stack([u_a, demo_a.x])
            datasets[spec.name] = Dataset(spec.name, inputs, ("x1_m", "x2_m"), data,
                                          np.full(len(data), demo_a.demo_id), prior_mean=m_x)
        elif spec.type == ctl.JOINT:
            names = tuple(f"q{i + 1}_rad" for i in range(config.robot.n))
            data = np.column_stack([u_b, demo_b.q])
            datasets[spec.name] = Dataset(spec.name, inputs, names, data,
                                          np.full(len(data), demo_b.demo_id), prior_mean=m_q)
        else:
            raise GenerationError(f"the painting scenario has no demonstrations for a {spec.type} controller")
    return datasets


def input_path(config):
    """Scripted hand path: piecewise-linear interpolation of the configured waypoints."""
    path = config.reproduction["input_path"]
    times = np.asarray(path["times_s"], float)
    points = np.asarray(path["waypoints_m"], float)
    if len(times) != len(points) or np.any(np.diff(times) < 0):
        raise GenerationError("input_path needs one non-decreasing time per waypoint")

    def signal(t):
        return np.array([np.interp(t, times, points[:, k]) for k in range(points.shape[1])])
    return signal


def initial_state(config):
    m_q, _ = neutral_pose(config)
    return dynamics.RobotState(m_q, np.zeros(config.robot.n), 0.0)


def _time_in_label(t, labels):
    """Seconds elapsed since the region label last changed, per tick."""
    since = np.empty_like(t)
    start = t[0]
    for k in range(len(t)):
        if k and labels[k] != labels[k - 1]:
            start = t[k]
        since[k] = t[k] - start
    return since


def _time_still(t, u):
    """Seconds the input has been stationary, per tick."""
    moving = np.r_[True, np.any(np.diff(u, axis=0) != 0.0, axis=1)]
    since = np.empty_like(t)
    start = t[0]
    for k in range(len(t)):
        if moving[k] and k:
            start = t[k]
        since[k] = t[k] - start
    return since


def _transition_mask(t, labels, half_width):
    changes = t[1:][labels[1:] != labels[:-1]]
    mask = np.zeros(len(t), dtype=bool)
    for tc in changes:
        mask |= np.abs(t - tc) <= half_width
    return mask


def painting_metrics(config, log):
    ev = config.evaluation
    m_q, _ = neutral_pose(config)
    labels = region_labels(config, log.u)
    since = _time_in_label(log.t, labels)
    transition = _transition_mask(log.t, labels, ev["transition_half_width_s"])
    # settling is judged once the hand has been parked outside both regions
    outside = (labels == OUTSIDE) & (_time_still(log.t, log.u) >= ev["settle_outside_s"])
    in_a = (labels == REGION_A) & (since >= ev["settle_inside_s"]) & ~transition
    in_b = (labels == REGION_B) & (since >= ev["settle_inside_s"]) & ~transition

    settle = np.abs(log.q[outside] - m_q).max(axis=0) if outside.any() else np.full(log.n, np.nan)
    ee_err = np.linalg.norm(log.x[in_a] - handover_target(config, log.u[in_a]), axis=1)
    joint_err = np.abs(log.q[in_b] - stroke_posture(config, log.u[in_b]))

    step = np.linalg.norm(np.diff(log.tau_hat, axis=0), axis=1)
    transition = transition[1:]
    within = ~transition
    max_transition = float(step[transition].max()) if transition.any() else 0.0
    max_within = float(step[within].max()) if within.any() else 0.0
    return {
        "scenario": "painting",
        "ticks": len(log),
        "failed": bool(log.failed),
        "neutral_pose_rad": m_q.tolist(),
        "outside_ticks": int(outside.sum()),
        "neutral_settling_error_rad": settle.tolist(),
        "region_a_ticks": int(in_a.sum()),
        "region_a_max_tracking_error_m": float(ee_err.max()) if ee_err.size else None,
        "region_a_mean_tracking_error_m": float(ee_err.mean()) if ee_err.size else None,
        "region_b_ticks": int(in_b.sum()),
        "region_b_max_joint_error_rad": joint_err.max(axis=0).tolist() if joint_err.size else None,
        "region_b_rms_joint_error_rad": np.sqrt((joint_err ** 2).mean(axis=0)).tolist() if joint_err.size else None,
        "max_torque_step_transition_Nm": max_transition,
        "max_torque_step_within_phase_Nm": max_within,
        "transition_step_ratio": max_transition / max_within if max_within > 0 else None,
    }
