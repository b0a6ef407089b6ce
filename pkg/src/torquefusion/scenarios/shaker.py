"""
Press-then-shake scenario.

Each demonstration is a scripted rollout on the simulated arm.  The arm first
pushes against a wall with a target normal force while its posture varies
from demo to demo (wall offset and contact height are perturbed), then lets
go, moves to a shaking posture and oscillates its last joint.  The force
channel is consistent while pressing and noisy afterwards; the joint channels
are the other way round.
"""
import numpy as np
from scipy.signal import lfilter

from .. import controllers as ctl
from .. import dynamics
from ..errors import GenerationError
from .demos import Demonstration, dtw_align, filter_and_subsample
from .models import Dataset

APPROACH, PRESS, RELEASE, SHAKE = 0, 1, 2, 3


def smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def min_jerk(s):
    """Position, velocity and acceleration profiles of a minimum-jerk blend over s in [0, 1]."""
    s = np.clip(s, 0.0, 1.0)
    return (10 * s**3 - 15 * s**4 + 6 * s**5,
            30 * s**2 - 60 * s**3 + 30 * s**4,
            60 * s - 180 * s**2 + 120 * s**3)


def inverse_kinematics(robot, target, q_seed, iters=200, tol=1e-12):
    """Damped least-squares IK converging to the branch nearest ``q_seed``."""
    q = np.array(q_seed, dtype=float)
    for _ in range(iters):
        err = target - dynamics.forward_kinematics(robot, q)
        if err @ err < tol:
            return q
        J = dynamics.jacobian(robot, q)
        q = q + J.T @ np.linalg.solve(J @ J.T + 1e-6 * np.eye(len(err)), err)
    raise GenerationError(f"inverse kinematics did not reach {np.asarray(target).tolist()}")


def band_limited_noise(rng, count, dt, cutoff_hz):
    """Unit-variance noise low-passed by a first-order filter."""
    white = rng.standard_normal(count)
    a = np.exp(-2.0 * np.pi * cutoff_hz * dt)
    colored = lfilter([1.0 - a], [1.0, -a], white)
    std = colored.std()
    return colored / std if std > 0 else colored


def _noise_profile(t, release, ramp, low, high):
    return low + (high - low) * smoothstep((t - release) / ramp)


def rollout(config, rng, demo_id):
    """Simulate one demonstration and return it at the integration rate."""
    robot, dt = config.robot, config.dt
    d = config.demonstrations
    press, rel, shake, noise = d["press"], d["release"], d["shake"], d["sensor_noise"]
    normal = config.env.plane_normal
    tangent = np.array([-normal[1], normal[0]])

    offset = config.env.plane_offset + d["wall_offset_std_m"] * rng.standard_normal()
    height = press["contact_height_m"] + press["contact_height_std_m"] * rng.standard_normal()
    force = press["target_force_N"] * (1.0 + press["force_rel_std"] * rng.standard_normal())
    release = rel["start_s"] + rel["start_std_s"] * rng.standard_normal()
    amp = shake["amplitude_rad"] * (1.0 + shake["amplitude_rel_std"] * rng.standard_normal())
    freq = shake["frequency_Hz"] * (1.0 + shake["frequency_rel_std"] * rng.standard_normal())
    posture = np.asarray(shake["posture_rad"], float) + d["posture_std_rad"] * rng.standard_normal(robot.n)
    joint = int(shake["joint"])

    env = dynamics.ContactEnvironment(normal, offset, config.env.stiffness, config.env.damping, True)
    contact = normal * offset + tangent * height
    q0 = inverse_kinematics(robot, contact, d["ik_seed_rad"])
    state = dynamics.RobotState(q0, np.zeros(robot.n), 0.0)

    steps = int(round(d["duration_s"] / dt))
    unload = release + rel["force_ramp_s"]
    move_end = unload + rel["move_s"]
    kp_x, kd_x = press["tangent_stiffness_N_per_m"], press["cartesian_damping_Ns_per_m"]
    kp_q, kd_q = shake["tracking_stiffness"], shake["tracking_damping"]

    times = np.empty(steps)
    record = {k: np.empty((steps, w)) for k, w in (("q", robot.n), ("qdot", robot.n), ("x", 2), ("xdot", 2), ("F", 2))}
    labels = np.empty(steps, dtype=int)
    q_unload = None
    for k in range(steps):
        t = state.t
        q, qdot = state.q, state.qdot
        terms = dynamics.rigid_body_terms(robot, q, qdot)
        J = terms[3]
        x = dynamics.forward_kinematics(robot, q)
        xdot = J @ qdot
        F = dynamics.contact_force(env, x, xdot)
        times[k] = t
        for name, value in (("q", q), ("qdot", qdot), ("x", x), ("xdot", xdot), ("F", F)):
            record[name][k] = value
        tau = dynamics.dynamics_compensation(robot, state, terms)
        if t < unload:
            push = force * smoothstep((t - press["ramp_start_s"]) / press["ramp_s"])
            push *= 1.0 - smoothstep((t - release) / rel["force_ramp_s"])
            wrench = push * normal + kp_x * (tangent @ (contact - x)) * tangent - kd_x * xdot
            tau = tau + J.T @ wrench
            labels[k] = APPROACH if t < press["ramp_start_s"] else (PRESS if t < release else RELEASE)
        else:
            if q_unload is None:
                q_unload = q.copy()
            if t < move_end:
                s = (t - unload) / rel["move_s"]
                p, v, a = min_jerk(s)
                q_ref = q_unload + p * (posture - q_unload)
                qd_ref = v * (posture - q_unload) / rel["move_s"]
                qdd_ref = a * (posture - q_unload) / rel["move_s"] ** 2
                labels[k] = RELEASE
            else:
                s = t - move_end
                env_s = smoothstep(s / shake["fade_in_s"])
                w = 2.0 * np.pi * freq
                q_ref, qd_ref, qdd_ref = posture.copy(), np.zeros(robot.n), np.zeros(robot.n)
                q_ref[joint] += env_s * amp * np.sin(w * s)
                qd_ref[joint] += env_s * amp * w * np.cos(w * s)
                qdd_ref[joint] -= env_s * amp * w * w * np.sin(w * s)
                labels[k] = SHAKE
            accel = qdd_ref + kp_q * (q_ref - q) + kd_q * (qd_ref - qdot)
            tau = tau + terms[0] @ accel
        state = dynamics.step(robot, env, state, tau, dt, terms)

    normal_force = -record["F"] @ normal
    if normal_force[labels == PRESS].max(initial=0.0) < 0.5 * press["target_force_N"]:
        raise GenerationError(f"demonstration {demo_id} never reached the target contact force")
    if np.any(normal_force[labels == SHAKE] > 0.0):
        raise GenerationError(f"demonstration {demo_id} touches the wall while shaking")
    t = times
    level = _noise_profile(t, release, rel["force_ramp_s"], noise["press_N"], noise["release_N"])
    cutoff = noise["cutoff_Hz"]
    sensed = record["F"] + level[:, None] * np.column_stack(
        [band_limited_noise(rng, steps, dt, cutoff) for _ in range(2)])
    return Demonstration(t=t, q=record["q"], qdot=record["qdot"], x=record["x"], xdot=record["xdot"],
                         F=sensed, demo_id=demo_id, phase_labels=labels)


def initial_state(config):
    """Nominal start: end-effector touching the nominal wall at the nominal contact height."""
    d = config.demonstrations
    normal = config.env.plane_normal
    tangent = np.array([-normal[1], normal[0]])
    contact = normal * config.env.plane_offset + tangent * d["press"]["contact_height_m"]
    q0 = inverse_kinematics(config.robot, contact, d["ik_seed_rad"])
    return dynamics.RobotState(q0, np.zeros(config.robot.n), 0.0)


def record_demonstrations(config):
    """Raw and preprocessed (filtered, subsampled) demonstrations."""
    d = config.demonstrations
    rng = np.random.default_rng(config.seed)
    raw = [rollout(config, rng, i + 1) for i in range(int(d["count"]))]
    processed = [filter_and_subsample(demo, int(d["samples"]), int(d["filter_window"])) for demo in raw]
    return raw, processed


def _names(prefix, count, unit):
    return tuple(f"{prefix}{i + 1}_{unit}" for i in range(count))


def generate_shaker_demos(config):
    """Per-controller datasets: time-indexed force for the force controller, DTW-aligned joint
    positions and velocities for the joint controller."""
    _, demos = record_demonstrations(config)
    n = config.robot.n
    reference = demos[0]
    channels = [reference.channel_index(name, int(k)) for name, k in config.demonstrations["dtw_channels"]]
    aligned = [reference] + [dtw_align(reference, other, channels) for other in demos[1:]]
    datasets = {}
    for spec in config.controllers:
        if spec.type == ctl.FORCE:
            data = np.vstack([np.column_stack([d.t, d.F]) for d in demos])
            ids = np.concatenate([np.full(len(d), d.demo_id) for d in demos])
            datasets[spec.name] = Dataset(spec.name, ("t_s",), _names("F", 2, "N"), data, ids,
                                          meta={"aligned": False})
        elif spec.type == ctl.JOINT:
            cols = [lambda d: d.q] if spec.zero_velocity_reference else [lambda d: d.q, lambda d: d.qdot]
            outputs = _names("q", n, "rad") + (() if spec.zero_velocity_reference else _names("qdot", n, "rad_per_s"))
            data = np.vstack([np.column_stack([d.t] + [c(d) for c in cols]) for d in aligned])
            ids = np.concatenate([np.full(len(d), d.demo_id) for d in aligned])
            datasets[spec.name] = Dataset(spec.name, ("t_s",), outputs, data, ids, meta={"aligned": True})
        else:
            raise GenerationError(f"the shaker scenario has no demonstrations for a {spec.type} controller")
    return datasets


def _by_type(log, config, kind):
    for p, spec in enumerate(config.controllers):
        if spec.type == kind:
            return p
    raise KeyError(kind)


def dominance(log, window_s):
    """Majority vote of argmax trace(precision) over consecutive windows.

    Returns the per-window winner indices, window start times and switch times.
    """
    traces = np.trace(log.prec_p, axis1=2, axis2=3)
    winner = np.argmax(traces, axis=1)
    t = log.t
    edges = np.arange(t[0], t[-1] + 1e-12, window_s)
    labels, starts = [], []
    for start in edges:
        mask = (t >= start) & (t < start + window_s)
        if not mask.any():
            continue
        counts = np.bincount(winner[mask], minlength=traces.shape[1])
        labels.append(int(np.argmax(counts)))
        starts.append(float(start))
    switches = [starts[i] for i in range(1, len(labels)) if labels[i] != labels[i - 1]]
    return labels, starts, switches


def shaker_metrics(config, log, datasets):
    ev = config.evaluation
    f_idx = _by_type(log, config, ctl.FORCE)
    j_idx = _by_type(log, config, ctl.JOINT)
    dev_f = np.linalg.norm(log.tau_hat - log.tau_p[:, f_idx], axis=1)
    dev_j = np.linalg.norm(log.tau_hat - log.tau_p[:, j_idx], axis=1)
    fw = log.window(*ev["force_window_s"])
    sw = log.window(*ev["shake_window_s"])
    normal = config.env.plane_normal
    achieved = float(np.mean(-log.F[fw] @ normal))
    force_set = datasets[config.controllers[f_idx].name]
    rows = force_set.data
    in_window = (rows[:, 0] >= ev["force_window_s"][0]) & (rows[:, 0] <= ev["force_window_s"][1])
    demonstrated = float(np.mean(-rows[in_window, 1:3] @ normal))
    labels, _, switches = dominance(log, ev["dominance_window_s"])
    names = log.names
    return {
        "scenario": "shaker",
        "ticks": len(log),
        "failed": bool(log.failed),
        "force_window_s": list(ev["force_window_s"]),
        "shake_window_s": list(ev["shake_window_s"]),
        "force_window": {
            "mean_deviation_from_force_Nm": float(dev_f[fw].mean()),
            "mean_deviation_from_joint_Nm": float(dev_j[fw].mean()),
            "deviation_ratio": float(dev_f[fw].mean() / dev_j[fw].mean()),
        },
        "shake_window": {
            "mean_deviation_from_force_Nm": float(dev_f[sw].mean()),
            "mean_deviation_from_joint_Nm": float(dev_j[sw].mean()),
            "deviation_ratio": float(dev_j[sw].mean() / dev_f[sw].mean()),
        },
        "achieved_normal_force_N": achieved,
        "demonstrated_normal_force_N": demonstrated,
        "normal_force_relative_error": float(abs(achieved - demonstrated) / abs(demonstrated)),
        "dominance_sequence": [names[i] for i in labels],
        "dominance_switches": len(switches),
        "dominance_switch_times_s": switches,
        "first_dominant": names[labels[0]],
        "last_dominant": names[labels[-1]],
    }
