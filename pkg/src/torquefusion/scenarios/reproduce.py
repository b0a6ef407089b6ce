"""
Closed-loop movement synthesis.

Every tick: query each trained model for a Gaussian reference, rebuild each
controller's affine map from the current state and sensed force, fuse the
resulting torque distributions, add the dynamics compensation and integrate.
"""
from dataclasses import dataclass, field

import numpy as np

from .. import controllers as ctl
from .. import dynamics, fusion
from ..errors import IntegrationError, SingularityError
from .config import EXTERNAL_INPUT


def build_controller(spec, robot, state, f_measured):
    if spec.type == ctl.JOINT:
        return ctl.joint_linear(spec.gains, state, feedforward=spec.feedforward,
                                zero_velocity_reference=spec.zero_velocity_reference)
    if spec.type == ctl.CARTESIAN:
        return ctl.cartesian_linear(spec.gains, robot, state,
                                    zero_velocity_reference=spec.zero_velocity_reference)
    return ctl.force_linear(spec.gains, robot, state, f_measured, sign=spec.sign)


@dataclass
class ReproductionLog:
    names: tuple
    n: int
    input_dim: int = 0
    t: list = field(default_factory=list)
    q: list = field(default_factory=list)
    qdot: list = field(default_factory=list)
    x: list = field(default_factory=list)
    xdot: list = field(default_factory=list)
    F: list = field(default_factory=list)
    u: list = field(default_factory=list)
    tau_p: list = field(default_factory=list)
    cov_p: list = field(default_factory=list)
    prec_p: list = field(default_factory=list)
    eps_p: list = field(default_factory=list)
    tau_hat: list = field(default_factory=list)
    cov_hat: list = field(default_factory=list)
    tau_u: list = field(default_factory=list)
    failed: bool = False
    message: str = ""

    def finalize(self):
        for name in ("t", "q", "qdot", "x", "xdot", "F", "u", "tau_p", "cov_p", "prec_p", "eps_p",
                     "tau_hat", "cov_hat", "tau_u"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        return self

    def __len__(self):
        return len(self.t)

    def index(self, name):
        return self.names.index(name)

    def window(self, start, stop):
        t = np.asarray(self.t)
        return (t >= start) & (t <= stop)

    def columns(self):
        """Column names and a (ticks, columns) array for the CSV log."""
        cols, parts = ["t_s"], [self.t[:, None]]

        def add(prefix, values, unit):
            cols.extend(f"{prefix}{i + 1}_{unit}" for i in range(values.shape[1]))
            parts.append(values)

        add("q", self.q, "rad")
        add("qdot", self.qdot, "rad_per_s")
        add("x", self.x, "m")
        add("xdot", self.xdot, "m_per_s")
        add("F", self.F, "N")
        if self.input_dim:
            add("u", self.u, "m")
        for p, name in enumerate(self.names):
            add(f"tau_{name}_", self.tau_p[:, p], "Nm")
            add(f"var_{name}_", np.diagonal(self.cov_p[:, p], axis1=1, axis2=2), "Nm2")
        add("tau_hat_", self.tau_hat, "Nm")
        add("var_hat_", np.diagonal(self.cov_hat, axis1=1, axis2=2), "Nm2")
        add("tau_u_", self.tau_u, "Nm")
        return cols, np.hstack(parts)


def reproduce(config, models, duration=None, input_signal=None, initial_state=None, epsilon_scale=None):
    """Run the fusion control loop for ``duration`` seconds.

    ``models`` maps controller names to trained trajectory models.
    ``input_signal`` maps time to the external input point and is required
    when any controller is driven by an external input.  A failed integration
    stops the loop and returns the partial log with ``failed`` set.
    """
    robot, env, dt = config.robot, config.env, config.dt
    rep = config.reproduction
    duration = float(rep.get("duration_s", 1.0) if duration is None else duration)
    eps_scale = config.epsilon_scale if epsilon_scale is None else epsilon_scale
    if initial_state is None:
        initial_state = dynamics.RobotState(rep.get("initial_q_rad", np.zeros(robot.n)), np.zeros(robot.n), 0.0)
    specs = config.controllers
    external = any(s.input == EXTERNAL_INPUT for s in specs)
    if external and input_signal is None:
        raise ValueError("an external input signal is required for externally driven controllers")
    log = ReproductionLog(tuple(s.name for s in specs), robot.n,
                          input_dim=len(np.atleast_1d(input_signal(0.0))) if external else 0)
    state = initial_state
    steps = int(round(duration / dt))
    for _ in range(steps):
        try:
            q, qdot = state.q, state.qdot
            terms = dynamics.rigid_body_terms(robot, q, qdot)
            J = terms[3]
            x = dynamics.forward_kinematics(robot, q)
            xdot = J @ qdot
            F = dynamics.contact_force(env, x, xdot)
            u = np.atleast_1d(input_signal(state.t)) if external else None
            pairs = []
            for spec in specs:
                x_in = u if spec.input == EXTERNAL_INPUT else np.array([state.t])
                ref = models[spec.name].predict(x_in)
                pairs.append((build_controller(spec, robot, state, F), ref))
            result = fusion.task_torque(pairs, epsilon_scale=eps_scale)
            tau_u = result.tau + dynamics.dynamics_compensation(robot, state, terms)
            next_state = dynamics.step(robot, env, state, tau_u, dt, terms)
        except (IntegrationError, SingularityError, ValueError) as exc:
            log.failed, log.message = True, f"t={state.t:.4f}s: {exc}"
            break
        log.t.append(state.t)
        log.q.append(q)
        log.qdot.append(qdot)
        log.x.append(x)
        log.xdot.append(xdot)
        log.F.append(F)
        if external:
            log.u.append(u)
        log.tau_p.append([c.mean for c in result.components])
        log.cov_p.append([c.cov for c in result.components])
        log.prec_p.append([c.precision for c in result.components])
        log.eps_p.append([c.epsilon for c in result.components])
        log.tau_hat.append(result.tau)
        log.cov_hat.append(result.fused.cov)
        log.tau_u.append(tau_u)
        state = next_state
    log.final_state = state
    return log.finalize()


def refuse(log, epsilon_scale):
    """Recompute the fused torque of every logged tick with a different regularization scale."""
    out = np.empty_like(log.tau_hat)
    for k in range(len(log)):
        comps = [fusion.precision(fusion.GaussianBelief(log.tau_p[k, p], log.cov_p[k, p]),
                                  epsilon_scale=epsilon_scale)
                 for p in range(len(log.names))]
        out[k] = fusion.fuse(comps).mean
    return out


def well_excited_basis(log, k, epsilon_abs):
    """Orthonormal basis of torque directions that every controller excites well above ``epsilon_abs``."""
    n = log.n
    weak = []
    for p in range(len(log.names)):
        w, V = np.linalg.eigh(log.cov_p[k, p])
        weak.extend(V[:, w < 100.0 * epsilon_abs].T)
    if not weak:
        return np.eye(n)
    W = np.array(weak)
    _, s, Vt = np.linalg.svd(W)
    rank = int(np.sum(s > 1e-8))
    return Vt[rank:].T


def epsilon_sensitivity(log, scales=(1e-8, 1e-6, 1e-4)):
    """Largest relative change of the fused torque between any two regularization scales.

    Only directions every controller excites well above the largest epsilon
    are compared; the change is an RMS over ticks relative to the RMS fused
    torque at the middle scale.
    """
    fused = [refuse(log, s) for s in scales]
    reference = fused[len(fused) // 2]
    pairs = [(i, j) for i in range(len(scales)) for j in range(i + 1, len(scales))]
    num = dict.fromkeys(pairs, 0.0)
    den = 0.0
    for k in range(len(log)):
        eps_max = max(fusion.default_epsilon(log.cov_p[k, p], max(scales)) for p in range(len(log.names)))
        B = well_excited_basis(log, k, eps_max)
        den += np.sum((B.T @ reference[k]) ** 2)
        for i, j in pairs:
            num[(i, j)] += np.sum((B.T @ (fused[i][k] - fused[j][k])) ** 2)
    if den == 0.0:
        return 0.0
    return float(np.sqrt(max(num.values()) / den))
