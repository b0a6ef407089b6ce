"""
Planar n-link revolute manipulator with point masses at the link tips.

Everything here is closed form: forward kinematics, the end-effector Jacobian,
the inertia matrix, a Christoffel-symbol Coriolis matrix, the gravity vector,
the Cartesian inertia, a unilateral spring-damper contact plane and a
semi-implicit Euler integrator.  Gravity acts along the negative second
task-space axis.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ContractError, IntegrationError, SingularityError

TASK_DIM = 2
SINGULARITY_CONDITION = 1e8


def _as_vector(x, n, name):
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ContractError(f"{name} must have shape ({n},), got {x.shape}")
    return x


@dataclass(frozen=True)
class RobotModel:
    link_lengths: np.ndarray
    link_masses: np.ndarray
    gravity: float = 9.81
    joint_damping: np.ndarray = None

    def __post_init__(self):
        lengths = np.asarray(self.link_lengths, dtype=float).ravel()
        masses = np.asarray(self.link_masses, dtype=float).ravel()
        n = lengths.size
        if n < 2:
            raise ContractError("a RobotModel needs at least 2 links")
        if masses.shape != (n,):
            raise ContractError("link_masses must match link_lengths")
        damping = self.joint_damping
        damping = np.full(n, 0.1) if damping is None else np.broadcast_to(
            np.asarray(damping, dtype=float), (n,)).copy()
        if np.any(lengths <= 0) or np.any(masses <= 0):
            raise ContractError("link lengths and masses must be positive")
        if np.any(damping < 0):
            raise ContractError("joint_damping must be non-negative")
        if not np.isfinite(self.gravity):
            raise ContractError("gravity must be finite")
        object.__setattr__(self, "link_lengths", lengths)
        object.__setattr__(self, "link_masses", masses)
        object.__setattr__(self, "joint_damping", damping)
        object.__setattr__(self, "gravity", float(self.gravity))

    @property
    def n(self):
        return self.link_lengths.size


@dataclass(frozen=True)
class RobotState:
    q: np.ndarray
    qdot: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).ravel()
        qdot = np.asarray(self.qdot, dtype=float).ravel()
        if q.shape != qdot.shape:
            raise ContractError("q and qdot must have the same length")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qdot)) and np.isfinite(self.t)):
            raise ContractError("RobotState entries must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qdot", qdot)
        object.__setattr__(self, "t", float(self.t))


@dataclass(frozen=True)
class ContactEnvironment:
    """Frictionless plane; the solid occupies ``normal . x > offset``.

    ``plane_normal`` points into the solid, so the reaction on the
    end-effector is along ``-plane_normal``.
    """
    plane_normal: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0]))
    plane_offset: float = 0.0
    stiffness: float = 0.0
    damping: float = 0.0
    enabled: bool = False

    def __post_init__(self):
        normal = np.asarray(self.plane_normal, dtype=float).ravel()
        if normal.shape != (TASK_DIM,) or abs(np.linalg.norm(normal) - 1.0) > 1e-12:
            raise ContractError("plane_normal must be a unit 2-vector")
        if self.stiffness < 0 or self.damping < 0:
            raise ContractError("contact stiffness and damping must be non-negative")
        object.__setattr__(self, "plane_normal", normal)
        object.__setattr__(self, "plane_offset", float(self.plane_offset))
        object.__setattr__(self, "stiffness", float(self.stiffness))
        object.__setattr__(self, "damping", float(self.damping))
        object.__setattr__(self, "enabled", bool(self.enabled))


NO_CONTACT = ContactEnvironment()


def _absolute_angles(q):
    return np.cumsum(q)


@lru_cache(maxsize=None)
def _lower_mask(n):
    return np.tril(np.ones((n, n)))[:, :, None]


def _partial_sums(contrib):
    """P[k, i] = sum of contrib[i..k] for i <= k, else 0; shape (n, n, 2)."""
    cs = np.cumsum(contrib, axis=0)
    before = np.concatenate([np.zeros_like(cs[:1]), cs[:-1]])
    return (cs[:, None, :] - before[None, :, :]) * _lower_mask(contrib.shape[0])


_last_jacobians = (None, None, None)


def _tip_jacobians(model, q):
    """Jacobians of every link tip, shape (n, 2, n); tip k depends on joints 0..k.

    The most recent evaluation is memoized: a control tick asks for the same
    configuration several times.  The cache entry is swapped as one tuple,
    so concurrent callers never see a mismatched key and value.  The
    returned array must not be mutated.
    """
    global _last_jacobians
    key = q.tobytes()
    cached_model, cached_key, cached = _last_jacobians
    if cached_model is model and cached_key == key:
        return cached
    jacs = _compute_tip_jacobians(model, q)
    jacs.flags.writeable = False
    _last_jacobians = (model, key, jacs)
    return jacs


def _compute_tip_jacobians(model, q):
    theta = _absolute_angles(q)
    # column contributions of each link: l_a * [-sin, cos]
    contrib = model.link_lengths[:, None] * np.stack([-np.sin(theta), np.cos(theta)], axis=1)
    return _partial_sums(contrib).transpose(0, 2, 1)


@lru_cache(maxsize=None)
def _max_index(n):
    return np.maximum.outer(np.arange(n), np.arange(n))


def _tip_jacobian_derivatives(model, q):
    """dJ[k, :, i, j] = d(J_k[:, i]) / d q_j."""
    n = model.n
    theta = _absolute_angles(q)
    contrib = model.link_lengths[:, None] * np.stack([-np.cos(theta), -np.sin(theta)], axis=1)
    sums = _partial_sums(contrib)
    # sums[k, max(i, j)] is zero whenever max(i, j) > k
    return sums[:, _max_index(n), :].transpose(0, 3, 1, 2)


def tip_positions(model, q):
    """Positions of all link tips, shape (n, 2)."""
    q = _as_vector(q, model.n, "q")
    theta = _absolute_angles(q)
    segments = model.link_lengths[:, None] * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    return np.cumsum(segments, axis=0)


def forward_kinematics(model, q):
    return tip_positions(model, q)[-1]


def jacobian(model, q):
    q = _as_vector(q, model.n, "q")
    return _tip_jacobians(model, q)[-1].copy()


def end_effector_velocity(model, q, qdot):
    return jacobian(model, q) @ _as_vector(qdot, model.n, "qdot")


def _mass_from(model, jacs):
    M = np.einsum("k,kai,kaj->ij", model.link_masses, jacs, jacs)
    return 0.5 * (M + M.T)


def _mass_derivatives_from(model, q, jacs):
    half = np.einsum("k,kaij,kab->ibj", model.link_masses, _tip_jacobian_derivatives(model, q), jacs)
    return half + half.transpose(1, 0, 2)


def _coriolis_from(dM, qdot):
    # c_ijk = 1/2 (dM_ij/dq_k + dM_ik/dq_j - dM_jk/dq_i)
    christoffel = 0.5 * (dM + dM.transpose(0, 2, 1) - dM.transpose(2, 0, 1))
    return christoffel @ qdot


def _gravity_from(model, jacs):
    return model.gravity * (model.link_masses @ jacs[:, 1, :])


def mass_matrix(model, q):
    q = _as_vector(q, model.n, "q")
    return _mass_from(model, _tip_jacobians(model, q))


def mass_matrix_derivatives(model, q):
    """dM[:, :, j] = dM/dq_j."""
    q = _as_vector(q, model.n, "q")
    return _mass_derivatives_from(model, q, _tip_jacobians(model, q))


def coriolis_matrix(model, q, qdot):
    """Coriolis/centrifugal matrix C with C @ qdot the velocity torque and Mdot - 2C skew."""
    q = _as_vector(q, model.n, "q")
    qdot = _as_vector(qdot, model.n, "qdot")
    return _coriolis_from(mass_matrix_derivatives(model, q), qdot)


def rigid_body_terms(model, q, qdot):
    """(M, C, g, J) evaluated together, sharing the kinematics."""
    q = _as_vector(q, model.n, "q")
    qdot = _as_vector(qdot, model.n, "qdot")
    jacs = _tip_jacobians(model, q)
    C = _coriolis_from(_mass_derivatives_from(model, q, jacs), qdot)
    return _mass_from(model, jacs), C, _gravity_from(model, jacs), jacs[-1].copy()


def potential_energy(model, q):
    heights = tip_positions(model, q)[:, 1]
    return float(model.gravity * np.dot(model.link_masses, heights))


def gravity_vector(model, q):
    q = _as_vector(q, model.n, "q")
    return _gravity_from(model, _tip_jacobians(model, q))


def kinetic_energy(model, q, qdot):
    qdot = _as_vector(qdot, model.n, "qdot")
    return 0.5 * float(qdot @ mass_matrix(model, q) @ qdot)


def cartesian_inertia(model, q, max_condition=SINGULARITY_CONDITION):
    """(J M^-1 J^T)^-1, guarded by a condition-number check."""
    q = _as_vector(q, model.n, "q")
    J = jacobian(model, q)
    inv_lambda = J @ np.linalg.solve(mass_matrix(model, q), J.T)
    inv_lambda = 0.5 * (inv_lambda + inv_lambda.T)
    cond = np.linalg.cond(inv_lambda)
    if not np.isfinite(cond) or cond > max_condition:
        raise SingularityError(f"J M^-1 J^T is near-singular (condition {cond:.3g})", cond)
    lam = np.linalg.inv(inv_lambda)
    return 0.5 * (lam + lam.T)


def dynamics_compensation(model, state, terms=None):
    """tau_dyn = C(q, qdot) qdot + g(q); no inertial feed-forward.

    ``terms`` may carry :func:`rigid_body_terms` already evaluated at ``state``.
    """
    _, C, g, _ = terms or rigid_body_terms(model, state.q, state.qdot)
    return C @ state.qdot + g


def contact_force(env, x, xdot):
    """Force exerted by the plane on the end-effector."""
    x = _as_vector(x, TASK_DIM, "x")
    xdot = _as_vector(xdot, TASK_DIM, "xdot")
    if not env.enabled:
        return np.zeros(TASK_DIM)
    depth = env.plane_normal @ x - env.plane_offset
    if depth <= 0.0:
        return np.zeros(TASK_DIM)
    speed_in = max(0.0, env.plane_normal @ xdot)
    return -env.plane_normal * (env.stiffness * depth + env.damping * speed_in)


def sensed_force(model, env, state):
    x = forward_kinematics(model, state.q)
    xdot = end_effector_velocity(model, state.q, state.qdot)
    return contact_force(env, x, xdot)


def joint_acceleration(model, env, state, tau_u, terms=None):
    tau_u = _as_vector(tau_u, model.n, "tau_u")
    q, qdot = state.q, state.qdot
    M, C, g, J = terms or rigid_body_terms(model, q, qdot)
    f_env = contact_force(env, forward_kinematics(model, q), J @ qdot)
    rhs = tau_u + J.T @ f_env - C @ qdot - g - model.joint_damping * qdot
    return np.linalg.solve(M, rhs)


def step(model, env, state, tau_u, dt, terms=None):
    """Advance one semi-implicit Euler step of length ``dt``."""
    if not dt > 0:
        raise ContractError("dt must be positive")
    qddot = joint_acceleration(model, env, state, tau_u, terms)
    if not np.all(np.isfinite(qddot)):
        raise IntegrationError(f"non-finite joint acceleration at t={state.t:.6g}")
    qdot = state.qdot + qddot * dt
    q = state.q + qdot * dt
    return RobotState(q, qdot, state.t + dt)
