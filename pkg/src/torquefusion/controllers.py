"""
Torque controllers written as affine maps of their reference, tau = A @ ref + b.

``A`` and ``b`` depend on the current robot state (and sensed force), so they
are rebuilt every control tick and never cached.
"""
from dataclasses import dataclass

import numpy as np

from . import dynamics
from .errors import ContractError

JOINT = "joint"
CARTESIAN = "cartesian"
FORCE = "force"


def _diag(values, size, name):
    values = np.asarray(values, dtype=float)
    if values.ndim == 2:
        if values.shape != (size, size) or np.count_nonzero(values - np.diag(np.diag(values))):
            raise ContractError(f"{name} must be a diagonal {size}x{size} matrix")
        values = np.diag(values)
    values = np.broadcast_to(values, (size,)).astype(float)
    if np.any(values < 0):
        raise ContractError(f"{name} entries must be non-negative")
    return np.diag(values)


@dataclass(frozen=True)
class GainSet:
    """Diagonal gain matrices; each field accepts a vector of diagonal entries or a matrix."""
    Kq_p: np.ndarray
    Kq_d: np.ndarray
    Kx_p: np.ndarray
    Kx_d: np.ndarray
    Kf_p: np.ndarray

    @classmethod
    def from_diagonals(cls, n, Kq_p=0.0, Kq_d=0.0, Kx_p=0.0, Kx_d=0.0, Kf_p=0.0, task_dim=dynamics.TASK_DIM):
        return cls(
            Kq_p=_diag(Kq_p, n, "Kq_p"),
            Kq_d=_diag(Kq_d, n, "Kq_d"),
            Kx_p=_diag(Kx_p, task_dim, "Kx_p"),
            Kx_d=_diag(Kx_d, task_dim, "Kx_d"),
            Kf_p=_diag(Kf_p, task_dim, "Kf_p"),
        )

    @property
    def n(self):
        return self.Kq_p.shape[0]


@dataclass(frozen=True)
class LinearController:
    A: np.ndarray
    b: np.ndarray
    space: str
    feedforward: bool = False

    @property
    def reference_dim(self):
        return self.A.shape[1]

    @property
    def n(self):
        return self.A.shape[0]

    def __call__(self, reference):
        reference = np.asarray(reference, dtype=float)
        if reference.shape != (self.reference_dim,):
            raise ContractError(f"reference must have shape ({self.reference_dim},)")
        return self.A @ reference + self.b


def _check_state(gains, state):
    if state.q.size != gains.n:
        raise ContractError(f"state has {state.q.size} joints, gains are for {gains.n}")


def joint_linear(gains, state, feedforward=False, zero_velocity_reference=False):
    """Joint-space PD.

    The reference is ``[q_d, qdot_d]`` (plus ``qddot_d`` with ``feedforward``).
    With ``zero_velocity_reference`` the reference is ``q_d`` alone, i.e.
    ``qdot_d = 0`` is folded into ``b``.
    """
    _check_state(gains, state)
    n = gains.n
    Kpd = np.hstack([gains.Kq_p, gains.Kq_d])
    b = -Kpd @ np.concatenate([state.q, state.qdot])
    if zero_velocity_reference:
        if feedforward:
            raise ContractError("feedforward needs a velocity reference")
        A = gains.Kq_p.copy()
    elif feedforward:
        A = np.hstack([Kpd, np.eye(n)])
    else:
        A = Kpd
    return LinearController(A, b, JOINT, feedforward)


def cartesian_linear(gains, model, state, zero_velocity_reference=False):
    """Operational-space PD on the end-effector position, mapped through J^T Mbar.

    Raises :class:`SingularityError` near kinematic singularities.
    """
    _check_state(gains, state)
    J = dynamics.jacobian(model, state.q)
    lam = dynamics.cartesian_inertia(model, state.q)
    x = dynamics.forward_kinematics(model, state.q)
    xdot = J @ state.qdot
    JtL = J.T @ lam
    Kpd = np.hstack([gains.Kx_p, gains.Kx_d])
    b = -JtL @ Kpd @ np.concatenate([x, xdot])
    A = JtL @ gains.Kx_p if zero_velocity_reference else JtL @ Kpd
    return LinearController(A, b, CARTESIAN)


def force_linear(gains, model, state, f_measured, sign=1):
    """Proportional end-effector force controller.

    ``sign=+1`` gives tau = J^T Kf (F_d - F); ``sign=-1`` is the convention for
    references recorded with the sensor's opposite sign, tau = J^T Kf (F - F_d).
    """
    _check_state(gains, state)
    if sign not in (1, -1):
        raise ContractError("sign must be +1 or -1")
    f_measured = np.asarray(f_measured, dtype=float)
    if f_measured.shape != (gains.Kf_p.shape[0],):
        raise ContractError("f_measured has the wrong dimension")
    JtK = dynamics.jacobian(model, state.q).T @ gains.Kf_p
    return LinearController(sign * JtK, -sign * JtK @ f_measured, FORCE)
