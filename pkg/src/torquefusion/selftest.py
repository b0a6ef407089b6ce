"""
Embedded invariant suite behind ``torquefusion selftest``.

Each check returns ``(passed, detail)``.  The table printed by
:func:`run_all` has one line per check and no timing or other run-dependent
text, so two runs print the same bytes.  Functions under test are looked up
through their modules at call time, which lets tests inject faults.
"""
import numpy as np
from scipy import optimize

from . import dynamics, fusion, gmm, gpr

SEED = 20240607


def _random_spd(rng, n, scale=1.0):
    B = rng.standard_normal((n, n))
    return scale * (B @ B.T + 0.1 * np.eye(n))


def _arm(gravity=9.81):
    return dynamics.RobotModel([0.5, 0.4, 0.3], [1.2, 0.9, 0.6], gravity=gravity, joint_damping=0.0)


def check_mass_matrix():
    rng = np.random.default_rng(SEED)
    robot = _arm()
    worst_asym, min_eig = 0.0, np.inf
    for _ in range(20):
        M = dynamics.mass_matrix(robot, rng.uniform(-np.pi, np.pi, robot.n))
        worst_asym = max(worst_asym, np.max(np.abs(M - M.T)))
        min_eig = min(min_eig, np.linalg.eigvalsh(M).min())
    return worst_asym < 1e-12 and min_eig > 0, f"asymmetry {worst_asym:.1e}, min eigenvalue {min_eig:.3g}"


def check_skew_symmetry():
    rng = np.random.default_rng(SEED + 1)
    robot = _arm()
    worst = 0.0
    for _ in range(20):
        q, qdot, v = rng.uniform(-np.pi, np.pi, robot.n), rng.standard_normal(robot.n), rng.standard_normal(robot.n)
        dM = dynamics.mass_matrix_derivatives(robot, q)
        Mdot = dM @ qdot
        C = dynamics.coriolis_matrix(robot, q, qdot)
        worst = max(worst, abs(v @ (Mdot - 2.0 * C) @ v))
    return worst < 1e-8, f"max |v'(Mdot - 2C)v| {worst:.1e}"


def check_jacobian():
    rng = np.random.default_rng(SEED + 2)
    robot = _arm()
    worst, h = 0.0, 1e-6
    for _ in range(20):
        q = rng.uniform(-np.pi, np.pi, robot.n)
        J = dynamics.jacobian(robot, q)
        fd = np.column_stack([(dynamics.forward_kinematics(robot, q + h * e) -
                               dynamics.forward_kinematics(robot, q - h * e)) / (2 * h) for e in np.eye(robot.n)])
        worst = max(worst, np.max(np.abs(J - fd)))
    return worst < 1e-6, f"max |J - finite difference| {worst:.1e}"


def check_energy_drift():
    """Free, gravity-free, undamped arm: kinetic energy is conserved."""
    robot = _arm(gravity=0.0)
    state = dynamics.RobotState([0.4, -0.3, 0.2], [0.8, -0.5, 1.1])
    e0 = dynamics.kinetic_energy(robot, state.q, state.qdot)
    tau = np.zeros(robot.n)
    for _ in range(1000):
        state = dynamics.step(robot, dynamics.NO_CONTACT, state, tau, 1e-3)
    drift = abs(dynamics.kinetic_energy(robot, state.q, state.qdot) - e0) / e0
    return drift < 1e-3, f"relative kinetic energy drift {drift:.1e} over 1000 steps"


def check_fusion_oracle():
    """Fused mean against a numerical minimizer of the weighted least-squares cost."""
    rng = np.random.default_rng(SEED + 3)
    worst_mean, worst_cov = 0.0, 0.0
    for _ in range(20):
        n, P = 3, int(rng.integers(2, 5))
        dists = [fusion.precision(fusion.GaussianBelief(rng.standard_normal(n), _random_spd(rng, n)))
                 for _ in range(P)]
        fused = fusion.fuse(dists)
        H = sum(d.precision for d in dists)
        grad = lambda tau, dists: 2.0 * sum(d.precision @ (tau - d.mean) for d in dists)
        res = optimize.minimize(fusion.fusion_objective, np.zeros(n), args=(dists,), jac=grad,
                                method="BFGS", options={"gtol": 1e-12, "maxiter": 500})
        worst_mean = max(worst_mean, np.max(np.abs(fused.mean - res.x)))
        worst_cov = max(worst_cov, np.max(np.abs(fused.cov - np.linalg.inv(H))))
    ok = worst_mean < 1e-6 and worst_cov < 1e-8
    return ok, f"max |mean - minimizer| {worst_mean:.1e}, max |cov - inv(sum precision)| {worst_cov:.1e}"


def check_em_monotone():
    rng = np.random.default_rng(SEED + 4)
    t = np.linspace(0.0, 1.0, 150)
    data = np.column_stack([t, np.sin(2 * np.pi * t) + 0.1 * rng.standard_normal(t.size)])
    _, trace = gmm.em_fit(data, 4, seed=SEED)
    drops = np.diff(trace)
    worst = float(-drops.min()) if drops.size else 0.0
    return worst <= 1e-9, f"{len(trace)} log-likelihood values, largest decrease {max(worst, 0.0):.1e}"


def check_gp_reversion():
    rng = np.random.default_rng(SEED + 5)
    X = rng.uniform(-1.0, 1.0, (30, 2))
    Y = np.column_stack([np.sin(3 * X[:, 0]), X[:, 1] ** 2])
    prior = np.array([0.5, -0.25])
    kernel = gpr.Kernel(gpr.MATERN32, 0.3, 0.8)
    model = gpr.gp_fit(X, Y, kernel, 1e-4, prior)
    belief = gpr.gp_predict(model, [40.0, -40.0])
    mean_err = np.max(np.abs(belief.mean - prior))
    var_err = abs(belief.cov[0, 0] - kernel.signal_variance)
    tol = 1e-3 * kernel.signal_variance
    return mean_err < tol and var_err < tol, f"far-field mean error {mean_err:.1e}, variance error {var_err:.1e}"


CHECKS = (
    ("dynamics.mass_matrix_spd", check_mass_matrix),
    ("dynamics.skew_symmetry", check_skew_symmetry),
    ("dynamics.jacobian_fd", check_jacobian),
    ("dynamics.energy_drift", check_energy_drift),
    ("fusion.minimizer_oracle", check_fusion_oracle),
    ("gmm.em_monotone", check_em_monotone),
    ("gpr.prior_reversion", check_gp_reversion),
)


def run_all(out=print):
    """Print one ``PASS``/``FAIL`` line per check; returns the names of failed checks."""
    failed = []
    width = max(len(name) for name, _ in CHECKS)
    for name, check in CHECKS:
        try:
            ok, detail = check()
        except Exception as exc:  # a crash is a failure of that check, not of the suite
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        out(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}")
        if not ok:
            failed.append(name)
    out(f"{len(CHECKS) - len(failed)}/{len(CHECKS)} checks passed")
    return failed
