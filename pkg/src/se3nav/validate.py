"""Embedded invariant suite behind the ``validate`` CLI subcommand.

Every check re-runs the live library code, so a regression (or a deliberate
mutation in testing) is caught at runtime rather than against stored values.
"""

from __future__ import annotations

import numpy as np

from . import engine, gp, scenario, se3


class CheckResult:
    def __init__(self, name, residual, tolerance):
        self.name = name
        self.residual = float(residual)
        self.tolerance = float(tolerance)

    @property
    def passed(self) -> bool:
        return self.residual < self.tolerance


def _rand_pose(rng):
    return se3.GroupElement(se3.exp_so3(rng.uniform(-2.5, 2.5, 3)), rng.uniform(-5, 5, 3))


def _rand_twist(rng, scale=2.0):
    return se3.AlgebraVector(rng.uniform(-scale, scale, 3), rng.uniform(-scale, scale, 3))


def check_group_axioms(seed=0, n=2000) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        a, b, c = (_rand_pose(rng) for _ in range(3))
        lhs = se3.compose(se3.compose(a, b), c).as_matrix()
        rhs = se3.compose(a, se3.compose(b, c)).as_matrix()
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        e = se3.compose(a, se3.inverse(a)).as_matrix()
        worst = max(worst, float(np.max(np.abs(e - np.eye(4)))))
    return CheckResult("group axioms (associativity, inverse)", worst, 1e-10)


def check_exp_log(seed=1, n=1000) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        omega = rng.uniform(-1, 1, 3)
        omega *= rng.uniform(0, 3.0) / max(np.linalg.norm(omega), 1e-12)
        xi = se3.AlgebraVector(omega, rng.uniform(-4, 4, 3))
        back = se3.log_se3(se3.exp_se3(xi))
        worst = max(worst, float(np.max(np.abs(back.as_array() - xi.as_array()))))
    return CheckResult("exp/log roundtrip", worst, 1e-9)


def check_duality(seed=2, n=1000) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        xi, zeta = _rand_twist(rng, 1.0), _rand_twist(rng, 1.0)
        m = se3.CoAlgebraVector(rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3))
        lhs = se3.pairing(se3.ad_star(xi, m), zeta)
        rhs = se3.pairing(m, se3.ad(xi, zeta))
        worst = max(worst, abs(lhs - rhs))
    return CheckResult("ad*/ad duality", worst, 1e-12)


def check_jacobi(seed=3, n=500) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        a, b, c = (_rand_twist(rng) for _ in range(3))
        total = (
            se3.ad(a, se3.ad(b, c)).as_array()
            + se3.ad(b, se3.ad(c, a)).as_array()
            + se3.ad(c, se3.ad(a, b)).as_array()
        )
        worst = max(worst, float(np.max(np.abs(total))))
    return CheckResult("Jacobi identity", worst, 1e-10)


def check_energy_conservation() -> CheckResult:
    M = se3.InertiaOperator(np.diag([0.02, 0.02, 0.04]), 1.3)
    cfg = engine.SimConfig(dt=1e-3, t_end=2.0, integrator="rkmk4", seed=0)
    state = [engine.RigidState(
        se3.GroupElement.identity(),
        se3.AlgebraVector([1.2, -0.8, 2.0], [0.5, 0.1, -0.4]),
    )]
    zero = [se3.CoAlgebraVector.zero()]
    e0 = 0.5 * M.metric(state[0].xi, state[0].xi)
    for _ in range(2000):
        state = engine.step(state, zero, zero, [M], cfg)
    e1 = 0.5 * M.metric(state[0].xi, state[0].xi)
    return CheckResult("free-body energy conservation (2 s)", abs(e1 - e0) / e0, 1e-6)


def check_gp_oracle(seed=4) -> CheckResult:
    rng = np.random.default_rng(seed)
    params = gp.KernelParams(1.0, 1.0, 0.01)
    X = rng.uniform(-2, 2, (10, gp.ENCODING_DIM))
    Y = rng.uniform(-1, 1, (10, gp.OUTPUT_DIM))
    ds = gp.GpDataset(10)
    for x, y in zip(X, Y):
        ds.append(gp.TrainingPair(x, y))
    worst = 0.0
    for _ in range(10):
        x_star = rng.uniform(-2, 2, gp.ENCODING_DIM)
        mean, var = gp.gp_predict(x_star, ds, params)
        K = gp.gram_matrix(X, params)
        k_vec = np.array([gp.se_kernel(x_star, xi, params) for xi in X])
        want_mean = k_vec @ np.linalg.solve(K, Y)
        want_var = max(params.signal_variance - k_vec @ np.linalg.solve(K, k_vec), 0.0)
        worst = max(worst, float(np.max(np.abs(mean - want_mean))), abs(var[0] - want_var))
    return CheckResult("GP prediction vs dense solve", worst, 1e-10)


def check_descent() -> CheckResult:
    cfg = scenario.two_agent_swap(t_end=3.0)
    log = engine.run_episode(cfg)
    max_up = float(np.diff(log.lyapunov).max())
    return CheckResult("nominal Lyapunov descent (2-agent, 3 s)", max_up, 1e-6)


ALL_CHECKS = (
    check_group_axioms,
    check_exp_log,
    check_duality,
    check_jacobi,
    check_energy_conservation,
    check_gp_oracle,
    check_descent,
)


def run_validation(stream=None) -> list:
    import sys

    stream = stream or sys.stdout
    results = [fn() for fn in ALL_CHECKS]
    width = max(len(r.name) for r in results)
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        stream.write(
            f"[{mark}] {r.name:<{width}}  residual {r.residual:.3e}  tolerance {r.tolerance:.1e}\n"
        )
    return results
