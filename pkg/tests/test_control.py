import inspect
import math

import numpy as np
import pytest

from se3nav import control as ctl
from se3nav import engine, gp, navigation as nav, scenario, se3

UAV_M = se3.InertiaOperator(np.diag([0.02, 0.02, 0.04]), 1.3)


def pose(q, R=None):
    return se3.GroupElement(np.eye(3) if R is None else R, q)


def far_two_agents(d=12.0):
    poses = [pose([0.0, 0, 0]), pose([d, 0, 0])]
    geoms = [nav.AgentGeometry(radius=0.75)] * 2
    trees = [nav.build_relation_tree(i, 2) for i in range(2)]
    return poses, geoms, trees


# ---------------------------------------------------------------------------
# gains / theta

def test_gains_require_c_above_K():
    with pytest.raises(ValueError):
        ctl.Gains(K=2.0, c=2.0)
    with pytest.raises(ValueError):
        ctl.Gains(K=-1.0, c=2.0)
    g = ctl.Gains(K=2.0, c=2.5)
    assert g.dissipation >= 0.0


def test_theta_zero_rate():
    g = ctl.Gains(K=1.0, c=2.0)
    xi = se3.AlgebraVector([1.0, 0, 0], [0, 1.0, 0])
    assert ctl.theta(xi, 0.0, UAV_M, g) == 0.0


def test_theta_hand_value():
    # metric value 1 via a pure surge at the right speed
    g = ctl.Gains(K=1.0, c=2.0)
    v = math.sqrt(1.0 / UAV_M.mass)
    xi = se3.AlgebraVector([0.0, 0, 0], [v, 0, 0])
    assert np.isclose(UAV_M.metric(xi, xi), 1.0)
    assert np.isclose(ctl.theta(xi, 0.5, UAV_M, g), -2.0 * 0.5 / math.tanh(1.0))


def test_theta_clamped_at_rest():
    g = ctl.Gains(K=1.0, c=2.0, theta_epsilon=1e-6)
    out = ctl.theta(se3.AlgebraVector.zero(), 0.5, UAV_M, g)
    assert np.isclose(out, -2.0 * 0.5 / math.tanh(1e-6))
    assert np.isfinite(out)


def test_theta_nonpositive_randomized():
    rng = np.random.default_rng(2)
    g = ctl.Gains(K=1.0, c=3.0)
    for _ in range(200):
        xi = se3.AlgebraVector(rng.normal(size=3), rng.normal(size=3))
        assert ctl.theta(xi, float(rng.normal()), UAV_M, g) <= 0.0


def test_theta_product_bounded():
    # |theta| * ||I xi|| stays below the clamp ceiling
    rng = np.random.default_rng(3)
    g = ctl.Gains(K=1.0, c=2.0, theta_epsilon=1e-6)
    for _ in range(200):
        xi = se3.AlgebraVector(rng.normal(size=3) * 1e-3, rng.normal(size=3) * 1e-3)
        rate = float(rng.normal())
        bound = g.c * abs(rate) * np.linalg.norm(UAV_M.apply(xi).as_array()) / math.tanh(g.theta_epsilon)
        assert abs(ctl.theta(xi, rate, UAV_M, g)) * np.linalg.norm(UAV_M.apply(xi).as_array()) <= bound + 1e-9


# ---------------------------------------------------------------------------
# nominal control

def test_nominal_zero_at_equilibrium():
    poses, geoms, trees = far_two_agents()
    twists = [se3.AlgebraVector.zero()] * 2
    params = nav.NavParams()
    gains = ctl.Gains(K=5.0, c=6.0)
    out = ctl.nominal_control(0, poses, twists, nav.GoalConfig(poses[0]), geoms,
                              trees[0], params, gains, UAV_M)
    assert np.linalg.norm(out.u.as_array()) < 1e-8


def test_nominal_pure_translation_offset():
    poses = [pose([1.5, 0, 0])]
    geoms = [nav.AgentGeometry(radius=0.5)]
    tree = nav.build_relation_tree(0, 1)
    twists = [se3.AlgebraVector.zero()]
    out = ctl.nominal_control(0, poses, twists, nav.GoalConfig(pose([0.0, 0, 0])), geoms,
                              tree, nav.NavParams(), ctl.Gains(K=5.0, c=6.0), UAV_M)
    assert np.linalg.norm(out.u.torque) < 1e-8
    assert out.u.force[0] < -1e-3  # pulls toward the goal
    assert abs(out.u.force[1]) < 1e-8 and abs(out.u.force[2]) < 1e-8


def test_nominal_reads_single_goal_only():
    # decentralization is part of the signature: one goal, not a list
    params = inspect.signature(ctl.nominal_control).parameters
    assert "goal" in params and "goals" not in params


def test_nominal_diagnostics_populated():
    poses, geoms, trees = far_two_agents()
    twists = [se3.AlgebraVector([0, 0, 0], [0.5, 0, 0]),
              se3.AlgebraVector([0, 0, 0], [-0.2, 0.1, 0])]
    goal = nav.GoalConfig(pose([6.0, 0, 0]))
    out = ctl.nominal_control(0, poses, twists, goal, geoms, trees[0],
                              nav.NavParams(), ctl.Gains(K=5.0, c=6.0), UAV_M)
    assert out.grad_norm > 0.0
    assert out.psi > 0.0
    assert np.isclose(out.gamma, nav.goal_distance(poses[0], goal))
    assert np.all(np.isfinite(out.u.as_array()))


# ---------------------------------------------------------------------------
# learning control

def test_learning_reduces_to_nominal_with_empty_dataset():
    poses, geoms, trees = far_two_agents()
    twists = [se3.AlgebraVector([0.1, 0, 0], [0.5, 0, 0]),
              se3.AlgebraVector.zero()]
    goal = nav.GoalConfig(pose([6.0, 2.0, 1.0]))
    params = nav.NavParams()
    gains = ctl.Gains(K=5.0, c=6.0)
    kernel = gp.KernelParams()
    bound = gp.BoundParams()
    nominal = ctl.nominal_control(0, poses, twists, goal, geoms, trees[0], params, gains, UAV_M)
    learned = ctl.learning_control(0, poses, twists, goal, geoms, trees[0], params, gains,
                                   UAV_M, gp.GpDataset(10), kernel, bound)
    assert np.array_equal(learned.u.as_array(), nominal.u.as_array())
    assert np.array_equal(learned.gp_mean, np.zeros(6))


def test_learning_subtracts_gp_mean():
    rng = np.random.default_rng(11)
    poses, geoms, trees = far_two_agents()
    twists = [se3.AlgebraVector.zero()] * 2
    goal = nav.GoalConfig(pose([6.0, 0, 0]))
    params = nav.NavParams()
    gains = ctl.Gains(K=5.0, c=6.0)
    kernel = gp.KernelParams(1.0, 5.0, 1e-6)
    bound = gp.BoundParams()
    d_true = np.array([0.0, 0.0, 0.0, 1.5, 0.0, 0.0])
    ds = gp.GpDataset(50)
    x0 = gp.encode_state(poses[0], twists[0])
    for _ in range(20):
        x = x0 + rng.normal(0, 0.05, 12)
        ds.append(gp.TrainingPair(x, d_true + rng.normal(0, 1e-4, 6)))
    nominal = ctl.nominal_control(0, poses, twists, goal, geoms, trees[0], params, gains, UAV_M)
    learned = ctl.learning_control(0, poses, twists, goal, geoms, trees[0], params, gains,
                                   UAV_M, ds, kernel, bound)
    assert np.allclose(learned.u.as_array(), nominal.u.as_array() - d_true, atol=1e-2)


def test_learning_delta_bar_matches_error_bound():
    rng = np.random.default_rng(12)
    poses, geoms, trees = far_two_agents()
    twists = [se3.AlgebraVector.zero()] * 2
    ds = gp.GpDataset(30)
    for _ in range(15):
        ds.append(gp.TrainingPair(rng.normal(size=12), rng.normal(size=6)))
    kernel = gp.KernelParams()
    bound = gp.BoundParams(delta=0.9, rkhs_bound=np.full(6, 2.0), info_gain=np.full(6, 3.0))
    out = ctl.learning_control(0, poses, twists, nav.GoalConfig(pose([3.0, 0, 0])), geoms,
                               trees[0], nav.NavParams(), ctl.Gains(K=5.0, c=6.0), UAV_M,
                               ds, kernel, bound)
    x_star = gp.encode_state(poses[0], twists[0])
    assert np.isclose(out.delta_bar, gp.error_bound(x_star, ds, kernel, bound), rtol=1e-12)


# ---------------------------------------------------------------------------
# Lyapunov function

def test_lyapunov_zero_at_rest_on_goals():
    poses, geoms, trees = far_two_agents()
    twists = [se3.AlgebraVector.zero()] * 2
    goals = [nav.GoalConfig(p) for p in poses]
    gains = [ctl.Gains(K=2.0, c=3.0)] * 2
    V = ctl.lyapunov_value(poses, twists, goals, geoms, trees, nav.NavParams(),
                           gains, [UAV_M, UAV_M])
    assert V == 0.0


def test_lyapunov_hand_value():
    # psi = 0.25 via gamma + f = 1, G = 3 (single relation, tiny lam)
    d = math.sqrt(3.0 + 1.5**2)
    poses = [pose([0.0, 0, 0]), pose([d, 0, 0])]
    geoms = [nav.AgentGeometry(radius=0.75)] * 2
    trees = [nav.build_relation_tree(i, 2) for i in range(2)]
    params = nav.NavParams(k=1.0, lam=1e-12, sigma_rvf=1.0, X=0.05, a0=1.0)
    goals = [nav.GoalConfig(pose([1.0, 0, 0])), nav.GoalConfig(poses[1])]
    v_speed = math.sqrt(1.0 / UAV_M.mass)
    twists = [se3.AlgebraVector([0, 0, 0], [v_speed, 0, 0]), se3.AlgebraVector.zero()]
    gains = [ctl.Gains(K=2.0, c=3.0), ctl.Gains(K=2.0, c=3.0)]
    V = ctl.lyapunov_value(poses, twists, goals, geoms, trees, params, gains, [UAV_M, UAV_M])
    # agent 0: K psi + kinetic = 2 * 0.25 + 0.5; agent 1 at rest on goal: 0
    assert np.isclose(V, 1.0, atol=1e-9)


def test_lyapunov_nonnegative_randomized():
    rng = np.random.default_rng(13)
    geoms = [nav.AgentGeometry(radius=0.4)] * 3
    trees = [nav.build_relation_tree(i, 3) for i in range(3)]
    gains = [ctl.Gains(K=1.5, c=2.0)] * 3
    for _ in range(50):
        poses = [pose(rng.uniform(-5, 5, 3)) for _ in range(3)]
        twists = [se3.AlgebraVector(rng.normal(size=3), rng.normal(size=3)) for _ in range(3)]
        goals = [nav.GoalConfig(pose(rng.uniform(-5, 5, 3))) for _ in range(3)]
        V = ctl.lyapunov_value(poses, twists, goals, geoms, trees, nav.NavParams(),
                               gains, [UAV_M] * 3)
        assert V >= 0.0


# ---------------------------------------------------------------------------
# closed-loop descent

def test_descent_on_random_two_agent_episodes():
    """V never climbs by more than 1e-6 per step on nominal noiseless runs."""
    rng = np.random.default_rng(99)
    episodes = 0
    while episodes < 100:
        starts = rng.uniform(-6, 6, (2, 3))
        goals = rng.uniform(-6, 6, (2, 3))
        if np.linalg.norm(starts[0] - starts[1]) < 4.0:
            continue
        if np.linalg.norm(goals[0] - goals[1]) < 4.0:
            continue
        agents = tuple(
            scenario.AgentConfig(
                mass=1.3, inertia=(0.02, 0.02, 0.04), radius=0.75,
                start_position=tuple(starts[i]),
                goal_times=(0.0,), goal_positions=(tuple(goals[i]),),
                goal_rotvecs=((0.0, 0.0, 0.0),),
            )
            for i in range(2)
        )
        cfg = scenario.ScenarioConfig(
            agents=agents,
            nav=nav.NavParams(k=1.0, lam=1000.0, sigma_rvf=1.0, X=1.0, a0=10.0),
            K=(150.0, 150.0), c=157.5, dissipation=0.9, theta_epsilon=1e-6,
            sim=engine.SimConfig(dt=1e-3, t_end=0.3, integrator="rkmk4", seed=int(rng.integers(1 << 30))),
            noise=engine.NoiseSpec(), gp=scenario.GpSettings(),
        )
        log = engine.run_episode(cfg)
        assert np.diff(log.lyapunov).max() <= 1e-6
        episodes += 1
