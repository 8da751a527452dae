import math

import numpy as np
import pytest

from se3nav import engine, scenario, se3
from se3nav.engine import (
    DisturbanceSpec,
    NoiseSpec,
    RigidState,
    SimConfig,
    _Bodies,
    _step_arrays,
    _step_arrays_numpy,
)
from se3nav.errors import IntegrationDivergedError

UAV_M = se3.InertiaOperator(np.diag([0.02, 0.02, 0.04]), 1.3)


# ---------------------------------------------------------------------------
# config types

def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(dt=0.02)
    with pytest.raises(ValueError):
        SimConfig(dt=0.0)
    with pytest.raises(ValueError):
        SimConfig(t_end=-1.0)
    with pytest.raises(ValueError):
        SimConfig(integrator="euler")
    with pytest.raises(ValueError):
        SimConfig(t_end=10.0, gp_engage_time=11.0)


def test_disturbance_spec_validation():
    with pytest.raises(ValueError):
        DisturbanceSpec(kind="bump")
    with pytest.raises(ValueError):
        DisturbanceSpec(kind="gust", gust_speed=-1.0)
    with pytest.raises(ValueError):
        DisturbanceSpec(kind="step", wrench=np.full(6, np.inf))


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(attitude_std_deg=-0.1)


# ---------------------------------------------------------------------------
# integrator

def test_step_equilibrium_unchanged():
    state = [RigidState(se3.GroupElement.identity(), se3.AlgebraVector.zero())]
    zero = [se3.CoAlgebraVector.zero()]
    out = engine.step(state, zero, zero, [UAV_M], SimConfig(dt=1e-3))
    assert np.array_equal(out[0].g.R, np.eye(3))
    assert np.array_equal(out[0].g.q, np.zeros(3))
    assert np.array_equal(out[0].xi.as_array(), np.zeros(6))


def test_step_pure_translation_exact():
    dt = 0.0078125  # exact binary fraction
    cfg = SimConfig(dt=dt, integrator="lie-euler")
    R0 = se3.exp_so3([0.4, -0.2, 0.7])
    v = np.array([1.0, -0.5, 0.25])
    state = [RigidState(se3.GroupElement(R0, np.zeros(3)), se3.AlgebraVector(np.zeros(3), v))]
    zero = [se3.CoAlgebraVector.zero()]
    for _ in range(128):
        state = engine.step(state, zero, zero, [UAV_M], cfg)
    t = 128 * dt
    assert np.allclose(state[0].g.q, R0 @ v * t, atol=1e-12)
    assert np.array_equal(state[0].xi.v, v)
    assert np.allclose(state[0].g.R, R0)


def test_free_body_energy_short():
    xi = np.array([[1.2, -0.8, 2.0, 0.5, 0.1, -0.4]])
    R = np.eye(3)[None].copy()
    q = np.zeros((1, 3))
    bodies = _Bodies([UAV_M])
    w = np.zeros((1, 6))
    e0 = 0.5 * (xi[0, :3] @ UAV_M.J @ xi[0, :3] + UAV_M.mass * xi[0, 3:] @ xi[0, 3:])
    for _ in range(2000):
        R, q, xi = _step_arrays(R, q, xi, w, bodies, 1e-3, "rkmk4")
    e1 = 0.5 * (xi[0, :3] @ UAV_M.J @ xi[0, :3] + UAV_M.mass * xi[0, 3:] @ xi[0, 3:])
    assert abs(e1 - e0) / e0 < 1e-6
    assert np.linalg.norm(R[0].T @ R[0] - np.eye(3)) < 1e-8


def test_step_kernel_matches_numpy_reference():
    rng = np.random.default_rng(5)
    full_J = rng.uniform(-0.2, 0.2, (3, 3))
    inertias = [UAV_M, se3.InertiaOperator(full_J @ full_J.T + 0.5 * np.eye(3), 2.0)]
    bodies = _Bodies(inertias)
    R = np.stack([se3.exp_so3(rng.uniform(-1, 1, 3)) for _ in range(2)])
    q = rng.uniform(-3, 3, (2, 3))
    xi = rng.uniform(-2, 2, (2, 6))
    w = rng.uniform(-1, 1, (2, 6))
    for method in ("lie-euler", "rkmk4"):
        a = _step_arrays(R.copy(), q.copy(), xi.copy(), w, bodies, 1e-3, method)
        b = _step_arrays_numpy(R.copy(), q.copy(), xi.copy(), w, bodies, 1e-3, method)
        for x, y in zip(a, b):
            assert np.allclose(x, y, atol=1e-14)


def test_order_sanity_lie_euler_halves_error():
    bodies = _Bodies([UAV_M])
    w = np.zeros((1, 6))

    def run(dt, method, T=0.25):
        R = np.eye(3)[None].copy()
        q = np.zeros((1, 3))
        xi = np.array([[1.2, -0.8, 2.0, 0.5, 0.1, -0.4]])
        for _ in range(int(round(T / dt))):
            R, q, xi = _step_arrays(R, q, xi, w, bodies, dt, method)
        return np.concatenate([R.ravel(), q.ravel(), xi.ravel()])

    ref = run(1e-5, "rkmk4")
    e1 = np.linalg.norm(run(2e-3, "lie-euler") - ref)
    e2 = np.linalg.norm(run(1e-3, "lie-euler") - ref)
    assert 1.7 < e1 / e2 < 2.3


# ---------------------------------------------------------------------------
# disturbances

def test_disturbance_none():
    spec = DisturbanceSpec(kind="none")
    for t in (0.0, 17.3, 1e4):
        out = engine.eval_disturbance(spec, t, se3.GroupElement.identity(), se3.AlgebraVector.zero())
        assert np.array_equal(out.as_array(), np.zeros(6))


def test_disturbance_step_indicator():
    w = np.array([0.3, 0, 0, 2.0, 0, 0])
    spec = DisturbanceSpec(kind="step", wrench=w, start=50.0)
    g = se3.GroupElement.identity()
    xi = se3.AlgebraVector.zero()
    assert np.array_equal(engine.eval_disturbance(spec, 49.99, g, xi).as_array(), np.zeros(6))
    assert np.array_equal(engine.eval_disturbance(spec, 50.0, g, xi).as_array(), w)


def test_disturbance_gust_drag_form():
    spec = DisturbanceSpec(kind="gust", gust_speed=5.0, drag_coefficient=0.3)
    R = se3.exp_so3([0.0, 0.0, np.pi / 2])
    v = np.array([1.0, 0.0, 0.0])
    wind = np.array([2.0, 1.0, 0.0])
    out = engine.eval_disturbance(spec, 0.0, se3.GroupElement(R, np.zeros(3)),
                                  se3.AlgebraVector(np.zeros(3), v), wind)
    assert np.array_equal(out.torque, np.zeros(3))
    assert np.allclose(out.force, 0.3 * (R.T @ wind - v))


def test_wind_clamped_and_bounded_mean():
    spec = DisturbanceSpec(kind="gust", gust_speed=5.0, gust_bandwidth=0.2)
    rng = np.random.default_rng(0)
    w = np.zeros(3)
    dt = 0.01
    norms = []
    for _ in range(10_000):  # 100 s
        w = engine.advance_wind(spec, w, dt, rng)
        norms.append(np.linalg.norm(w))
    norms = np.array(norms)
    assert norms.max() <= 5.0 + 1e-12
    assert norms.mean() <= 5.0


# ---------------------------------------------------------------------------
# sensor noise

def test_sensor_noise_zero_spec_exact():
    rng = np.random.default_rng(1)
    g = se3.GroupElement(se3.exp_so3([0.3, 0.2, -0.5]), np.array([1.0, 2.0, 3.0]))
    out = engine.apply_sensor_noise(g, NoiseSpec(), rng)
    assert np.array_equal(out.R, g.R)
    assert np.array_equal(out.q, g.q)


def test_sensor_noise_statistics():
    spec = NoiseSpec(attitude_std_deg=0.5, position_std=1.0)
    rng = np.random.default_rng(7)
    g = se3.GroupElement(se3.exp_so3([0.3, -0.1, 0.8]), np.array([5.0, -2.0, 1.0]))
    n = 100_000
    eulers = np.empty((n, 3))
    offsets = np.empty((n, 3))
    for k in range(n):
        meas = engine.apply_sensor_noise(g, spec, rng)
        E = g.R.T @ meas.R
        # small-angle vee of the log perturbation
        eulers[k] = 0.5 * np.array([E[2, 1] - E[1, 2], E[0, 2] - E[2, 0], E[1, 0] - E[0, 1]])
        offsets[k] = meas.q - g.q
    want = math.radians(0.5)
    assert np.all(np.abs(eulers.std(axis=0) / want - 1.0) < 0.02)
    assert np.all(np.abs(offsets.std(axis=0) - 1.0) < 0.02)


# ---------------------------------------------------------------------------
# episodes

def single_agent_cfg(t_end=30.0, dt=2e-3):
    agent = scenario.AgentConfig(
        mass=1.3, inertia=(0.02, 0.02, 0.04), radius=0.75,
        start_position=(2.0, 0.0, 0.0),
        goal_times=(0.0,), goal_positions=((0.0, 0.0, 0.0),),
        goal_rotvecs=((0.0, 0.0, 0.0),),
    )
    return scenario.ScenarioConfig(
        agents=(agent,),
        nav=scenario.nav.NavParams(k=1.0, lam=1.0, sigma_rvf=1.0, X=0.5, a0=1.0),
        K=(10.0,), c=11.0, dissipation=1.0, theta_epsilon=1e-6,
        sim=SimConfig(dt=dt, t_end=t_end, integrator="rkmk4", seed=5),
        noise=NoiseSpec(), gp=scenario.GpSettings(),
    )


def test_single_agent_converges():
    log = engine.run_episode(single_agent_cfg())
    assert log.gamma[-1, 0] < 1e-2
    assert log.min_dist[0] == math.inf


def test_episode_replay_determinism(tmp_path):
    cfg = scenario.two_agent_swap(t_end=2.0)
    a = engine.run_episode(cfg)
    b = engine.run_episode(cfg)
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    a.to_csv(pa)
    b.to_csv(pb)
    assert pa.read_bytes() == pb.read_bytes()


def test_episode_thread_count_invariance(tmp_path):
    cfg = scenario.two_agent_swap(t_end=2.0)
    a = engine.run_episode(cfg, threads=1)
    b = engine.run_episode(cfg, threads=8)
    pa, pb = tmp_path / "t1.csv", tmp_path / "t8.csv"
    a.to_csv(pa)
    b.to_csv(pb)
    assert pa.read_bytes() == pb.read_bytes()


def test_episode_rotations_stay_orthonormal():
    log = engine.run_episode(scenario.two_agent_swap(t_end=2.0))
    gram = np.einsum("tsji,tsjk->tsik", log.R, log.R)
    assert np.max(np.abs(gram - np.eye(3))) < 1e-8


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_episode_divergence_reports_tick():
    cfg = scenario.two_agent_swap(t_end=5.0)
    hot = scenario.ScenarioConfig(
        agents=cfg.agents, nav=cfg.nav, K=(1e305, 1e305), c=2e305,
        dissipation=cfg.dissipation, theta_epsilon=cfg.theta_epsilon,
        sim=cfg.sim, noise=cfg.noise, gp=cfg.gp,
    )
    with pytest.raises(IntegrationDivergedError) as err:
        engine.run_episode(hot)
    assert err.value.tick >= 0


def test_csv_schema(tmp_path):
    cfg = single_agent_cfg(t_end=0.1, dt=2e-3)
    log = engine.run_episode(cfg)
    path = tmp_path / "episode.csv"
    log.to_csv(path)
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode("utf-8").splitlines()
    assert lines[0] == ",".join(engine.CSV_COLUMNS)
    assert len(lines) == 1 + len(log) * 1
    cells = lines[1].split(",")
    assert len(cells) == len(engine.CSV_COLUMNS)
    float(cells[3])  # parses


def test_gp_pairs_collected_and_frozen():
    cfg = scenario.single_agent_step_disturbance(engage=True, t_end=42.0)
    log = engine.run_episode(cfg)
    gen = log.generation[:, 0]
    freeze_tick = int(round(35.0 / cfg.sim.dt))
    assert gen[-1] == gen[freeze_tick]
    assert gen[-1] > 0
    # delta_bar reported only after engage
    engage_tick = int(round(40.0 / cfg.sim.dt))
    assert np.all(log.delta_bar[:engage_tick, 0] == 0.0)
    assert np.all(log.delta_bar[engage_tick + 1:, 0] > 0.0)
