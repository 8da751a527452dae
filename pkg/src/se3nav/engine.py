"""Closed-loop multi-agent simulation on SE(3).

Integrates the force-level reduced dynamics

    I xi_dot = ad*_xi(I xi) + u + d,      g_dot = g hat(xi)

per agent with a Lie-group integrator (first-order Lie-Euler or a 4th-order
Munthe-Kaas scheme), injects configurable disturbance wrenches and sensor
noise, and logs full-state traces at a fixed tick cadence.

The tick contract: all controllers read the same measured snapshot, GP
datasets are updated between control and integration, and the integrator
advances the true states with the tick's wrenches held constant.  Every
random draw comes from a named per-agent substream of the root seed, so an
episode is bit-reproducible regardless of how the per-agent control
computations are scheduled.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import control as ctl
from . import gp as gp_mod
from . import navigation as nav
from . import se3
from .errors import IntegrationDivergedError

INTEGRATORS = ("lie-euler", "rkmk4")


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    t_end: float = 10.0
    integrator: str = "rkmk4"
    seed: int = 0
    gp_freeze_time: float = math.inf
    gp_engage_time: float = math.inf

    def __post_init__(self):
        if not (0.0 < self.dt <= 0.01):
            raise ValueError("dt must lie in (0, 0.01]")
        if self.t_end <= 0.0:
            raise ValueError("t_end must be positive")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}")
        if self.gp_engage_time > self.t_end and math.isfinite(self.gp_engage_time):
            raise ValueError("gp_engage_time must not exceed t_end")


@dataclass(frozen=True)
class DisturbanceSpec:
    kind: str = "none"  # none | step | gust
    wrench: np.ndarray = field(default_factory=lambda: np.zeros(6))
    start: float = 0.0
    gust_speed: float = 0.0
    gust_bandwidth: float = 0.2
    drag_coefficient: float = 0.3

    def __post_init__(self):
        if self.kind not in ("none", "step", "gust"):
            raise ValueError("disturbance kind must be none, step or gust")
        object.__setattr__(self, "wrench", np.asarray(self.wrench, dtype=float).reshape(6))
        if self.gust_speed < 0.0:
            raise ValueError("gust_speed must be nonnegative")
        if self.kind == "step" and not np.all(np.isfinite(self.wrench)):
            raise ValueError("step wrench must be finite")


@dataclass(frozen=True)
class NoiseSpec:
    attitude_std_deg: float = 0.0
    position_std: float = 0.0

    def __post_init__(self):
        if self.attitude_std_deg < 0.0 or self.position_std < 0.0:
            raise ValueError("noise standard deviations must be nonnegative")


@dataclass(frozen=True)
class RigidState:
    g: se3.GroupElement
    xi: se3.AlgebraVector


# ---------------------------------------------------------------------------
# batched integrator core

def _skew_batch(w):
    s = w.shape[0]
    W = np.zeros((s, 3, 3))
    W[:, 0, 1] = -w[:, 2]
    W[:, 0, 2] = w[:, 1]
    W[:, 1, 0] = w[:, 2]
    W[:, 1, 2] = -w[:, 0]
    W[:, 2, 0] = -w[:, 1]
    W[:, 2, 1] = w[:, 0]
    return W


_EYE3 = np.eye(3)


def _exp_batch(sig):
    """exp of twists (s, 6) -> rotation blocks (s,3,3), translations (s,3)."""
    om = sig[:, :3]
    v = sig[:, 3:]
    th2 = np.sum(om**2, axis=1)
    th = np.sqrt(th2)
    W = _skew_batch(om)
    W2 = W @ W
    small = th < 1e-4
    safe = np.where(small, 1.0, th)
    sin_t = np.sin(safe)
    cos_t = np.cos(safe)
    a = np.where(small, 1.0 - th2 / 6.0, sin_t / safe)
    b = np.where(small, 0.5 - th2 / 24.0, (1.0 - cos_t) / (safe * safe))
    c = np.where(small, 1.0 / 6.0 - th2 / 120.0, (safe - sin_t) / (safe * safe * safe))
    R = _EYE3 + a[:, None, None] * W + b[:, None, None] * W2
    V = _EYE3 + b[:, None, None] * W + c[:, None, None] * W2
    return R, np.einsum("sij,sj->si", V, v)


def _bracket(a, b):
    ao, av = a[:, :3], a[:, 3:]
    bo, bv = b[:, :3], b[:, 3:]
    out = np.empty_like(a)
    out[:, :3] = np.cross(ao, bo)
    out[:, 3:] = np.cross(ao, bv) - np.cross(bo, av)
    return out


def _dexpinv_body(u, p):
    """Truncated dexp^-1_{-u}(p) for the body-velocity convention.

    With g(t) = g0 exp(sigma(t)) and g_dot = g hat(xi), BCH gives
    sigma_dot = xi + [sigma, xi]/2 + [sigma, [sigma, xi]]/12 + O(sigma^3 xi);
    two commutators suffice for a 4th-order method.
    """
    c1 = _bracket(u, p)
    return p + 0.5 * c1 + _bracket(u, c1) / 12.0


class _Bodies:
    """Stacked inertia data for all agents; diagonal tensors take a fast path."""

    def __init__(self, inertias):
        self.J = np.stack([m.J for m in inertias])
        self.Jinv = np.stack([np.linalg.inv(m.J) for m in inertias])
        self.mass_col = np.array([m.mass for m in inertias])[:, None]
        self.diagonal = all(
            np.count_nonzero(m.J - np.diag(np.diag(m.J))) == 0 for m in inertias
        )
        if self.diagonal:
            self.J_diag = np.stack([np.diag(m.J) for m in inertias])
            self.Jinv_diag = 1.0 / self.J_diag

    def xi_rate(self, xi, wrench):
        om, v = xi[:, :3], xi[:, 3:]
        if self.diagonal:
            mu = self.J_diag * om
        else:
            mu = np.einsum("sij,sj->si", self.J, om)
        torque = np.cross(mu, om) + wrench[:, :3]
        out = np.empty_like(xi)
        if self.diagonal:
            out[:, :3] = self.Jinv_diag * torque
        else:
            out[:, :3] = np.einsum("sij,sj->si", self.Jinv, torque)
        out[:, 3:] = wrench[:, 3:] / self.mass_col - np.cross(om, v)
        return out


try:  # pragma: no cover - exercised through the equivalence test
    from ._fast import step_kernel as _step_kernel
except Exception:  # numba unavailable or compilation failed
    _step_kernel = None


def _step_arrays(R, q, xi, wrench, bodies: _Bodies, dt: float, method: str):
    """One integrator step; returns (R, q, xi) at t + dt."""
    if _step_kernel is not None:
        return _step_kernel(
            np.ascontiguousarray(R), np.ascontiguousarray(q), np.ascontiguousarray(xi),
            np.ascontiguousarray(wrench), bodies.J, bodies.Jinv,
            bodies.mass_col[:, 0], dt, method == "rkmk4",
        )
    return _step_arrays_numpy(R, q, xi, wrench, bodies, dt, method)


def _step_arrays_numpy(R, q, xi, wrench, bodies: _Bodies, dt: float, method: str):
    """Reference numpy implementation of the integrator step."""
    if method == "lie-euler":
        sig = dt * xi
        xi_new = xi + dt * bodies.xi_rate(xi, wrench)
    else:  # rkmk4: classical RK4 in exponential coordinates around g(t)
        k1x = bodies.xi_rate(xi, wrench)
        k1s = xi
        x2 = xi + 0.5 * dt * k1x
        k2x = bodies.xi_rate(x2, wrench)
        k2s = _dexpinv_body(0.5 * dt * k1s, x2)
        x3 = xi + 0.5 * dt * k2x
        k3x = bodies.xi_rate(x3, wrench)
        k3s = _dexpinv_body(0.5 * dt * k2s, x3)
        x4 = xi + dt * k3x
        k4x = bodies.xi_rate(x4, wrench)
        k4s = _dexpinv_body(dt * k3s, x4)
        sig = dt / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
        xi_new = xi + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)

    eR, eq = _exp_batch(sig)
    R_new = R @ eR
    q_new = (R @ eq[:, :, None])[:, :, 0] + q

    # curb orthonormality drift with a polar projection where needed
    gram = np.transpose(R_new, (0, 2, 1)) @ R_new
    drift = np.abs(gram - _EYE3).sum(axis=(1, 2))
    if np.any(drift > 1e-9):
        for idx in np.flatnonzero(drift > 1e-9):
            R_new[idx] = se3.project_to_so3(R_new[idx])
    return R_new, q_new, xi_new


def step(states, controls, disturbances, inertias, config: SimConfig):
    """Advance every agent one tick under zero-order-hold wrenches."""
    R = np.stack([s.g.R for s in states])
    q = np.stack([s.g.q for s in states])
    xi = np.stack([s.xi.as_array() for s in states])
    wrench = np.stack([u.as_array() + d.as_array() for u, d in zip(controls, disturbances)])
    bodies = _Bodies(inertias)
    R2, q2, xi2 = _step_arrays(R, q, xi, wrench, bodies, config.dt, config.integrator)
    if not (np.all(np.isfinite(R2)) and np.all(np.isfinite(q2)) and np.all(np.isfinite(xi2))):
        raise IntegrationDivergedError("non-finite state after step")
    return [
        RigidState(se3.GroupElement(R2[i], q2[i]), se3.AlgebraVector.from_array(xi2[i]))
        for i in range(len(states))
    ]


# ---------------------------------------------------------------------------
# disturbances and sensor noise

def eval_disturbance(spec: DisturbanceSpec, t: float, pose: se3.GroupElement,
                     twist: se3.AlgebraVector, wind=None) -> se3.CoAlgebraVector:
    """Realized disturbance wrench at time t.

    For gusts, ``wind`` is the current world-frame wind velocity (owned and
    advanced by the episode loop); the body force is a linear drag on the
    body-frame relative wind, with zero torque.
    """
    if spec.kind == "none":
        return se3.CoAlgebraVector.zero()
    if spec.kind == "step":
        if t >= spec.start:
            return se3.CoAlgebraVector.from_array(spec.wrench)
        return se3.CoAlgebraVector.zero()
    w = np.zeros(3) if wind is None else np.asarray(wind, dtype=float)
    rel = pose.R.T @ w - twist.v
    return se3.CoAlgebraVector(np.zeros(3), spec.drag_coefficient * rel)


def advance_wind(spec: DisturbanceSpec, w, dt: float, rng) -> np.ndarray:
    """Ornstein-Uhlenbeck wind velocity, clamped to ||w|| <= gust_speed.

    The stationary per-axis deviation is gust_speed / 2; the clamp enforces
    the stated gust ceiling exactly.
    """
    theta = 2.0 * math.pi * spec.gust_bandwidth
    decay = math.exp(-theta * dt)
    sigma = spec.gust_speed / 2.0
    w = decay * w + sigma * math.sqrt(max(1.0 - decay**2, 0.0)) * rng.standard_normal(3)
    norm = float(np.linalg.norm(w))
    if norm > spec.gust_speed > 0.0:
        w = w * (spec.gust_speed / norm)
    return w


def apply_sensor_noise(pose: se3.GroupElement, spec: NoiseSpec, rng) -> se3.GroupElement:
    """Right-perturb the attitude and offset the position; true state untouched."""
    eps_R = rng.normal(0.0, math.radians(spec.attitude_std_deg), 3)
    eps_q = rng.normal(0.0, spec.position_std, 3)
    return se3.GroupElement(pose.R @ se3.exp_so3(eps_R), pose.q + eps_q)


# ---------------------------------------------------------------------------
# episode log

CSV_COLUMNS = (
    ["tick", "t", "agent"]
    + [f"R{r}{c}" for r in (1, 2, 3) for c in (1, 2, 3)]
    + ["qx", "qy", "qz", "wx", "wy", "wz", "vx", "vy", "vz"]
    + ["u_tx", "u_ty", "u_tz", "u_fx", "u_fy", "u_fz"]
    + ["d_tx", "d_ty", "d_tz", "d_fx", "d_fy", "d_fz"]
    + ["gp_tx", "gp_ty", "gp_tz", "gp_fx", "gp_fy", "gp_fz"]
    + ["delta_bar", "psi", "V", "min_dist"]
)


class EpisodeLog:
    """Fixed-cadence full-state trace of one episode."""

    def __init__(self, n_ticks: int, n_agents: int, dt: float):
        self.dt = dt
        self.n_agents = n_agents
        self.t = np.zeros(n_ticks)
        self.R = np.zeros((n_ticks, n_agents, 3, 3))
        self.q = np.zeros((n_ticks, n_agents, 3))
        self.meas_R = np.zeros((n_ticks, n_agents, 3, 3))
        self.meas_q = np.zeros((n_ticks, n_agents, 3))
        self.omega = np.zeros((n_ticks, n_agents, 3))
        self.v = np.zeros((n_ticks, n_agents, 3))
        self.u = np.zeros((n_ticks, n_agents, 6))
        self.disturbance = np.zeros((n_ticks, n_agents, 6))
        self.gp_mean = np.zeros((n_ticks, n_agents, 6))
        self.delta_bar = np.zeros((n_ticks, n_agents))
        self.psi = np.zeros((n_ticks, n_agents))
        self.gamma = np.zeros((n_ticks, n_agents))
        self.lyapunov = np.zeros(n_ticks)
        self.min_dist = np.zeros(n_ticks)
        self.generation = np.zeros((n_ticks, n_agents), dtype=int)

    def __len__(self):
        return self.t.shape[0]

    def to_csv(self, path):
        """Write the documented 40-column table; UTF-8, LF endings."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for k in range(len(self)):
                t_repr = repr(float(self.t[k]))
                for a in range(self.n_agents):
                    cells = [str(k), t_repr, str(a)]
                    cells += [repr(float(x)) for x in self.R[k, a].ravel()]
                    cells += [repr(float(x)) for x in self.q[k, a]]
                    cells += [repr(float(x)) for x in self.omega[k, a]]
                    cells += [repr(float(x)) for x in self.v[k, a]]
                    cells += [repr(float(x)) for x in self.u[k, a]]
                    cells += [repr(float(x)) for x in self.disturbance[k, a]]
                    cells += [repr(float(x)) for x in self.gp_mean[k, a]]
                    cells += [
                        repr(float(self.delta_bar[k, a])),
                        repr(float(self.psi[k, a])),
                        repr(float(self.lyapunov[k])),
                        repr(float(self.min_dist[k])),
                    ]
                    fh.write(",".join(cells) + "\n")


# ---------------------------------------------------------------------------
# episode loop

def _streams(seed: int, n_agents: int):
    noise = [np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, i)))
             for i in range(n_agents)]
    gust = [np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2, i)))
            for i in range(n_agents)]
    return noise, gust


def _min_pairwise(q):
    s = q.shape[0]
    if s < 2:
        return math.inf
    best = math.inf
    for a in range(s):
        d = np.linalg.norm(q[a + 1:] - q[a], axis=1)
        if d.size:
            best = min(best, float(d.min()))
    return best


class _AgentRuntime:
    """Mutable per-agent state owned by the episode loop."""

    def __init__(self, cfg_agent, gp_cfg, n_agents):
        self.inertia = se3.InertiaOperator(np.diag(cfg_agent.inertia), cfg_agent.mass)
        self.geometry = nav.AgentGeometry(
            radius=cfg_agent.radius,
            camera_axis=cfg_agent.camera_axis,
            fov_half_angle=cfg_agent.fov_half_angle,
        )
        self.schedule_times = np.asarray(cfg_agent.goal_times, dtype=float)
        self.schedule_goals = [
            nav.GoalConfig(se3.GroupElement(se3.exp_so3(rv), pos))
            for pos, rv in zip(cfg_agent.goal_positions, cfg_agent.goal_rotvecs)
        ]
        self.disturbance = cfg_agent.disturbance
        self.wind = np.zeros(3)
        self.dataset = gp_mod.GpDataset(gp_cfg.capacity)
        self.bound = gp_mod.BoundParams(
            delta=gp_cfg.delta, rkhs_bound=gp_cfg.rkhs_bound, info_gain=np.zeros(6)
        )
        self.pool: list[np.ndarray] = []
        self.pool_size = gp_cfg.pool_size
        self.history: list[tuple] = []  # rolling (encoding, twist6, u6)

    def goal_at(self, t: float) -> nav.GoalConfig:
        idx = int(np.searchsorted(self.schedule_times, t, side="right") - 1)
        return self.schedule_goals[max(idx, 0)]


def run_episode(scenario, threads: int = 1) -> EpisodeLog:
    """Run one closed-loop episode and return its full log.

    Deterministic for a fixed (scenario, seed): noise, gusts, GP updates and
    integration happen in a fixed agent order; per-agent control computations
    are pure and may be dispatched on a thread pool without changing a bit of
    the output.
    """
    sim: SimConfig = scenario.sim
    agents = [_AgentRuntime(a, scenario.gp, len(scenario.agents)) for a in scenario.agents]
    s = len(agents)
    n_ticks = int(round(sim.t_end / sim.dt))
    log = EpisodeLog(n_ticks, s, sim.dt)

    trees = [
        nav.build_relation_tree(i, s, include_fov=scenario.fov_enabled)
        for i in range(s)
    ]
    geometries = [a.geometry for a in agents]
    gains = scenario.gains_list()
    inertias = [a.inertia for a in agents]
    bodies = _Bodies(inertias)
    kernel = scenario.gp.kernel

    R = np.stack([se3.exp_so3(a.start_rotvec) for a in scenario.agents])
    q = np.stack([np.asarray(a.start_position, dtype=float) for a in scenario.agents])
    xi = np.zeros((s, 6))

    noise_rng, gust_rng = _streams(sim.seed, s)
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    engaged = False
    sample_period = max(int(scenario.gp.sample_period), 1)

    try:
        for k in range(n_ticks):
            t = k * sim.dt

            # (1)-(2) snapshot true states, apply sensor noise
            meas = [
                apply_sensor_noise(se3.GroupElement(R[i], q[i]), scenario.noise, noise_rng[i])
                for i in range(s)
            ]
            twists = [se3.AlgebraVector.from_array(xi[i]) for i in range(s)]

            # one-time information-gain estimate when compensation engages
            if not engaged and t >= sim.gp_engage_time:
                engaged = True
                for a in agents:
                    n_sel = min(len(a.dataset) + 1, len(a.pool))
                    if n_sel >= 1 and len(a.pool) >= n_sel:
                        gamma = gp_mod.info_gain_greedy(np.stack(a.pool), n_sel, kernel)
                        a.bound = gp_mod.BoundParams(
                            delta=a.bound.delta,
                            rkhs_bound=a.bound.rkhs_bound,
                            info_gain=np.full(6, gamma),
                        )

            # (3) controls from the measured snapshot
            def control_for(i):
                a = agents[i]
                goal = a.goal_at(t)
                if engaged:
                    return ctl.learning_control(
                        i, meas, twists, goal, geometries, trees[i], scenario.nav,
                        gains[i], a.inertia, a.dataset, kernel, a.bound,
                        h_fd=scenario.h_fd,
                    )
                return ctl.nominal_control(
                    i, meas, twists, goal, geometries, trees[i], scenario.nav,
                    gains[i], a.inertia, h_fd=scenario.h_fd,
                )

            if pool is not None:
                outputs = list(pool.map(control_for, range(s)))
            else:
                outputs = [control_for(i) for i in range(s)]

            # (4) collect GP training pairs (measured states, smoothed rates)
            for i, a in enumerate(agents):
                enc = gp_mod.encode_state(meas[i], twists[i])
                a.history.append((enc, xi[i].copy(), outputs[i].u.as_array()))
                if len(a.history) > 5:
                    a.history.pop(0)
                if t < sim.gp_freeze_time and k % sample_period == 0 and len(a.history) == 5:
                    window = np.stack([h[1] for h in a.history])
                    xi_dot = gp_mod.twist_derivative(window, sim.dt)
                    enc_c, xi_c, u_c = a.history[2]
                    y = gp_mod.assemble_output(
                        se3.AlgebraVector.from_array(xi_dot),
                        se3.AlgebraVector.from_array(xi_c),
                        se3.CoAlgebraVector.from_array(u_c),
                        a.inertia,
                    )
                    gp_mod.dataset_update(
                        a.dataset, gp_mod.TrainingPair(enc_c, y), t, sim.gp_freeze_time
                    )
                    a.pool.append(enc_c)
                    if len(a.pool) > a.pool_size:
                        a.pool.pop(0)

            # (5) disturbances, then integrate the true dynamics
            d_list = []
            for i, a in enumerate(agents):
                if a.disturbance.kind == "gust":
                    a.wind = advance_wind(a.disturbance, a.wind, sim.dt, gust_rng[i])
                d_list.append(
                    eval_disturbance(
                        a.disturbance, t, se3.GroupElement(R[i], q[i]), twists[i], a.wind
                    )
                )

            # (6) log the tick before stepping
            log.t[k] = t
            log.R[k] = R
            log.q[k] = q
            log.omega[k] = xi[:, :3]
            log.v[k] = xi[:, 3:]
            for i in range(s):
                log.meas_R[k, i] = meas[i].R
                log.meas_q[k, i] = meas[i].q
                log.u[k, i] = outputs[i].u.as_array()
                log.disturbance[k, i] = d_list[i].as_array()
                log.gp_mean[k, i] = outputs[i].gp_mean
                log.delta_bar[k, i] = outputs[i].delta_bar
                log.psi[k, i] = outputs[i].psi
                log.gamma[k, i] = nav.goal_distance(
                    se3.GroupElement(R[i], q[i]), agents[i].goal_at(t)
                )
                log.generation[k, i] = agents[i].dataset.generation
            log.lyapunov[k] = sum(
                gains[i].K * outputs[i].psi + 0.5 * inertias[i].metric(twists[i], twists[i])
                for i in range(s)
            )
            log.min_dist[k] = _min_pairwise(q)

            wrench = np.stack([outputs[i].u.as_array() + d_list[i].as_array() for i in range(s)])
            R, q, xi = _step_arrays(R, q, xi, wrench, bodies, sim.dt, sim.integrator)
            if not (np.all(np.isfinite(R)) and np.all(np.isfinite(q)) and np.all(np.isfinite(xi))):
                raise IntegrationDivergedError(
                    f"integration diverged at tick {k} (t = {t:.6g})", tick=k
                )
    finally:
        if pool is not None:
            pool.shutdown(wait=False)

    return log
