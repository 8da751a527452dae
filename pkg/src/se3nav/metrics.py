"""Episode metrics: tracking errors, safety margins, GP bound coverage."""

from __future__ import annotations

import numpy as np

from . import se3

GAMMA_THRESHOLD = 0.5


def _goal_at(agent_cfg, t):
    times = np.asarray(agent_cfg.goal_times)
    idx = max(int(np.searchsorted(times, t, side="right") - 1), 0)
    R = se3.exp_so3(np.asarray(agent_cfg.goal_rotvecs[idx]))
    q = np.asarray(agent_cfg.goal_positions[idx])
    return R, q


def _attitude_error(log, scenario, k, i):
    R_d, _ = _goal_at(scenario.agents[i], log.t[k])
    return max(3.0 - float(np.sum(log.R[k, i] * R_d)), 0.0)


def compute_metrics(log, scenario, gamma_threshold: float = GAMMA_THRESHOLD) -> dict:
    """Summarize one episode log against its scenario.

    Per agent: final goal distance, the settling time T_eps (first tick after
    which the GP dataset is frozen and gamma stays below the largest logged
    error bound), the max gamma after T_eps, and the first threshold
    crossing.  Global: minimum pairwise distance with its tick, a Lyapunov
    trace summary, the GP bound coverage rate over post-engage ticks (null
    when compensation never engaged), steady-state attitude error before and
    after engagement, and per-rotation-boundary goal distances.
    """
    n_ticks, s = log.gamma.shape
    dt = log.dt
    engage = scenario.sim.gp_engage_time
    engaged_from = int(round(engage / dt)) if engage < scenario.sim.t_end else n_ticks

    agents = []
    for i in range(s):
        gen = log.generation[:, i]
        frozen_from = int(np.argmax(gen == gen[-1])) if n_ticks else 0
        max_bound = float(log.delta_bar[engaged_from:, i].max()) if engaged_from < n_ticks else 0.0
        t_eps = None
        if engaged_from < n_ticks and max_bound > 0.0:
            ok = log.gamma[:, i] <= max_bound
            k = max(frozen_from, 0)
            below = np.flatnonzero(~ok[k:])
            first = k if below.size == 0 else k + int(below[-1]) + 1
            if first < n_ticks:
                t_eps = float(log.t[first])
        crossings = np.flatnonzero(log.gamma[:, i] < gamma_threshold)
        agents.append({
            "final_gamma": float(log.gamma[-1, i]),
            "t_eps": t_eps,
            "max_gamma_after_t_eps": (
                float(log.gamma[int(round(t_eps / dt)):, i].max()) if t_eps is not None else None
            ),
            "time_to_threshold": float(log.t[crossings[0]]) if crossings.size else None,
        })

    k_min = int(np.argmin(log.min_dist))
    min_dist = {
        "value": float(log.min_dist[k_min]),
        "tick": k_min,
        "t": float(log.t[k_min]),
    }

    dV = np.diff(log.lyapunov) if n_ticks > 1 else np.zeros(1)
    lyapunov = {
        "initial": float(log.lyapunov[0]),
        "final": float(log.lyapunov[-1]),
        "max_step_increase": float(dV.max()),
    }

    coverage = None
    if engaged_from < n_ticks:
        resid = np.linalg.norm(
            log.disturbance[engaged_from:] - log.gp_mean[engaged_from:], axis=2
        )
        covered = resid <= log.delta_bar[engaged_from:]
        coverage = float(np.mean(covered))

    attitude = []
    for i in range(s):
        if engaged_from < n_ticks:
            window = max(int(round(min(10.0, engage) / dt)), 1)
            pre = np.mean([
                _attitude_error(log, scenario, k, i)
                for k in range(max(engaged_from - window, 0), engaged_from)
            ])
            post = np.mean([
                _attitude_error(log, scenario, k, i)
                for k in range(max(n_ticks - window, engaged_from), n_ticks)
            ])
            attitude.append({"pre_engage": float(pre), "post_engage": float(post)})
        else:
            attitude.append({"pre_engage": None, "post_engage": None})

    boundaries = sorted({t for a in scenario.agents for t in a.goal_times if t > 0.0})
    waypoint_gammas = []
    for tb in boundaries:
        k = int(round(tb / dt)) - 1
        if 0 <= k < n_ticks:
            waypoint_gammas.append({
                "t": float(tb),
                "gamma": [float(g) for g in log.gamma[k]],
            })

    return {
        "agents": agents,
        "min_pairwise_distance": min_dist,
        "lyapunov": lyapunov,
        "gp_coverage": coverage,
        "steady_state_attitude_error": attitude,
        "waypoint_gammas": waypoint_gammas,
        "gamma_threshold": gamma_threshold,
    }
