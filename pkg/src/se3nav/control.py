"""Decentralized feedback laws: nominal tracking + collision avoidance, and
the learning variant that subtracts the GP estimate of the disturbance wrench.

Sign and unit bookkeeping: the theorem-level control lives in the Lie
algebra (an acceleration), while the simulator integrates wrenches.  The
emitted control is therefore the inertia image of the algebra-valued sum,

    u = -K * grad_psi  +  (theta - d) * I xi  -  ad*_xi(I xi),

a CoAlgebraVector.  ``grad_psi`` is already a covector so the K term needs
no further lowering; ``theta xi`` and the dissipation ``F_d xi = -d xi`` are
algebra-valued and get mapped through the inertia operator; the last term
cancels the gyroscopic wrench so the closed loop matches the reduced
equations the stability argument is written for.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import gp as gp_mod
from . import navigation as nav
from . import se3


@dataclass(frozen=True)
class Gains:
    """Per-agent controller gains.

    ``c`` must strictly exceed ``K`` (checked here; scenario validation also
    enforces c > max_i K_i across agents).  ``dissipation`` scales the
    damping tensor F_d = -d * identity, and ``theta_epsilon`` floors the
    tanh argument so the damping coefficient stays finite at rest.
    """

    K: float
    c: float
    dissipation: float = 0.5
    theta_epsilon: float = 1e-6

    def __post_init__(self):
        if self.K <= 0.0:
            raise ValueError("K must be positive")
        if not self.c > self.K:
            raise ValueError("c must strictly exceed K")
        if self.dissipation < 0.0:
            raise ValueError("dissipation must be nonnegative")
        if self.theta_epsilon <= 0.0:
            raise ValueError("theta_epsilon must be positive")


@dataclass(frozen=True)
class ControlOutput:
    """Control wrench plus the diagnostics the logs and bounds need."""

    u: se3.CoAlgebraVector
    theta: float = 0.0
    grad_norm: float = 0.0
    dpsi_dt: float = 0.0
    psi: float = 0.0
    gamma: float = 0.0
    gp_mean: np.ndarray = field(default_factory=lambda: np.zeros(6))
    delta_bar: float = 0.0


def theta(xi: se3.AlgebraVector, dpsi_dt: float, M: se3.InertiaOperator, gains: Gains) -> float:
    """Damping coefficient -c |dpsi/dt| / tanh(<<xi, xi>>), clamped at rest.

    Always nonpositive; zero when the environment rate vanishes.  The metric
    argument is floored at theta_epsilon so theta stays finite as xi -> 0.
    """
    if dpsi_dt == 0.0:
        return 0.0
    energy = max(M.metric(xi, xi), gains.theta_epsilon)
    return -gains.c * abs(dpsi_dt) / math.tanh(energy)


def nominal_control(
    i,
    poses,
    twists,
    goal: nav.GoalConfig,
    geometries,
    tree: nav.RelationTree,
    nav_params: nav.NavParams,
    gains: Gains,
    inertia: se3.InertiaOperator,
    h_fd: float = 1e-5,
) -> ControlOutput:
    """Tracking + collision-avoidance wrench for agent i.

    Decentralized by construction: reads only agent i's goal and gains plus
    the pose/twist snapshots of its neighbors.
    """
    grad, rate, psi, gamma = nav.gradient_and_rate(
        i, poses, twists, goal, geometries, tree, nav_params, h_fd
    )
    xi = twists[i]
    th = theta(xi, rate, inertia, gains)
    momentum = inertia.apply(xi).as_array()
    u_arr = (
        -gains.K * grad.as_array()
        + (th - gains.dissipation) * momentum
        - se3.ad_star(xi, inertia.apply(xi)).as_array()
    )
    return ControlOutput(
        u=se3.CoAlgebraVector.from_array(u_arr),
        theta=th,
        grad_norm=float(np.linalg.norm(grad.as_array())),
        dpsi_dt=rate,
        psi=psi,
        gamma=gamma,
    )


def learning_control(
    i,
    poses,
    twists,
    goal: nav.GoalConfig,
    geometries,
    tree: nav.RelationTree,
    nav_params: nav.NavParams,
    gains: Gains,
    inertia: se3.InertiaOperator,
    dataset: gp_mod.GpDataset,
    kernel: gp_mod.KernelParams,
    bound: gp_mod.BoundParams,
    prior_mean=None,
    h_fd: float = 1e-5,
) -> ControlOutput:
    """Nominal law minus the GP posterior mean of the disturbance wrench.

    With an empty dataset and zero prior mean this reduces exactly to
    :func:`nominal_control`.  Diagnostics carry the GP mean and the
    state-dependent error bound at the queried state.
    """
    base = nominal_control(
        i, poses, twists, goal, geometries, tree, nav_params, gains, inertia, h_fd
    )
    x_star = gp_mod.encode_state(poses[i], twists[i])
    mean, var = gp_mod.gp_predict(x_star, dataset, kernel, prior_mean)
    beta = gp_mod.beta_bound(len(dataset), bound)
    delta_bar = float(np.sqrt(np.sum(beta**2 * var)))
    return ControlOutput(
        u=se3.CoAlgebraVector.from_array(base.u.as_array() - mean),
        theta=base.theta,
        grad_norm=base.grad_norm,
        dpsi_dt=base.dpsi_dt,
        psi=base.psi,
        gamma=base.gamma,
        gp_mean=mean,
        delta_bar=delta_bar,
    )


def lyapunov_value(
    poses,
    twists,
    goals,
    geometries,
    trees,
    nav_params: nav.NavParams,
    gains_list,
    inertias,
) -> float:
    """V = sum_i K_i psi_i + 1/2 <<xi_i, xi_i>>; zero only at rest on goals."""
    total = 0.0
    for i, (g, xi) in enumerate(zip(poses, twists)):
        psi = nav.potential(i, poses, goals[i], geometries, trees[i], nav_params)
        total += gains_list[i].K * psi + 0.5 * inertias[i].metric(xi, xi)
    return total
