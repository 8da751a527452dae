"""Decentralized navigation potential for collision avoidance on SE(3).

Each agent carries a potential

    psi_i = (gamma_i + f_i) / ((gamma_i + f_i)^k + G_i)^(1/k)

where ``gamma_i`` is a pose distance to the agent's goal, ``G_i`` is the
obstacle function built from the agent's relation tree, and ``f_i`` is a
cubic correction that lifts the minimum off the goal when ``G_i`` drops
below the sensitivity threshold ``X``.

The obstacle function is a product over every relation (subset of
neighbors) at every level; for many agents that product spans hundreds of
orders of magnitude, so all internal evaluation is done with log(G) and the
stable identity  psi = exp(log A - logaddexp(k log A, log G)/k).  The public
``obstacle_function`` still reports G itself, which may overflow to inf for
extreme agent counts at large separations; the potential and its gradients
remain finite in that regime.

Gradients are computed numerically as central differences of psi along
exponential curves in the six Lie-algebra directions, which keeps the
differentiation coordinate-free and automatically includes the dependence
of f_i on G_i.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import se3
from .errors import CapacityError, DegenerateConfigurationError, DegenerateConfigurationWarning

MAX_AGENTS = 12

_NEG_INF = float("-inf")


@dataclass(frozen=True)
class NavParams:
    """Parameters of the navigation potential.

    ``a2`` and ``a3`` are derived from ``a0`` and ``X`` on the fly so they can
    never go stale.
    """

    k: float = 1.0
    lam: float = 1.0
    sigma_rvf: float = 1.0
    X: float = 0.1
    a0: float = 1.0

    def __post_init__(self):
        if self.k < 1.0:
            raise ValueError("potential exponent k must be >= 1")
        for name in ("lam", "sigma_rvf", "X", "a0"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")

    @property
    def a2(self) -> float:
        return -3.0 * self.a0 / self.X**2

    @property
    def a3(self) -> float:
        return 2.0 * self.a0 / self.X**3


@dataclass(frozen=True)
class AgentGeometry:
    """Safety sphere and camera cone of one agent."""

    radius: float
    camera_axis: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    fov_half_angle: float = math.pi / 6.0

    def __post_init__(self):
        object.__setattr__(self, "camera_axis", np.asarray(self.camera_axis, dtype=float).reshape(3))
        if self.radius <= 0.0:
            raise ValueError("safety radius must be positive")
        if not (0.0 < self.fov_half_angle < math.pi / 2.0):
            raise ValueError("fov_half_angle must lie in (0, pi/2)")
        if abs(np.linalg.norm(self.camera_axis) - 1.0) > 1e-12:
            raise ValueError("camera_axis must be a unit vector")


@dataclass(frozen=True)
class GoalConfig:
    """Desired pose of one agent."""

    g_d: se3.GroupElement


@dataclass(frozen=True)
class RelationNode:
    """One relation: a set of simultaneous binary proximities for agent i.

    ``members`` holds neighbor agent indices; ``complement`` holds the tree
    indices of the sibling nodes at the same level.  ``kind`` distinguishes
    sphere-distance relations from the angular field-of-view relations that
    participate only at level 1.
    """

    level: int
    members: frozenset
    complement: tuple
    kind: str = "sphere"


class RelationTree:
    """All relations of one agent, with cached arrays for batch evaluation."""

    def __init__(self, agent: int, size: int, nodes, neighbors, include_fov: bool):
        self.agent = agent
        self.size = size
        self.nodes = list(nodes)
        self.neighbors = np.asarray(neighbors, dtype=int)
        self.include_fov = include_fov

        sphere_nodes = [n for n in self.nodes if n.kind == "sphere"]
        fov_nodes = [n for n in self.nodes if n.kind == "fov"]
        slot_of = {j: a for a, j in enumerate(self.neighbors)}

        self.member_matrix = np.zeros((len(sphere_nodes), len(self.neighbors)))
        for r, node in enumerate(sphere_nodes):
            for j in node.members:
                self.member_matrix[r, slot_of[j]] = 1.0
        self.fov_slots = np.array([slot_of[next(iter(n.members))] for n in fov_nodes], dtype=np.int64)

        levels = np.array([n.level for n in sphere_nodes + fov_nodes], dtype=int)
        self.level_groups = [np.flatnonzero(levels == l) for l in sorted(set(levels.tolist()))]

        # CSR layout consumed by the compiled evaluator
        indptr = [0]
        idx = []
        for node in sphere_nodes:
            idx.extend(sorted(slot_of[j] for j in node.members))
            indptr.append(len(idx))
        self.member_indptr = np.array(indptr, dtype=np.int64)
        self.member_idx = np.array(idx, dtype=np.int64)
        gp = [0]
        gnodes = []
        for group in self.level_groups:
            gnodes.extend(group.tolist())
            gp.append(len(gnodes))
        self.group_indptr = np.array(gp, dtype=np.int64)
        self.group_nodes = np.array(gnodes, dtype=np.int64)

    def __len__(self):
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)


def build_relation_tree(i: int, s: int, include_fov: bool = False) -> RelationTree:
    """Enumerate every relation of agent ``i`` among ``s`` agents.

    Levels run from 1 to s-1; level l holds all C(s-1, l) neighbor subsets,
    for 2^(s-1) - 1 sphere nodes in total.  With ``include_fov`` one angular
    node per neighbor is appended at level 1.  A single agent gets an empty
    tree (the G == 1 convention).
    """
    if s < 1:
        raise ValueError("need at least one agent")
    if s > MAX_AGENTS:
        raise CapacityError(f"relation tree for s={s} agents exceeds the cap of {MAX_AGENTS}")
    if not 0 <= i < s:
        raise ValueError(f"agent index {i} out of range for s={s}")

    neighbors = [j for j in range(s) if j != i]
    nodes = []
    order = []  # (level, kind, members) in final node order: spheres then fov
    for level in range(1, s):
        for combo in itertools.combinations(neighbors, level):
            order.append((level, "sphere", frozenset(combo)))
    if include_fov:
        for j in neighbors:
            order.append((1, "fov", frozenset([j])))

    by_level = {}
    for idx, (level, _, _) in enumerate(order):
        by_level.setdefault(level, []).append(idx)
    for idx, (level, kind, members) in enumerate(order):
        complement = tuple(m for m in by_level[level] if m != idx)
        nodes.append(RelationNode(level=level, members=members, complement=complement, kind=kind))
    return RelationTree(i, s, nodes, neighbors, include_fov)


# ---------------------------------------------------------------------------
# scalar building blocks

def goal_distance(g: se3.GroupElement, goal: GoalConfig) -> float:
    """trace(I - R R_d^T) + ||q - q_d||^2, zero exactly at the goal pose."""
    rot = 3.0 - float(np.sum(g.R * goal.g_d.R))
    return max(rot, 0.0) + float(np.sum((g.q - goal.g_d.q) ** 2))


def rpf(g_i: se3.GroupElement, g_j: se3.GroupElement, r_i: float, r_j: float) -> float:
    """Relation proximity: squared center distance minus squared radii sum.

    Zero when the safety spheres touch, negative on interpenetration.
    """
    d = g_i.q - g_j.q
    return float(d @ d) - (r_i + r_j) ** 2


def fov_proximity(g_i: se3.GroupElement, geometry_i: AgentGeometry, g_j: se3.GroupElement) -> float:
    """Angular proximity of agent j to agent i's view cone.

    Positive outside the cone, zero on the boundary, negative (down to
    -fov_half_angle^2) when j sits inside the camera cone.
    """
    u = g_j.q - g_i.q
    norm = np.linalg.norm(u)
    if norm == 0.0:
        raise ValueError("fov_proximity undefined for coincident positions")
    axis = g_i.R @ geometry_i.camera_axis
    cosang = float(np.clip(axis @ u / norm, -1.0, 1.0))
    angle = math.acos(cosang)
    return angle**2 - geometry_i.fov_half_angle**2


def rvf(b: float, B_complement: float, params: NavParams, is_top_level: bool = False) -> float:
    """Relation verification function h = b + lam*b / (b + B^(1/sigma)).

    The empty complementary product (top level) counts as 1.  The
    simultaneous zero b == B == 0 cannot occur on trajectories; it returns 0
    with a diagnostic warning rather than NaN.
    """
    if b < 0.0 or B_complement < 0.0:
        raise ValueError("rvf arguments must be nonnegative")
    Bq = 1.0 if is_top_level else B_complement ** (1.0 / params.sigma_rvf)
    if b == 0.0:
        if Bq == 0.0:
            warnings.warn(
                "relation and complementary product vanished together",
                DegenerateConfigurationWarning,
                stacklevel=2,
            )
        return 0.0
    return b + params.lam * b / (b + Bq)


def correction(G: float, params: NavParams) -> float:
    """Cubic switch f(G) = a0 + a2 G^2 + a3 G^3 on [0, X], zero beyond X.

    The coefficient identities make f(X) = 0 and f'(X) = 0 exactly, so the
    switch is C^1.  Evaluated through the ratio G/X to stay finite when X is
    large.
    """
    if G < 0.0:
        raise ValueError("obstacle value must be nonnegative")
    if G > params.X:
        return 0.0
    r = G / params.X
    return params.a0 * (1.0 - 3.0 * r**2 + 2.0 * r**3)


# ---------------------------------------------------------------------------
# batched evaluation core

def _stack_poses(poses):
    R = np.stack([p.R for p in poses])
    q = np.stack([p.q for p in poses])
    return R, q


def _complement_products(sub):
    """Product over the other columns, computed without division.

    sub has shape (B, n); returns same shape with entry (b, k) equal to
    prod_{m != k} sub[b, m].  A single column yields the empty product 1.
    """
    B, n = sub.shape
    if n == 1:
        return np.ones((B, 1))
    # products can saturate to inf for wide many-agent configurations; that
    # propagates benignly (the lam term then vanishes for the node)
    with np.errstate(over="ignore"):
        pre = np.ones_like(sub)
        np.cumprod(sub[:, :-1], axis=1, out=pre[:, 1:])
        suf = np.ones_like(sub)
        np.cumprod(sub[:, :0:-1], axis=1, out=suf[:, -2::-1])
        return pre * suf


def _log_obstacle_batch(tree: RelationTree, R, q, radii, geometry_i: AgentGeometry, params: NavParams):
    """log G for a batch of configurations; -inf marks G = 0.

    Returns (logG (B,), degenerate (B,)) where the flag marks 0/0 relations.
    """
    B = R.shape[0]
    if len(tree) == 0:
        return np.zeros(B), np.zeros(B, dtype=bool)

    i = tree.agent
    qi = q[:, i, :]
    qn = q[:, tree.neighbors, :]
    diff = qi[:, None, :] - qn
    beta = np.einsum("bjk,bjk->bj", diff, diff) - (radii[i] + radii[tree.neighbors]) ** 2

    b = beta @ tree.member_matrix.T
    if tree.fov_slots.size:
        axis = np.einsum("bkl,l->bk", R[:, i], geometry_i.camera_axis)
        u = -diff[:, tree.fov_slots, :]
        norms = np.linalg.norm(u, axis=2)
        cosang = np.clip(np.einsum("bk,bjk->bj", axis, u) / np.maximum(norms, 1e-300), -1.0, 1.0)
        fov_vals = np.arccos(cosang) ** 2 - geometry_i.fov_half_angle**2
        b = np.concatenate([b, fov_vals], axis=1)
    b = np.maximum(b, 0.0)

    logG = np.zeros(B)
    degenerate = np.zeros(B, dtype=bool)
    inv_sigma = 1.0 / params.sigma_rvf
    for ids in tree.level_groups:
        sub = b[:, ids]
        Bc = _complement_products(sub)
        if sub.shape[1] == 1:
            Bq = np.ones_like(sub)  # empty complement convention
        else:
            Bq = Bc**inv_sigma
        denom = sub + Bq
        with np.errstate(invalid="ignore", divide="ignore"):
            h = sub + params.lam * sub / denom
        zero = sub == 0.0
        degenerate |= np.any(zero & (denom == 0.0), axis=1)
        h = np.where(zero, 0.0, h)
        with np.errstate(divide="ignore"):
            logG += np.sum(np.log(h), axis=1)
    return logG, degenerate


try:  # pragma: no cover - exercised through the equivalence test
    from ._nav_fast import potential_kernel as _potential_kernel
except Exception:  # numba unavailable or compilation failed
    _potential_kernel = None


def _potential_batch(i, R, q, goal: GoalConfig, radii, geometry_i, tree: RelationTree, params: NavParams):
    """psi, logG, gamma for a batch; raises on truly degenerate entries."""
    if _potential_kernel is not None and len(tree) > 0:
        radii_sum = (radii[i] + radii[tree.neighbors]) ** 2
        psi, logG, gamma, flag = _potential_kernel(
            np.ascontiguousarray(R), np.ascontiguousarray(q), i,
            tree.neighbors.astype(np.int64), tree.member_indptr, tree.member_idx,
            tree.fov_slots, tree.group_indptr, tree.group_nodes,
            radii_sum, np.ascontiguousarray(geometry_i.camera_axis),
            geometry_i.fov_half_angle,
            np.ascontiguousarray(goal.g_d.R), np.ascontiguousarray(goal.g_d.q),
            params.k, params.lam, 1.0 / params.sigma_rvf,
            math.log(params.X), params.a0,
        )
        if flag & 2:
            raise DegenerateConfigurationError(
                "goal term and obstacle function vanish simultaneously"
            )
        if flag & 1:
            warnings.warn(
                "degenerate relation encountered (b and complement both zero)",
                DegenerateConfigurationWarning,
                stacklevel=2,
            )
        return psi, logG, gamma
    return _potential_batch_numpy(i, R, q, goal, radii, geometry_i, tree, params)


def _potential_batch_numpy(i, R, q, goal: GoalConfig, radii, geometry_i, tree: RelationTree, params: NavParams):
    """Reference numpy implementation of the batched potential."""
    logG, degenerate = _log_obstacle_batch(tree, R, q, radii, geometry_i, params)
    if np.any(degenerate):
        warnings.warn(
            "degenerate relation encountered (b and complement both zero)",
            DegenerateConfigurationWarning,
            stacklevel=2,
        )

    Ri = R[:, i]
    qi = q[:, i, :]
    rot = np.maximum(3.0 - np.einsum("bkl,kl->b", Ri, goal.g_d.R), 0.0)
    gamma = rot + np.sum((qi - goal.g_d.q) ** 2, axis=1)

    log_x = math.log(params.X)
    ratio = np.exp(np.minimum(logG - log_x, 0.0))
    f = np.where(logG <= log_x, params.a0 * (1.0 - 3.0 * ratio**2 + 2.0 * ratio**3), 0.0)

    A = gamma + f
    if np.any((A == 0.0) & np.isneginf(logG)):
        raise DegenerateConfigurationError(
            "goal term and obstacle function vanish simultaneously"
        )
    with np.errstate(divide="ignore"):
        la = np.log(A)
    psi = np.exp(la - np.logaddexp(params.k * la, logG) / params.k)
    return psi, logG, gamma


def _radii(geometries) -> np.ndarray:
    return np.array([g.radius for g in geometries])


def obstacle_function(i, poses, geometries, tree: RelationTree, params: NavParams) -> float:
    """G_i, the product of every relation verification function of agent i.

    For large agent counts at wide separations the product can exceed the
    double range and reports inf; use the potential itself (log-domain) in
    that regime.
    """
    R, q = _stack_poses(poses)
    logG, degenerate = _log_obstacle_batch(tree, R[None], q[None], _radii(geometries), geometries[i], params)
    if degenerate[0]:
        warnings.warn(
            "degenerate relation encountered (b and complement both zero)",
            DegenerateConfigurationWarning,
            stacklevel=2,
        )
    with np.errstate(over="ignore"):
        return float(np.exp(logG[0]))


def potential(i, poses, goal: GoalConfig, geometries, tree: RelationTree, params: NavParams) -> float:
    """The navigation potential psi_i in [0, 1]."""
    R, q = _stack_poses(poses)
    psi, _, _ = _potential_batch(i, R[None], q[None], goal, _radii(geometries), geometries[i], tree, params)
    return float(psi[0])


# ---------------------------------------------------------------------------
# numerical differentials

_H_RANGE = (1e-7, 1e-3)
_perturbation_cache: dict = {}


def _perturbations(h: float):
    """Group perturbations exp(+-h e_a) over the 6 algebra directions."""
    tab = _perturbation_cache.get(h)
    if tab is None:
        Rs = np.empty((6, 2, 3, 3))
        qs = np.empty((6, 2, 3))
        for a in range(6):
            e = np.zeros(6)
            for s_idx, sign in enumerate((1.0, -1.0)):
                e[a] = sign * h
                g = se3.exp_se3(se3.AlgebraVector.from_array(e))
                Rs[a, s_idx] = g.R
                qs[a, s_idx] = g.q
            e[a] = 0.0
        tab = (Rs, qs)
        _perturbation_cache[h] = tab
    return tab


def _check_h(h_fd: float):
    if not (_H_RANGE[0] <= h_fd <= _H_RANGE[1]):
        raise ValueError(f"finite-difference step must lie in {_H_RANGE}")


def _perturbed_batch(R, q, agent, h_fd):
    """12 copies of the configuration with agent's pose moved along +-h e_a."""
    Rp, qp = _perturbations(h_fd)
    B = 12
    Rb = np.broadcast_to(R, (B,) + R.shape).copy()
    qb = np.broadcast_to(q, (B,) + q.shape).copy()
    flatR = Rp.reshape(12, 3, 3)
    flatq = qp.reshape(12, 3)
    Rb[:, agent] = R[agent] @ flatR
    qb[:, agent] = np.einsum("kl,bl->bk", R[agent], flatq) + q[agent]
    return Rb, qb


def _central_differences(psi_vals, h_fd):
    pairs = psi_vals.reshape(6, 2)
    return (pairs[:, 0] - pairs[:, 1]) / (2.0 * h_fd)


def grad_potential(i, poses, goal, geometries, tree, params, h_fd: float = 1e-5) -> se3.CoAlgebraVector:
    """Left-trivialized differential of psi_i with respect to agent i's pose.

    Central differences of psi along g exp(+-h e_a) over the six algebra
    directions; pairs with body twists through the natural pairing.
    """
    _check_h(h_fd)
    R, q = _stack_poses(poses)
    Rb, qb = _perturbed_batch(R, q, i, h_fd)
    psi, _, _ = _potential_batch(i, Rb, qb, goal, _radii(geometries), geometries[i], tree, params)
    d = _central_differences(psi, h_fd)
    return se3.CoAlgebraVector(d[:3], d[3:])


def dpsi_dt(i, poses, twists, goal, geometries, tree, params, h_fd: float = 1e-5) -> float:
    """Environment rate sum_j <dpsi_i/dg_j, xi_j> over the moving neighbors."""
    _check_h(h_fd)
    R, q = _stack_poses(poses)
    radii = _radii(geometries)
    total = 0.0
    for j in range(len(poses)):
        if j == i:
            continue
        xi_j = twists[j].as_array()
        if not np.any(xi_j):
            continue
        Rb, qb = _perturbed_batch(R, q, j, h_fd)
        psi, _, _ = _potential_batch(i, Rb, qb, goal, radii, geometries[i], tree, params)
        total += float(_central_differences(psi, h_fd) @ xi_j)
    return total


def gradient_and_rate(i, poses, twists, goal, geometries, tree, params, h_fd: float = 1e-5):
    """One-shot evaluation used by the controllers.

    Returns (grad: CoAlgebraVector, dpsi_dt: float, psi: float, gamma: float)
    from a single batched potential evaluation: the center configuration,
    12 own-pose perturbations, and 12 per moving neighbor.
    """
    _check_h(h_fd)
    R, q = _stack_poses(poses)
    radii = _radii(geometries)
    s = len(poses)

    moving = [
        j for j in range(s)
        if j != i and twists[j] is not None
        and (twists[j].omega.any() or twists[j].v.any())
    ]
    Rp, qp = _perturbations(h_fd)
    flatR = Rp.reshape(12, 3, 3)
    flatq = qp.reshape(12, 3)
    n_blocks = 1 + len(moving)
    B = 1 + 12 * n_blocks
    Rb = np.repeat(R[None], B, axis=0)
    qb = np.repeat(q[None], B, axis=0)
    for n, agent in enumerate([i] + moving):
        sl = slice(1 + 12 * n, 13 + 12 * n)
        Rb[sl, agent] = R[agent] @ flatR
        qb[sl, agent] = flatq @ R[agent].T + q[agent]
    psi, _, gamma = _potential_batch(i, Rb, qb, goal, radii, geometries[i], tree, params)

    d_own = _central_differences(psi[1:13], h_fd)
    rate = 0.0
    for n, j in enumerate(moving):
        dj = _central_differences(psi[13 + 12 * n: 25 + 12 * n], h_fd)
        rate += float(dj @ twists[j].as_array())
    grad = se3.CoAlgebraVector(d_own[:3], d_own[3:])
    return grad, rate, float(psi[0]), float(gamma[0])
