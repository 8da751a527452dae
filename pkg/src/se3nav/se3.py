"""Lie-group and Lie-algebra arithmetic for SE(3), SO(3), se(3) and se(3)*.

Conventions used across the package:

* a pose is ``GroupElement(R, q)`` with ``R`` a 3x3 rotation matrix and
  ``q`` the position in meters;
* a body twist is ``AlgebraVector(omega, v)`` ordered (angular, linear);
* a wrench / momentum is ``CoAlgebraVector(torque, force)`` with the natural
  pairing ``<m, xi> = torque . omega + force . v``;
* 6-vector layouts are always (angular part, linear part).

All operations are pure functions on immutable values; double precision
throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BranchCutError

# Below this rotation magnitude the closed-form Rodrigues coefficients are
# replaced by their Taylor expansions to avoid 0/0.
_SMALL_ANGLE = 1e-4

_EYE3 = np.eye(3)


def hat(omega) -> np.ndarray:
    """Skew-symmetric matrix of a 3-vector: hat(w) @ x == cross(w, x)."""
    w1, w2, w3 = np.asarray(omega, dtype=float)
    return np.array([[0.0, -w3, w2], [w3, 0.0, -w1], [-w2, w1, 0.0]])


def vee(S) -> np.ndarray:
    """Inverse of :func:`hat`. Raises ValueError if S is not skew."""
    S = np.asarray(S, dtype=float)
    if S.shape != (3, 3):
        raise ValueError("vee expects a 3x3 matrix")
    if np.linalg.norm(S + S.T) >= 1e-9:
        raise ValueError("vee expects a skew-symmetric matrix")
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


@dataclass(frozen=True, eq=False)
class GroupElement:
    """Pose on SE(3): rotation matrix plus position."""

    R: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "R", np.asarray(self.R, dtype=float).reshape(3, 3))
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float).reshape(3))

    @staticmethod
    def identity() -> "GroupElement":
        return GroupElement(np.eye(3), np.zeros(3))

    def as_matrix(self) -> np.ndarray:
        """Homogeneous 4x4 embedding [[R, q], [0, 1]]."""
        g = np.eye(4)
        g[:3, :3] = self.R
        g[:3, 3] = self.q
        return g

    @staticmethod
    def from_matrix(g) -> "GroupElement":
        g = np.asarray(g, dtype=float)
        return GroupElement(g[:3, :3], g[:3, 3])


@dataclass(frozen=True, eq=False)
class AlgebraVector:
    """Body twist xi = (Omega, v) in se(3)."""

    omega: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "omega", np.asarray(self.omega, dtype=float).reshape(3))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float).reshape(3))

    @staticmethod
    def zero() -> "AlgebraVector":
        return AlgebraVector(np.zeros(3), np.zeros(3))

    @staticmethod
    def from_array(a) -> "AlgebraVector":
        a = np.asarray(a, dtype=float).reshape(6)
        return AlgebraVector(a[:3], a[3:])

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.omega, self.v])


@dataclass(frozen=True, eq=False)
class CoAlgebraVector:
    """Momentum / wrench (torque, force) in se(3)*."""

    torque: np.ndarray
    force: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "torque", np.asarray(self.torque, dtype=float).reshape(3))
        object.__setattr__(self, "force", np.asarray(self.force, dtype=float).reshape(3))

    @staticmethod
    def zero() -> "CoAlgebraVector":
        return CoAlgebraVector(np.zeros(3), np.zeros(3))

    @staticmethod
    def from_array(a) -> "CoAlgebraVector":
        a = np.asarray(a, dtype=float).reshape(6)
        return CoAlgebraVector(a[:3], a[3:])

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.torque, self.force])


def pairing(m: CoAlgebraVector, xi: AlgebraVector) -> float:
    """Natural pairing <(mu, beta), (Omega, v)> = mu.Omega + beta.v."""
    return float(m.torque @ xi.omega + m.force @ xi.v)


# ---------------------------------------------------------------------------
# exponential / logarithm

def exp_so3(omega) -> np.ndarray:
    """Rodrigues' formula, with a Taylor fallback for small angles."""
    omega = np.asarray(omega, dtype=float)
    theta = float(np.linalg.norm(omega))
    W = hat(omega)
    W2 = W @ W
    if theta < _SMALL_ANGLE:
        a = 1.0 - theta**2 / 6.0
        b = 0.5 - theta**2 / 24.0
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / theta**2
    return _EYE3 + a * W + b * W2


def log_so3(R) -> np.ndarray:
    """Principal-branch rotation logarithm; errors at angles >= pi - 1e-6."""
    R = np.asarray(R, dtype=float)
    cos_theta = min(1.0, max(-1.0, (np.trace(R) - 1.0) / 2.0))
    theta = math.acos(cos_theta)
    if theta >= math.pi - 1e-6:
        raise BranchCutError(f"rotation angle {theta:.9f} too close to the pi branch cut")
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < _SMALL_ANGLE:
        scale = 0.5 + theta**2 / 12.0
    else:
        scale = theta / (2.0 * math.sin(theta))
    return scale * w


def _left_jacobian(omega) -> np.ndarray:
    """The V matrix mapping translation coordinates through exp."""
    omega = np.asarray(omega, dtype=float)
    theta = float(np.linalg.norm(omega))
    W = hat(omega)
    W2 = W @ W
    if theta < _SMALL_ANGLE:
        a = 0.5 - theta**2 / 24.0
        b = 1.0 / 6.0 - theta**2 / 120.0
    else:
        a = (1.0 - math.cos(theta)) / theta**2
        b = (theta - math.sin(theta)) / theta**3
    return _EYE3 + a * W + b * W2


def _left_jacobian_inv(omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    theta = float(np.linalg.norm(omega))
    W = hat(omega)
    W2 = W @ W
    if theta < _SMALL_ANGLE:
        c = 1.0 / 12.0 + theta**2 / 720.0
    else:
        c = (1.0 - 0.5 * theta * math.sin(theta) / (1.0 - math.cos(theta))) / theta**2
    return _EYE3 - 0.5 * W + c * W2


def exp_se3(xi: AlgebraVector, t: float = 1.0) -> GroupElement:
    """Closed-form exponential of the scaled twist t*xi."""
    omega = t * xi.omega
    v = t * xi.v
    return GroupElement(exp_so3(omega), _left_jacobian(omega) @ v)


def log_se3(g: GroupElement) -> AlgebraVector:
    """Principal-branch inverse of :func:`exp_se3` (t = 1)."""
    omega = log_so3(g.R)
    return AlgebraVector(omega, _left_jacobian_inv(omega) @ g.q)


# ---------------------------------------------------------------------------
# group structure

def compose(g: GroupElement, h: GroupElement) -> GroupElement:
    """Group product g h, the 4x4 matrix product in block form."""
    return GroupElement(g.R @ h.R, g.R @ h.q + g.q)


def inverse(g: GroupElement) -> GroupElement:
    return GroupElement(g.R.T, -(g.R.T @ g.q))


def project_rotation(g: GroupElement) -> np.ndarray:
    return g.R


def project_position(g: GroupElement) -> np.ndarray:
    return g.q


def project_to_so3(R) -> np.ndarray:
    """Polar projection onto SO(3); used to curb orthonormality drift."""
    U, _, Vt = np.linalg.svd(np.asarray(R, dtype=float))
    D = np.diag([1.0, 1.0, float(np.sign(np.linalg.det(U @ Vt)))])
    return U @ D @ Vt


def hat_se3(xi: AlgebraVector) -> np.ndarray:
    """4x4 matrix embedding of a twist, [[hat(Omega), v], [0, 0]]."""
    m = np.zeros((4, 4))
    m[:3, :3] = hat(xi.omega)
    m[:3, 3] = xi.v
    return m


def left_trivialize(g: GroupElement, g_dot) -> AlgebraVector:
    """Body twist xi = g^-1 g_dot for a tangent matrix g_dot at g."""
    g_dot = np.asarray(g_dot, dtype=float)
    if g_dot.shape != (4, 4):
        raise ValueError("left_trivialize expects a 4x4 tangent matrix")
    if np.any(np.abs(g_dot[3, :]) > 0.0):
        raise ValueError("tangent matrix must have a zero bottom row")
    omega_hat = g.R.T @ g_dot[:3, :3]
    v = g.R.T @ g_dot[:3, 3]
    # symmetrize before vee: g_dot may carry numerical asymmetry
    return AlgebraVector(vee(0.5 * (omega_hat - omega_hat.T)), v)


# ---------------------------------------------------------------------------
# adjoint structure

def _cross3(a, b) -> np.ndarray:
    # np.cross has heavy per-call overhead for single 3-vectors
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def ad(eta: AlgebraVector, zeta: AlgebraVector) -> AlgebraVector:
    """Lie bracket ad_eta zeta = (eta_w x zeta_w, eta_w x zeta_v - zeta_w x eta_v)."""
    return AlgebraVector(
        _cross3(eta.omega, zeta.omega),
        _cross3(eta.omega, zeta.v) - _cross3(zeta.omega, eta.v),
    )


def ad_star(xi: AlgebraVector, m: CoAlgebraVector) -> CoAlgebraVector:
    """Dual adjoint: (mu x Omega - v x beta, -Omega x beta).

    Satisfies <ad*_xi m, zeta> = <m, ad_xi zeta> for all zeta.
    """
    return CoAlgebraVector(
        _cross3(m.torque, xi.omega) - _cross3(xi.v, m.force),
        -_cross3(xi.omega, m.force),
    )


# ---------------------------------------------------------------------------
# inertia isomorphism

class InertiaOperator:
    """Block-diagonal inertia map diag(J, m I3) from twists to momenta.

    Defines the left-invariant kinetic-energy metric <<xi1, xi2>> = xi1' M xi2.
    Positive-definiteness is checked once at construction, never at call time.
    """

    def __init__(self, J, mass: float):
        J = np.asarray(J, dtype=float).reshape(3, 3)
        if np.linalg.norm(J - J.T) > 1e-12:
            raise ValueError("inertia tensor must be symmetric")
        eigvals = np.linalg.eigvalsh(J)
        if eigvals.min() <= 0.0 or mass <= 0.0:
            raise ValueError("inertia operator must be positive-definite")
        self.J = J
        self.mass = float(mass)
        self._J_inv = np.linalg.inv(J)

    @property
    def matrix(self) -> np.ndarray:
        M = np.zeros((6, 6))
        M[:3, :3] = self.J
        M[3:, 3:] = self.mass * _EYE3
        return M

    def apply(self, xi: AlgebraVector) -> CoAlgebraVector:
        return CoAlgebraVector(self.J @ xi.omega, self.mass * xi.v)

    def solve(self, m: CoAlgebraVector) -> AlgebraVector:
        return AlgebraVector(self._J_inv @ m.torque, m.force / self.mass)

    def metric(self, xi1: AlgebraVector, xi2: AlgebraVector) -> float:
        return float(xi1.omega @ self.J @ xi2.omega + self.mass * (xi1.v @ xi2.v))


def inertia_apply(M: InertiaOperator, xi: AlgebraVector) -> CoAlgebraVector:
    return M.apply(xi)


def inertia_solve(M: InertiaOperator, m: CoAlgebraVector) -> AlgebraVector:
    return M.solve(m)


def metric(M: InertiaOperator, xi1: AlgebraVector, xi2: AlgebraVector) -> float:
    return M.metric(xi1, xi2)
