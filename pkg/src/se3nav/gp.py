"""Online Gaussian-process regression of the residual dynamics wrench.

Each agent learns the unknown wrench acting on its own body from pairs
(state encoding, residual output).  States p = (g, xi) are encoded as
12-vectors (position, principal-branch rotation log, angular rate, linear
rate) so an isotropic squared-exponential kernel sees commensurate
coordinates.  Outputs are 6-vectors in wrench order (torque, force),
one independent GP per dimension with a shared kernel.

The high-probability prediction error bound combines a per-dimension RKHS
norm bound, a greedy estimate of the maximum information gain, and the
posterior variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from . import se3
from .errors import IllConditionedGramError, InsufficientDataError

ENCODING_DIM = 12
OUTPUT_DIM = 6

TABLE_COLUMNS = (
    "q_x", "q_y", "q_z",
    "logR_x", "logR_y", "logR_z",
    "omega_x", "omega_y", "omega_z",
    "v_x", "v_y", "v_z",
    "y_tx", "y_ty", "y_tz",
    "y_fx", "y_fy", "y_fz",
)


def encode_state(g: se3.GroupElement, xi: se3.AlgebraVector) -> np.ndarray:
    """12-vector (q, log R, Omega, v); injective on the principal branch."""
    return np.concatenate([g.q, se3.log_so3(g.R), xi.omega, xi.v])


def decode_state(x) -> tuple[se3.GroupElement, se3.AlgebraVector]:
    x = np.asarray(x, dtype=float).reshape(ENCODING_DIM)
    g = se3.GroupElement(se3.exp_so3(x[3:6]), x[0:3])
    return g, se3.AlgebraVector(x[6:9], x[9:12])


@dataclass(frozen=True)
class KernelParams:
    """Squared-exponential kernel with isotropic distance plus output noise."""

    signal_variance: float = 1.0
    lengthscale: float = 1.0
    noise_variance: float = 0.01

    def __post_init__(self):
        for name in ("signal_variance", "lengthscale", "noise_variance"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")

    def key(self):
        return (self.signal_variance, self.lengthscale, self.noise_variance)


def _as6(value) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(OUTPUT_DIM, float(arr))
    return arr.reshape(OUTPUT_DIM)


@dataclass(frozen=True)
class BoundParams:
    """Ingredients of the high-probability error bound.

    ``rkhs_bound`` is the per-dimension RKHS norm bound of the unknown wrench
    (supplied, not estimated); ``info_gain`` the per-dimension maximum
    information gain.
    """

    delta: float = 0.9
    rkhs_bound: np.ndarray = field(default_factory=lambda: np.ones(OUTPUT_DIM))
    info_gain: np.ndarray = field(default_factory=lambda: np.zeros(OUTPUT_DIM))

    def __post_init__(self):
        if not (0.0 < self.delta < 1.0):
            raise ValueError("delta must lie in (0, 1)")
        object.__setattr__(self, "rkhs_bound", _as6(self.rkhs_bound))
        object.__setattr__(self, "info_gain", _as6(self.info_gain))
        if np.any(self.rkhs_bound < 0.0) or np.any(self.info_gain < 0.0):
            raise ValueError("rkhs_bound and info_gain must be nonnegative")


@dataclass(frozen=True)
class TrainingPair:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).reshape(ENCODING_DIM))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float).reshape(OUTPUT_DIM))


class GpDataset:
    """FIFO ring buffer of training pairs with a monotone generation counter."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        self.capacity = int(capacity)
        self.pairs: list[TrainingPair] = []
        self.generation = 0
        self._cache = None

    def __len__(self):
        return len(self.pairs)

    def append(self, pair: TrainingPair):
        self.pairs.append(pair)
        if len(self.pairs) > self.capacity:
            self.pairs.pop(0)
        self.generation += 1
        self._cache = None

    def matrices(self):
        """(X (N,12), Y (N,6)) views of the stored pairs."""
        if not self.pairs:
            return np.empty((0, ENCODING_DIM)), np.empty((0, OUTPUT_DIM))
        X = np.stack([p.x for p in self.pairs])
        Y = np.stack([p.y for p in self.pairs])
        return X, Y


def dataset_update(dataset: GpDataset, pair: TrainingPair, now: float, freeze_time: float) -> GpDataset:
    """Append a pair unless the dataset is frozen (now >= freeze_time).

    Mutates and returns the same dataset; eviction is oldest-first once the
    capacity is reached.
    """
    if now >= freeze_time:
        return dataset
    dataset.append(pair)
    return dataset


# ---------------------------------------------------------------------------
# kernel and prediction

def se_kernel(x, x_prime, params: KernelParams) -> float:
    """k(x, x') = sigma_f^2 exp(-||x - x'||^2 / (2 l^2))."""
    d = np.asarray(x, dtype=float) - np.asarray(x_prime, dtype=float)
    return params.signal_variance * math.exp(-float(d @ d) / (2.0 * params.lengthscale**2))


def _kernel_matrix(A, B, params: KernelParams) -> np.ndarray:
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    sq = np.sum(A**2, axis=1)[:, None] + np.sum(B**2, axis=1)[None, :] - 2.0 * A @ B.T
    np.maximum(sq, 0.0, out=sq)
    return params.signal_variance * np.exp(-sq / (2.0 * params.lengthscale**2))


def gram_matrix(X, params: KernelParams) -> np.ndarray:
    """Kernel matrix with observation noise on the diagonal."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] < 1:
        raise ValueError("gram matrix needs at least one input")
    K = _kernel_matrix(X, X, params)
    K[np.diag_indices_from(K)] += params.noise_variance
    return K


def _chol_with_jitter(K: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, escalating jitter 1e-10 .. 1e-6 before failing."""
    jitter = 0.0
    while True:
        try:
            return cholesky(K + jitter * np.eye(K.shape[0]), lower=True)
        except np.linalg.LinAlgError:
            jitter = 1e-10 if jitter == 0.0 else jitter * 10.0
            if jitter > 1e-6:
                cond = float(np.linalg.cond(K))
                raise IllConditionedGramError(
                    f"gram matrix not factorizable (condition ~ {cond:.3e})", cond
                ) from None


def _posterior_factors(dataset: GpDataset, params: KernelParams, prior_mean):
    key = (dataset.generation, params.key(), id(prior_mean) if prior_mean else None)
    if dataset._cache is not None and dataset._cache[0] == key:
        return dataset._cache[1:]
    X, Y = dataset.matrices()
    resid = Y if prior_mean is None else Y - np.stack([_as6(prior_mean(x)) for x in X])
    L = _chol_with_jitter(gram_matrix(X, params))
    alpha = cho_solve((L, True), resid)
    dataset._cache = (key, X, L, alpha)
    return X, L, alpha


def gp_predict(x_star, dataset: GpDataset, params: KernelParams, prior_mean=None):
    """Posterior mean and variance of all six outputs at one test encoding.

    With an empty dataset this falls back to the prior: mean m(x*) (zero by
    default) and variance sigma_f^2 per dimension.  The variance is shared by
    all dimensions since the kernels are identical; it is clamped at zero
    against roundoff.
    """
    x_star = np.asarray(x_star, dtype=float).reshape(ENCODING_DIM)
    if len(dataset) == 0:
        mean = np.zeros(OUTPUT_DIM) if prior_mean is None else _as6(prior_mean(x_star))
        return mean, np.full(OUTPUT_DIM, params.signal_variance)
    X, L, alpha = _posterior_factors(dataset, params, prior_mean)
    k_vec = _kernel_matrix(x_star[None], X, params)[0]
    mean = k_vec @ alpha
    if prior_mean is not None:
        mean = mean + _as6(prior_mean(x_star))
    w = solve_triangular(L, k_vec, lower=True)
    var = params.signal_variance - float(w @ w)
    var = max(var, 0.0)
    return mean, np.full(OUTPUT_DIM, var)


def assemble_output(
    xi_dot: se3.AlgebraVector,
    xi: se3.AlgebraVector,
    u: se3.CoAlgebraVector,
    M: se3.InertiaOperator,
) -> np.ndarray:
    """Residual wrench y = I xi_dot - ad*_xi(I xi) - u.

    Equals the unknown disturbance wrench (plus differentiation noise) for a
    body following the simulated dynamics.
    """
    momentum_rate = M.apply(xi_dot).as_array()
    gyro = se3.ad_star(xi, M.apply(xi)).as_array()
    return momentum_rate - gyro - u.as_array()


# Savitzky-Golay quadratic first-derivative weights on a centered 5-sample
# window with unit spacing.
SG5_DERIV = np.array([-2.0, -1.0, 0.0, 1.0, 2.0]) / 10.0


def twist_derivative(window, dt: float) -> np.ndarray:
    """Smoothed derivative of a (5, 6) twist window at its center sample."""
    window = np.asarray(window, dtype=float).reshape(5, 6)
    return SG5_DERIV @ window / dt


# ---------------------------------------------------------------------------
# hyperparameters

def log_marginal_likelihood(X, Y, params: KernelParams) -> float:
    """Sum of per-dimension Gaussian log densities under the shared kernel."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, m = Y.shape
    L = _chol_with_jitter(gram_matrix(X, params))
    alpha = cho_solve((L, True), Y)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    quad = float(np.sum(Y * alpha))
    return -0.5 * quad - 0.5 * m * logdet - 0.5 * n * m * math.log(2.0 * math.pi)


def fit_hyperparameters(
    dataset: GpDataset,
    init: KernelParams,
    budget: int = 150,
    seed: int = 0,
) -> KernelParams:
    """Maximize the log marginal likelihood by coordinate search in log space.

    Multi-start (the init plus two seeded perturbations), monotone acceptance:
    the returned parameters never score below ``init``.  Deterministic for a
    fixed seed.
    """
    if len(dataset) < 5:
        raise InsufficientDataError("hyperparameter fitting needs at least 5 pairs")
    X, Y = dataset.matrices()

    def score(theta) -> float:
        p = KernelParams(math.exp(theta[0]), math.exp(theta[1]), math.exp(theta[2]))
        try:
            return log_marginal_likelihood(X, Y, p)
        except IllConditionedGramError:
            return -math.inf

    rng = np.random.default_rng(seed)
    theta0 = np.log([init.signal_variance, init.lengthscale, init.noise_variance])
    starts = [theta0] + [theta0 + rng.normal(0.0, 0.7, 3) for _ in range(2)]

    evals = 0
    best_theta, best_lml = theta0.copy(), score(theta0)
    for theta in starts:
        theta = theta.copy()
        current = score(theta)
        evals += 1
        step = 0.8
        while step > 1e-3 and evals < budget:
            improved = False
            for axis in range(3):
                for sign in (1.0, -1.0):
                    if evals >= budget:
                        break
                    trial = theta.copy()
                    trial[axis] += sign * step
                    val = score(trial)
                    evals += 1
                    if val > current:
                        theta, current = trial, val
                        improved = True
            if not improved:
                step *= 0.5
        if current > best_lml:
            best_theta, best_lml = theta, current
    return KernelParams(*np.exp(best_theta))


# ---------------------------------------------------------------------------
# information gain and error bound

def info_gain_greedy(candidate_states, n_points: int, params: KernelParams) -> float:
    """Greedy submodular estimate of max 0.5 log|I + K/sigma^2| over n points.

    Selects points from the candidate pool one at a time, always taking the
    current maximum-variance candidate; the log-gain telescopes exactly over
    the conditional variances.  Returns a value within (1 - 1/e) of the true
    pool maximum.
    """
    pool = np.atleast_2d(np.asarray(candidate_states, dtype=float))
    m = pool.shape[0]
    if m < n_points:
        raise ValueError(f"candidate pool of {m} cannot supply {n_points} points")
    if n_points < 1:
        raise ValueError("need at least one point")

    sigma2 = params.noise_variance
    var = np.full(m, params.signal_variance)
    C = np.zeros((m, n_points))
    total = 0.0
    selected = []
    for t in range(n_points):
        j = int(np.argmax(var))
        gain = 0.5 * math.log1p(max(var[j], 0.0) / sigma2)
        total += gain
        k_col = _kernel_matrix(pool, pool[j][None], params)[:, 0]
        resid = k_col - C[:, :t] @ C[j, :t]
        denom = math.sqrt(max(var[j], 0.0) + sigma2)
        C[:, t] = resid / denom
        var = var - C[:, t] ** 2
        np.maximum(var, 0.0, out=var)
        selected.append(j)
    return total


def beta_bound(dataset_size: int, bound: BoundParams) -> np.ndarray:
    """Per-dimension scale factors of the high-probability error bound.

    beta_j = sqrt(2 B_j^2 + 300 gamma_j ln^3((N+1) / (1 - delta^(1/6)))).
    Monotone nondecreasing in N, gamma_j and B_j.
    """
    if not (0.0 < bound.delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    log_term = math.log((dataset_size + 1) / (1.0 - bound.delta ** (1.0 / 6.0)))
    return np.sqrt(2.0 * bound.rkhs_bound**2 + 300.0 * bound.info_gain * log_term**3)


def error_bound(x_star, dataset: GpDataset, params: KernelParams, bound: BoundParams) -> float:
    """State-dependent bound sqrt(sum_j beta_j^2 var_j(x*)) on the mean error."""
    _, var = gp_predict(x_star, dataset, params)
    beta = beta_bound(len(dataset), bound)
    return float(np.sqrt(np.sum(beta**2 * var)))


# ---------------------------------------------------------------------------
# dataset snapshot import/export

def save_dataset_table(dataset: GpDataset, path):
    X, Y = dataset.matrices()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(TABLE_COLUMNS) + "\n")
        for x, y in zip(X, Y):
            fh.write(",".join(repr(float(v)) for v in np.concatenate([x, y])) + "\n")


def load_dataset_table(path, capacity: int | None = None) -> GpDataset:
    """Read the 18-column snapshot table; raises ValueError naming bad rows."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError("dataset table is empty")
    header = tuple(c.strip() for c in lines[0].split(","))
    if header != TABLE_COLUMNS:
        raise ValueError("dataset table header does not match the documented 18 columns")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(TABLE_COLUMNS):
            raise ValueError(f"row {lineno}: expected {len(TABLE_COLUMNS)} columns, got {len(cells)}")
        try:
            rows.append([float(c) for c in cells])
        except ValueError as exc:
            raise ValueError(f"row {lineno}: {exc}") from None
    data = np.asarray(rows)
    ds = GpDataset(capacity=capacity or max(len(rows), 1))
    for row in data:
        ds.append(TrainingPair(row[:ENCODING_DIM], row[ENCODING_DIM:]))
    return ds
