"""Posterior backends and the sample sets they hand to policies.

Four model families are supported:

* Bayesian linear regression with a Gaussian prior (exact, incremental),
* logistic regression under a Laplace approximation (refit by Newton ascent),
* independent Gaussian node values observed through a feedback graph,
* a low-rank matrix ``U V^T`` sampled by alternating Gibbs sweeps.

Every backend produces a :class:`PosteriorSampleSet`: an ``M x k`` matrix of
sampled mean labels over the ``k`` active candidates.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from .core import LINKS, CandidatePool, Link
from .errors import PosteriorError

logger = logging.getLogger(__name__)

JITTER = 1e-9


@dataclass(frozen=True)
class PosteriorSampleSet:
    """``sample_means[i, j]`` is the mean label of ``indices[j]`` under sample ``i``."""

    sample_means: np.ndarray
    indices: np.ndarray

    def __post_init__(self):
        f = np.atleast_2d(np.asarray(self.sample_means, dtype=float))
        idx = np.asarray(self.indices, dtype=int)
        if f.shape[1] != len(idx):
            raise ValueError("sample_means columns must match indices")
        object.__setattr__(self, "sample_means", f)
        object.__setattr__(self, "indices", idx)

    @property
    def sample_count(self) -> int:
        return self.sample_means.shape[0]


def _symmetrize(S: np.ndarray) -> np.ndarray:
    return 0.5 * (S + S.T)


def _sqrt_factor(cov: np.ndarray) -> np.ndarray:
    """Symmetric square root of a covariance, with one jitter retry."""
    cov = _symmetrize(cov)
    scale = max(1.0, float(np.max(np.abs(np.diag(cov)))) if cov.size else 1.0)
    for attempt in range(2):
        w, Q = np.linalg.eigh(cov)
        if np.all(np.isfinite(w)) and w.min(initial=0.0) >= -1e-10 * scale:
            return (Q * np.sqrt(np.clip(w, 0.0, None))) @ Q.T
        cov = cov + JITTER * np.eye(len(cov))
    raise PosteriorError(f"covariance is not positive semi-definite (min eigenvalue {w.min():.3g})")


# --- Bayesian linear regression ---------------------------------------------


@dataclass(frozen=True)
class GaussianLinearPosterior:
    mean: np.ndarray
    covariance: np.ndarray
    prior_sd: float
    noise_sd: float

    @classmethod
    def prior(cls, d: int, prior_sd: float = 1.0, noise_sd: float = 1.0) -> GaussianLinearPosterior:
        return cls(np.zeros(d), prior_sd**2 * np.eye(d), prior_sd, noise_sd)

    @property
    def d(self) -> int:
        return len(self.mean)


def linear_update(post: GaussianLinearPosterior, x, y: float) -> GaussianLinearPosterior:
    """Condition on one observation ``y = x . theta + N(0, noise_sd^2)``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (post.d,):
        raise ValueError(f"feature length {x.shape} does not match d={post.d}")
    if not (np.all(np.isfinite(x)) and np.isfinite(y)):
        raise ValueError("observation must be finite")
    Sx = post.covariance @ x
    denom = post.noise_sd**2 + x @ Sx
    if denom <= 0:
        # zero design vector under a noiseless model carries no information
        return post
    gain = Sx / denom
    mean = post.mean + gain * (y - x @ post.mean)
    cov = _symmetrize(post.covariance - np.outer(gain, Sx))
    return replace(post, mean=mean, covariance=cov)


def linear_sample(post: GaussianLinearPosterior, features: np.ndarray, M: int, rng,
                  indices=None) -> PosteriorSampleSet:
    """Draw ``M`` parameter vectors and project them onto ``features`` (rows)."""
    if M < 1:
        raise ValueError("M must be at least 1")
    features = np.atleast_2d(np.asarray(features, dtype=float))
    root = _sqrt_factor(post.covariance)
    thetas = post.mean + rng.standard_normal((M, post.d)) @ root
    idx = np.arange(len(features)) if indices is None else indices
    return PosteriorSampleSet(thetas @ features.T, idx)


# --- Laplace-approximated logistic regression --------------------------------


@dataclass(frozen=True)
class LaplaceLogisticPosterior:
    mode: np.ndarray
    covariance: np.ndarray
    converged: bool
    iterations: int
    prior_sd: float = 1.0
    gradient_norm: float = 0.0

    @property
    def d(self) -> int:
        return len(self.mode)


def log_posterior(theta, X, y, prior_sd: float) -> float:
    """Unnormalized Bernoulli log posterior with an isotropic Gaussian prior."""
    z = X @ theta
    # log sigma(z) = -logaddexp(0, -z); log(1 - sigma(z)) = -logaddexp(0, z)
    ll = -(y * np.logaddexp(0.0, -z) + (1.0 - y) * np.logaddexp(0.0, z)).sum()
    return float(ll - 0.5 * theta @ theta / prior_sd**2)


def log_posterior_grad(theta, X, y, prior_sd: float) -> np.ndarray:
    return X.T @ (y - expit(X @ theta)) - theta / prior_sd**2


def laplace_fit(X, y, prior_sd: float = 1.0, tol: float = 1e-8,
                max_iter: int = 100) -> LaplaceLogisticPosterior:
    """Newton ascent to the posterior mode; covariance is the inverse negative Hessian.

    Labels are normally 0/1. Fractional labels are accepted and treated as a
    Bernoulli quasi-likelihood, which keeps the objective concave.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2:
        raise ValueError("X must be 2-D; pass shape (0, d) for no data")
    if len(X) != len(y):
        raise ValueError("X and y have different lengths")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("data must be finite")
    d = X.shape[1]
    prior_prec = 1.0 / prior_sd**2
    theta = np.zeros(d)
    grad = log_posterior_grad(theta, X, y, prior_sd)
    it = 0
    while np.max(np.abs(grad), initial=0.0) >= tol and it < max_iter:
        p = expit(X @ theta)
        H = (X.T * (p * (1 - p))) @ X + prior_prec * np.eye(d)
        step = _solve_pd(H, grad)
        obj = log_posterior(theta, X, y, prior_sd)
        t = 1.0
        # backtracking keeps ascent monotone far from the mode
        while t > 1e-10:
            cand = theta + t * step
            if log_posterior(cand, X, y, prior_sd) >= obj - 1e-12 * abs(obj):
                break
            t *= 0.5
        theta = cand
        grad = log_posterior_grad(theta, X, y, prior_sd)
        it += 1
    gnorm = float(np.max(np.abs(grad), initial=0.0))
    p = expit(X @ theta)
    H = (X.T * (p * (1 - p))) @ X + prior_prec * np.eye(d)
    cov = _symmetrize(_inverse_pd(H))
    return LaplaceLogisticPosterior(theta, cov, gnorm < tol, it, prior_sd, gnorm)


def _solve_pd(H, b):
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        try:
            L = np.linalg.cholesky(H + JITTER * np.eye(len(H)))
        except np.linalg.LinAlgError:
            raise PosteriorError("Hessian is numerically singular") from None
    z = np.linalg.solve(L, b)
    return np.linalg.solve(L.T, z)


def _inverse_pd(H):
    return _solve_pd(H, np.eye(len(H)))


def laplace_sample(post: LaplaceLogisticPosterior, features, M: int, rng,
                   link: Link | str = "logistic", indices=None) -> PosteriorSampleSet:
    if M < 1:
        raise ValueError("M must be at least 1")
    link = LINKS[link] if isinstance(link, str) else link
    features = np.atleast_2d(np.asarray(features, dtype=float))
    root = _sqrt_factor(post.covariance)
    thetas = post.mode + rng.standard_normal((M, post.d)) @ root
    idx = np.arange(len(features)) if indices is None else indices
    return PosteriorSampleSet(link.value(thetas @ features.T), idx)


# --- per-node Gaussian beliefs -------------------------------------------------


@dataclass(frozen=True)
class NodeGaussianBeliefs:
    """Independent Gaussian beliefs per node. Infinite precision means a known value."""

    mean: np.ndarray
    precision: np.ndarray

    @classmethod
    def prior(cls, n: int, prior_mean: float = 0.0, prior_sd: float = 1.0) -> NodeGaussianBeliefs:
        return cls(np.full(n, float(prior_mean)), np.full(n, 1.0 / prior_sd**2))

    @property
    def variance(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 1.0 / self.precision


def node_update(beliefs: NodeGaussianBeliefs, node, value, noise_sd: float) -> NodeGaussianBeliefs:
    """Conjugate update of one node, or of several when ``node``/``value`` are arrays."""
    nodes = np.atleast_1d(np.asarray(node, dtype=int))
    values = np.broadcast_to(np.asarray(value, dtype=float), nodes.shape)
    if np.any((nodes < 0) | (nodes >= len(beliefs.mean))):
        raise IndexError("node out of range")
    mean = beliefs.mean.copy()
    prec = beliefs.precision.copy()
    for u, v in zip(nodes, values):
        if noise_sd == 0:
            mean[u], prec[u] = v, np.inf
        elif np.isfinite(prec[u]):
            obs_prec = 1.0 / noise_sd**2
            new_prec = prec[u] + obs_prec
            mean[u] = (prec[u] * mean[u] + obs_prec * v) / new_prec
            prec[u] = new_prec
    return NodeGaussianBeliefs(mean, prec)


def node_sample(beliefs: NodeGaussianBeliefs, nodes, M: int, rng) -> PosteriorSampleSet:
    if M < 1:
        raise ValueError("M must be at least 1")
    nodes = np.asarray(nodes, dtype=int)
    sd = np.sqrt(beliefs.variance[nodes])
    draws = beliefs.mean[nodes] + rng.standard_normal((M, len(nodes))) * sd
    return PosteriorSampleSet(draws, nodes)


# --- low-rank Gibbs sampler ----------------------------------------------------


@dataclass
class LowRankGibbsState:
    """Chain state for ``M = U V^T`` with i.i.d. ``N(0, prior_sd^2)`` factor entries.

    Each call to :func:`gibbs_run` restarts the chain from a MAP-style point
    estimate of the observed cells (or from the prior when nothing is observed).
    """

    m1: int
    m2: int
    rank: int
    prior_sd: float = 1.0
    noise_sd: float = 1.0
    burn_in: int = 100
    thinning: int = 1
    observed: list = field(default_factory=list)
    U: np.ndarray | None = None
    V: np.ndarray | None = None

    def observe(self, cell, value: float) -> None:
        self.observed.append(((int(cell[0]), int(cell[1])), float(value)))


def _row_posterior(other, counts, sums, prior_prec, noise_prec):
    # rows are conditionally independent: precision = prior + noise * sum_j w_ij v_j v_j^T
    r = other.shape[1]
    P = prior_prec * np.eye(r) + noise_prec * np.einsum("ij,jk,jl->ikl", counts, other, other)
    b = noise_prec * sums @ other
    L = np.linalg.cholesky(P)
    mu = np.linalg.solve(P, b[..., None])[..., 0]
    return mu, L


def _draw_rows(other, counts, sums, prior_prec, noise_prec, rng):
    mu, L = _row_posterior(other, counts, sums, prior_prec, noise_prec)
    z = rng.standard_normal(mu.shape)
    # x = mu + L^{-T} z has covariance P^{-1}
    return mu + np.linalg.solve(np.swapaxes(L, -1, -2), z[..., None])[..., 0]


def _map_objective(U, V, counts, sums, prior_prec, noise_prec):
    # the cell-mean residual is exact up to a constant when a cell is observed twice
    resid = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0) - U @ V.T
    return 0.5 * noise_prec * np.sum(counts * resid**2) + 0.5 * prior_prec * (np.sum(U**2) + np.sum(V**2))


def _point_estimate(counts, sums, rank, prior_prec, noise_prec, rng, restarts=4, iters=40):
    """MAP-style chain start: ridge ALS from an SVD start and a few random starts,
    keeping the best objective.

    Starting the chain from prior draws can leave it in a poor local mode for
    thousands of sweeps once the likelihood is sharp.
    """
    m1, m2 = counts.shape
    filled = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    filled *= counts.size / max(np.count_nonzero(counts), 1)
    u, sv, vt = np.linalg.svd(filled, full_matrices=False)
    k = min(rank, len(sv))
    V0 = np.zeros((m2, rank))
    V0[:, :k] = vt[:k].T * np.sqrt(sv[:k])
    starts = [V0] + [rng.standard_normal((m2, rank)) / np.sqrt(prior_prec) for _ in range(restarts)]
    best = None
    for V in starts:
        for _ in range(iters):
            U = _row_posterior(V, counts, sums, prior_prec, noise_prec)[0]
            V = _row_posterior(U, counts.T, sums.T, prior_prec, noise_prec)[0]
        score = _map_objective(U, V, counts, sums, prior_prec, noise_prec)
        if best is None or score < best[0]:
            best = (score, U, V)
    return best[1], best[2]


def gibbs_run(state: LowRankGibbsState, M: int, rng, cells=None, indices=None) -> PosteriorSampleSet:
    """Run ``burn_in`` sweeps then keep every ``thinning``-th sweep until ``M`` samples.

    ``cells`` is a ``(k, 2)`` array of (row, col) pairs whose sampled means are
    returned; it defaults to every cell in row-major order.
    """
    if state.rank < 1:
        raise ValueError("rank must be at least 1")
    if M < 1:
        raise ValueError("M must be at least 1")
    if cells is None:
        cells = CandidatePool.from_cells(state.m1, state.m2).payloads
    cells = np.asarray(cells, dtype=int).reshape(-1, 2)
    idx = np.arange(len(cells)) if indices is None else indices

    counts = np.zeros((state.m1, state.m2))
    sums = np.zeros((state.m1, state.m2))
    for (i, j), v in state.observed:
        counts[i, j] += 1
        sums[i, j] += v
    prior_prec = 1.0 / state.prior_sd**2
    noise_prec = 1.0 / state.noise_sd**2
    if state.observed:
        state.U, state.V = _point_estimate(counts, sums, state.rank, prior_prec, noise_prec, rng)
    elif state.U is None:
        state.U = state.prior_sd * rng.standard_normal((state.m1, state.rank))
        state.V = state.prior_sd * rng.standard_normal((state.m2, state.rank))

    out = np.empty((M, len(cells)))
    kept = sweep = 0
    while kept < M:
        state.U = _draw_rows(state.V, counts, sums, prior_prec, noise_prec, rng)
        state.V = _draw_rows(state.U, counts.T, sums.T, prior_prec, noise_prec, rng)
        if not (np.all(np.isfinite(state.U)) and np.all(np.isfinite(state.V))):
            raise PosteriorError(f"non-finite Gibbs draw at sweep {sweep}")
        sweep += 1
        if sweep > state.burn_in and (sweep - state.burn_in) % state.thinning == 0:
            out[kept] = np.einsum("ik,ik->i", state.U[cells[:, 0]], state.V[cells[:, 1]])
            kept += 1
    return PosteriorSampleSet(out, idx)
