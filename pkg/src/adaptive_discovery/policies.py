"""Selection rules over posterior sample sets.

The sample-variance IDS rule scores each active candidate by

* ``delta(x) = sum_i [max_x' f_i(x') - f_i(x)]``: summed sampled instant regret,
* ``v(x)``: variance, across the posterior, of the conditional mean of
  ``f(x)`` given which candidate is the sampled best,

and picks the minimizer of ``delta^lam / v``. The sum form of ``delta`` is
kept because the argmin does not depend on a positive rescaling.

Functions working on bare vectors return positions into those vectors; the
ones taking sample sets or pools return pool item indices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LINKS, CandidatePool, Link
from .errors import IncompatibleError, InvalidCombination
from .posterior import GaussianLinearPosterior, LaplaceLogisticPosterior, PosteriorSampleSet

__all__ = [
    "PolicyConfig",
    "PolicyDiagnostics",
    "TwoPointChoice",
    "instant_regret_estimate",
    "argmax_weights",
    "vids_gain",
    "information_ratio",
    "select_vids",
    "select_two_point_ids",
    "select_ts",
    "select_ucb_linear",
    "select_ucb_glm",
    "select_random",
    "Policy",
    "IDSPolicy",
    "TSPolicy",
    "UCBPolicy",
    "RandomPolicy",
    "OraclePolicy",
    "make_policy",
    "POLICY_NAMES",
]

MODES = ("deterministic_vids", "two_point_ids")


@dataclass(frozen=True)
class PolicyConfig:
    lam: float = 2.0
    M: int = 100
    ucb_alpha: float = 1.0
    mode: str = "deterministic_vids"

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidCombination(f"lambda must be positive, got {self.lam}")
        if self.M < 1:
            raise InvalidCombination(f"sample count M must be at least 1, got {self.M}")
        if self.mode not in MODES:
            raise InvalidCombination(f"unknown IDS mode {self.mode!r}")
        if self.mode == "two_point_ids" and self.lam != 2:
            raise InvalidCombination("two-point IDS requires lambda = 2")


@dataclass
class PolicyDiagnostics:
    delta: np.ndarray
    gain: np.ndarray
    ratio: np.ndarray
    argmax_weights: np.ndarray
    chosen: int

    def summary(self) -> dict:
        return {
            "chosen": self.chosen,
            "min_ratio": float(np.min(self.ratio)),
            "max_gain": float(np.max(self.gain)),
        }


def _matrix(samples) -> np.ndarray:
    f = samples.sample_means if isinstance(samples, PosteriorSampleSet) else samples
    f = np.atleast_2d(np.asarray(f, dtype=float))
    if f.size == 0:
        raise ValueError("empty sample set")
    return f


def instant_regret_estimate(samples) -> np.ndarray:
    f = _matrix(samples)
    return (f.max(axis=1, keepdims=True) - f).sum(axis=0)


def argmax_weights(samples, weights=None) -> np.ndarray:
    """Posterior mass of each candidate being the best (lowest-index ties)."""
    f = _matrix(samples)
    w = np.full(len(f), 1.0 / len(f)) if weights is None else np.asarray(weights, float)
    return np.bincount(np.argmax(f, axis=1), weights=w, minlength=f.shape[1])


def vids_gain(samples, weights=None) -> np.ndarray:
    """Variance of ``E[f(x) | best candidate]`` under the sampled posterior.

    ``weights`` gives per-sample probabilities; the default is uniform.
    Candidates that are never the best contribute no term.
    """
    f = _matrix(samples)
    M, k = f.shape
    w = np.full(M, 1.0 / M) if weights is None else np.asarray(weights, float)
    w = w / w.sum()
    fbar = w @ f
    best = np.argmax(f, axis=1)
    mass = np.bincount(best, weights=w, minlength=k)
    sums = np.zeros((k, k))
    np.add.at(sums, best, w[:, None] * f)
    seen = mass > 0
    cond = sums[seen] / mass[seen, None]
    return mass[seen] @ (cond - fbar) ** 2


def information_ratio(delta, gain, lam: float) -> np.ndarray:
    """``delta^lam / gain`` with ``0`` where delta is zero and ``inf`` where only gain is."""
    delta = np.asarray(delta, dtype=float)
    gain = np.asarray(gain, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.power(delta, lam) / gain
    ratio[delta == 0] = 0.0
    ratio[(delta > 0) & (gain <= 0)] = np.inf
    return ratio


def select_vids(delta, gain, lam: float) -> int:
    """Position minimizing ``delta^lam / gain``.

    A candidate with zero estimated regret wins outright. If no candidate has
    positive gain the posterior ranking has collapsed, so fall back to the
    smallest ``delta``. Ties go to the lowest position.
    """
    delta = np.asarray(delta, dtype=float)
    gain = np.asarray(gain, dtype=float)
    if len(delta) == 0 or len(delta) != len(gain):
        raise ValueError("delta and gain must be non-empty and the same length")
    zero = np.flatnonzero(delta == 0)
    if len(zero):
        return int(zero[0])
    if not np.any(gain > 0):
        return int(np.argmin(delta))
    return int(np.argmin(information_ratio(delta, gain, lam)))


@dataclass(frozen=True)
class TwoPointChoice:
    """Optimal ``lam = 2`` mixture: ``first`` w.p. ``p``, ``second`` otherwise."""

    first: int
    second: int
    p: float
    psi: float
    chosen: int


def _mixture_ratio(d1, d2, g1, g2, p):
    num = (p * d1 + (1 - p) * d2) ** 2
    den = p * g1 + (1 - p) * g2
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    out = np.where(num == 0, 0.0, out)
    return np.where((num > 0) & (den <= 0), np.inf, out)


def select_two_point_ids(delta, gain, rng=None) -> TwoPointChoice:
    """Minimize ``(delta . pi)^2 / (gain . pi)`` over distributions on at most two points.

    For the pair ``(i, j)`` with ``pi = p e_i + (1 - p) e_j`` the stationary
    point is ``p* = (e a - 2 b c) / (b e)`` where ``a = delta_j``,
    ``b = delta_i - delta_j``, ``c = gain_j``, ``e = gain_i - gain_j``; it is
    clamped to ``[0, 1]`` and compared with both endpoints. A mixture replaces
    the best single point only if it is strictly better.
    """
    delta = np.asarray(delta, dtype=float)
    gain = np.asarray(gain, dtype=float)
    k = len(delta)
    if k == 0 or k != len(gain):
        raise ValueError("delta and gain must be non-empty and the same length")

    if not np.any(gain > 0) and not np.any(delta == 0):
        single = int(np.argmin(delta))
        return TwoPointChoice(single, single, 1.0, np.inf, single)
    singles = information_ratio(delta, gain, 2.0)
    best_single = int(np.argmin(singles))
    best = TwoPointChoice(best_single, best_single, 1.0, float(singles[best_single]), best_single)

    if k > 1 and best.psi > 0:
        i, j = np.triu_indices(k, k=1)
        a, c = delta[j], gain[j]
        b, e = delta[i] - delta[j], gain[i] - gain[j]
        with np.errstate(divide="ignore", invalid="ignore"):
            p_star = (e * a - 2 * b * c) / (b * e)
        p_star = np.where(np.isfinite(p_star), np.clip(p_star, 0.0, 1.0), 1.0)
        psi = _mixture_ratio(delta[i], delta[j], gain[i], gain[j], p_star)
        t = int(np.argmin(psi))
        if psi[t] < best.psi * (1 - 1e-12):
            best = TwoPointChoice(int(i[t]), int(j[t]), float(p_star[t]), float(psi[t]), int(i[t]))

    if best.first != best.second:
        rng = np.random.default_rng() if rng is None else rng
        chosen = best.first if rng.random() < best.p else best.second
        best = TwoPointChoice(best.first, best.second, best.p, best.psi, chosen)
    return best


def select_ts(samples: PosteriorSampleSet, rng) -> int:
    """Thompson sampling: act greedily on one uniformly drawn posterior sample."""
    f = _matrix(samples)
    row = f[rng.integers(len(f))]
    pos = int(np.argmax(row))
    return int(samples.indices[pos]) if isinstance(samples, PosteriorSampleSet) else pos


def _active_features(pool: CandidatePool):
    if pool.kind != "features":
        raise IncompatibleError("UCB needs a feature-vector pool")
    idx = pool.active_indices()
    if len(idx) == 0:
        raise ValueError("pool has no active items")
    return idx, pool.payloads[idx]


def select_ucb_linear(post: GaussianLinearPosterior, pool: CandidatePool, alpha: float = 1.0) -> int:
    idx, X = _active_features(pool)
    width = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", X, post.covariance, X), 0.0))
    return int(idx[np.argmax(X @ post.mean + alpha * width)])


def select_ucb_glm(post: LaplaceLogisticPosterior, pool: CandidatePool, alpha: float = 1.0,
                   link: Link | str = "logistic") -> int:
    """GLM-UCB on the Laplace posterior: ``mu(z) + alpha mu'(z) ||x||_Sigma``."""
    link = LINKS[link] if isinstance(link, str) else link
    idx, X = _active_features(pool)
    z = X @ post.mode
    width = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", X, post.covariance, X), 0.0))
    return int(idx[np.argmax(link.value(z) + alpha * link.derivative(z) * width)])


def select_random(pool: CandidatePool, rng) -> int:
    idx = pool.active_indices()
    if len(idx) == 0:
        raise ValueError("pool has no active items")
    return int(idx[rng.integers(len(idx))])


# --- episode-level policy objects ---------------------------------------------


class Policy:
    """A policy picks one active pool index per step given a posterior engine."""

    name = "policy"
    randomized = True
    needs_engine = True

    def check(self, engine, pool: CandidatePool) -> None:
        if self.needs_engine and engine is None:
            raise IncompatibleError(f"{self.name} needs a posterior engine")

    def choose(self, engine, pool: CandidatePool, rng) -> tuple[int, PolicyDiagnostics | None]:
        raise NotImplementedError


class IDSPolicy(Policy):
    name = "ids"

    def __init__(self, config: PolicyConfig = PolicyConfig()):
        self.config = config
        self.randomized = True  # posterior sampling makes every mode random

    def choose(self, engine, pool, rng):
        samples = engine.sample(pool, self.config.M, rng)
        delta = instant_regret_estimate(samples)
        gain = engine.aggregate_gain(vids_gain(samples), samples.indices)
        if self.config.mode == "two_point_ids":
            pos = select_two_point_ids(delta, gain, rng).chosen
        else:
            pos = select_vids(delta, gain, self.config.lam)
        chosen = int(samples.indices[pos])
        diag = PolicyDiagnostics(delta, gain, information_ratio(delta, gain, self.config.lam),
                                 argmax_weights(samples), chosen)
        return chosen, diag


class TSPolicy(Policy):
    name = "ts"

    def __init__(self, sample_count: int = 1):
        self.sample_count = sample_count

    def choose(self, engine, pool, rng):
        return select_ts(engine.sample(pool, self.sample_count, rng), rng), None


class UCBPolicy(Policy):
    name = "ucb"
    randomized = False

    def __init__(self, alpha: float = 1.0):
        self.alpha = alpha

    def check(self, engine, pool):
        super().check(engine, pool)
        if not hasattr(engine, "ucb_select"):
            raise IncompatibleError(f"UCB is not available for {type(engine).__name__}")

    def choose(self, engine, pool, rng):
        return engine.ucb_select(pool, self.alpha), None


class RandomPolicy(Policy):
    name = "random"
    needs_engine = False

    def choose(self, engine, pool, rng):
        return select_random(pool, rng), None


class OraclePolicy(Policy):
    """Labels the best remaining item by true mean. A zero-regret reference."""

    name = "oracle"
    randomized = False
    needs_engine = False

    def __init__(self, true_means):
        self.true_means = np.asarray(true_means, dtype=float)

    def choose(self, engine, pool, rng):
        idx = pool.active_indices()
        return int(idx[np.argmax(self.true_means[idx])]), None


POLICY_NAMES = ("ids", "ts", "ucb", "random", "oracle")


def make_policy(name: str, config: PolicyConfig = PolicyConfig(), true_means=None) -> Policy:
    if name == "ids":
        return IDSPolicy(config)
    if name == "ts":
        return TSPolicy()
    if name == "ucb":
        return UCBPolicy(config.ucb_alpha)
    if name == "random":
        return RandomPolicy()
    if name == "oracle":
        if true_means is None:
            raise IncompatibleError("the oracle policy needs the true means")
        return OraclePolicy(true_means)
    raise InvalidCombination(f"unknown policy {name!r}; choose from {', '.join(POLICY_NAMES)}")
