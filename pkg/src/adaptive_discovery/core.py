"""Problem objects: candidate pools, environments, trajectories and regret.

A pool holds ``n`` items. Each labeling step removes exactly one item from the
active set; items never come back. Environments hold the true label-generating
process and are immutable once built.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import stats
from scipy.special import expit

from .errors import HorizonError, PayloadMismatchError
from .graphtools import Graph

__all__ = [
    "Item",
    "CandidatePool",
    "Link",
    "LINKS",
    "Linear",
    "Glm",
    "GraphEnv",
    "LowRank",
    "Replay",
    "Environment",
    "env_mean",
    "env_sample_label",
    "mean_vector",
    "oracle_top_t",
    "make_hard_instance",
    "Step",
    "Trajectory",
    "RegretLedger",
    "regret_ledger",
    "coherence",
    "incoherence_constant",
    "entry_bound",
]


class Item(NamedTuple):
    index: int
    payload: object


@dataclass
class CandidatePool:
    """The unlabeled set with an active mask.

    ``payloads`` is ``(n, d)`` for feature vectors, ``(n,)`` for graph node ids
    and ``(n, 2)`` for matrix cells; ``kind`` names which.
    """

    payloads: np.ndarray
    kind: str
    active: np.ndarray = field(default=None)  # type: ignore[assignment]

    KINDS = ("features", "node", "cell")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown pool kind {self.kind!r}")
        self.payloads = np.asarray(self.payloads)
        if self.active is None:
            self.active = np.ones(len(self.payloads), dtype=bool)
        else:
            self.active = np.asarray(self.active, dtype=bool).copy()
        if self.active.shape != (len(self.payloads),):
            raise ValueError("active mask length does not match payloads")

    @classmethod
    def from_features(cls, X) -> CandidatePool:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ValueError("feature pool must be a 2-D array")
        return cls(X, "features")

    @classmethod
    def from_nodes(cls, n: int) -> CandidatePool:
        return cls(np.arange(n), "node")

    @classmethod
    def from_cells(cls, m1: int, m2: int | None = None) -> CandidatePool:
        m2 = m1 if m2 is None else m2
        rows, cols = np.divmod(np.arange(m1 * m2), m2)
        return cls(np.column_stack([rows, cols]), "cell")

    def __len__(self) -> int:
        return len(self.payloads)

    @property
    def n(self) -> int:
        return len(self.payloads)

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    def active_indices(self) -> np.ndarray:
        return np.flatnonzero(self.active)

    def item(self, index: int) -> Item:
        return Item(int(index), self.payloads[index])

    def deactivate(self, index: int) -> None:
        if not self.active[index]:
            raise ValueError(f"item {index} is already labeled")
        self.active[index] = False

    def copy(self) -> CandidatePool:
        return CandidatePool(self.payloads, self.kind, self.active.copy())


@dataclass(frozen=True)
class Link:
    """Monotone mean map of a generalized linear model."""

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    derivative_bound: float  # L_mu


def _logistic_derivative(z):
    s = expit(z)
    return s * (1.0 - s)


LINKS = {
    "logistic": Link("logistic", expit, _logistic_derivative, 0.25),
    "identity": Link("identity", lambda z: np.asarray(z, dtype=float),
                     lambda z: np.ones_like(np.asarray(z, dtype=float)), 1.0),
}


def _readonly(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def _feature_payload(item: Item, d: int) -> np.ndarray:
    x = np.asarray(item.payload)
    if x.ndim != 1 or x.shape[0] != d or not np.issubdtype(x.dtype, np.number):
        raise PayloadMismatchError(
            f"expected a feature vector of length {d}, got {item.payload!r}")
    return x.astype(float)


def _gaussian(rng, sd, size=None):
    if sd == 0:
        return 0.0 if size is None else np.zeros(size)
    return rng.normal(0.0, sd, size)


@dataclass(frozen=True)
class Linear:
    theta: np.ndarray
    noise_sd: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "theta", _readonly(self.theta))
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")

    def mean(self, item: Item) -> float:
        return float(_feature_payload(item, len(self.theta)) @ self.theta)

    def means(self, pool: CandidatePool) -> np.ndarray:
        _check_kind(pool, "features", self)
        return pool.payloads @ self.theta

    def sample_label(self, item: Item, rng) -> tuple[float, list]:
        return self.mean(item) + float(_gaussian(rng, self.noise_sd)), []


@dataclass(frozen=True)
class Glm:
    theta: np.ndarray
    link: str = "logistic"
    noise_sd: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "theta", _readonly(self.theta))
        if self.link not in LINKS:
            raise ValueError(f"unknown link {self.link!r}")

    @property
    def link_fn(self) -> Link:
        return LINKS[self.link]

    def mean(self, item: Item) -> float:
        z = _feature_payload(item, len(self.theta)) @ self.theta
        return float(self.link_fn.value(z))

    def means(self, pool: CandidatePool) -> np.ndarray:
        _check_kind(pool, "features", self)
        return self.link_fn.value(pool.payloads @ self.theta)

    def sample_label(self, item: Item, rng) -> tuple[float, list]:
        # labels are not clipped; only the mean is in range
        return self.mean(item) + float(_gaussian(rng, self.noise_sd)), []


@dataclass(frozen=True)
class GraphEnv:
    """Node values on a feedback graph.

    Labeling a node also reveals a noisy value for each of its neighbors.
    With finite ``bound_B`` the noise is truncated so that every realized
    observation satisfies ``|value + noise| <= bound_B``.
    """

    graph: Graph
    node_values: np.ndarray
    noise_sd: float = 1.0
    bound_B: float = float("inf")

    def __post_init__(self):
        object.__setattr__(self, "node_values", _readonly(self.node_values))
        if self.node_values.shape != (self.graph.n,):
            raise ValueError("node_values must have one entry per node")
        if np.isfinite(self.bound_B) and np.any(np.abs(self.node_values) > self.bound_B):
            raise ValueError("node values must lie within [-bound_B, bound_B]")

    def _node(self, item: Item) -> int:
        node = item.payload
        if np.ndim(node) != 0 or not np.issubdtype(np.asarray(node).dtype, np.integer):
            raise PayloadMismatchError(f"expected a node id, got {node!r}")
        node = int(node)
        if not 0 <= node < self.graph.n:
            raise PayloadMismatchError(f"node {node} out of range")
        return node

    def mean(self, item: Item) -> float:
        return float(self.node_values[self._node(item)])

    def means(self, pool: CandidatePool) -> np.ndarray:
        _check_kind(pool, "node", self)
        return self.node_values[pool.payloads]

    def _noisy(self, values: np.ndarray, rng) -> np.ndarray:
        if self.noise_sd == 0:
            return values.copy()
        if not np.isfinite(self.bound_B):
            return values + rng.normal(0.0, self.noise_sd, values.shape)
        lo = (-self.bound_B - values) / self.noise_sd
        hi = (self.bound_B - values) / self.noise_sd
        noise = stats.truncnorm.rvs(lo, hi, scale=self.noise_sd, size=values.shape,
                                    random_state=rng)
        return np.clip(values + noise, -self.bound_B, self.bound_B)

    def sample_label(self, item: Item, rng) -> tuple[float, list]:
        node = self._node(item)
        nbrs = self.graph.neighbors(node)
        obs = self._noisy(self.node_values[np.r_[node, nbrs].astype(int)], rng)
        side = [(int(v), float(y)) for v, y in zip(nbrs, obs[1:])]
        return float(obs[0]), side


@dataclass(frozen=True)
class LowRank:
    factor_U: np.ndarray
    factor_V: np.ndarray
    noise_sd: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "factor_U", _readonly(np.atleast_2d(self.factor_U)))
        object.__setattr__(self, "factor_V", _readonly(np.atleast_2d(self.factor_V)))
        if self.factor_U.shape[1] != self.factor_V.shape[1]:
            raise ValueError("U and V must share the rank dimension")

    @property
    def matrix(self) -> np.ndarray:
        return self.factor_U @ self.factor_V.T

    def _cell(self, item: Item) -> tuple[int, int]:
        cell = np.asarray(item.payload)
        if cell.shape != (2,) or not np.issubdtype(cell.dtype, np.integer):
            raise PayloadMismatchError(f"expected a (row, col) cell, got {item.payload!r}")
        i, j = int(cell[0]), int(cell[1])
        if not (0 <= i < len(self.factor_U) and 0 <= j < len(self.factor_V)):
            raise PayloadMismatchError(f"cell {(i, j)} out of range")
        return i, j

    def mean(self, item: Item) -> float:
        i, j = self._cell(item)
        return float(self.factor_U[i] @ self.factor_V[j])

    def means(self, pool: CandidatePool) -> np.ndarray:
        _check_kind(pool, "cell", self)
        rows, cols = pool.payloads[:, 0], pool.payloads[:, 1]
        return np.einsum("ik,ik->i", self.factor_U[rows], self.factor_V[cols])

    def sample_label(self, item: Item, rng) -> tuple[float, list]:
        return self.mean(item) + float(_gaussian(rng, self.noise_sd)), []


@dataclass(frozen=True)
class Replay:
    """Recorded yields indexed by pool position; labels are noiseless."""

    yields: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "yields", _readonly(self.yields))
        if np.any(self.yields < 0) or np.any(self.yields > 1):
            raise ValueError("replay yields must lie in [0, 1]")

    def mean(self, item: Item) -> float:
        if not 0 <= item.index < len(self.yields):
            raise PayloadMismatchError(f"item {item.index} has no recorded yield")
        return float(self.yields[item.index])

    def means(self, pool: CandidatePool) -> np.ndarray:
        if len(pool) != len(self.yields):
            raise PayloadMismatchError("pool size differs from the number of yields")
        return np.array(self.yields)

    def sample_label(self, item: Item, rng) -> tuple[float, list]:
        return self.mean(item), []


Environment = Linear | Glm | GraphEnv | LowRank | Replay


def _check_kind(pool: CandidatePool, kind: str, env) -> None:
    if pool.kind != kind:
        raise PayloadMismatchError(
            f"{type(env).__name__} needs a {kind!r} pool, got {pool.kind!r}")


def env_mean(env: Environment, item: Item) -> float:
    """True expected label of ``item``."""
    return env.mean(item)


def env_sample_label(env: Environment, item: Item, rng) -> tuple[float, list]:
    """Draw the label of ``item`` and any side observations ``(node, value)``."""
    return env.sample_label(item, rng)


def mean_vector(env: Environment, pool: CandidatePool) -> np.ndarray:
    """True means of every pool item (active or not), in pool order."""
    return np.asarray(env.means(pool), dtype=float)


def oracle_top_t(env: Environment, pool: CandidatePool, T: int) -> tuple[set[int], float]:
    """The ``T`` items with the largest true means, ties to the lowest index."""
    if T > len(pool):
        raise HorizonError(f"horizon T={T} exceeds pool size n={len(pool)}")
    if T < 0:
        raise HorizonError("horizon must be non-negative")
    means = mean_vector(env, pool)
    order = np.argsort(-means, kind="stable")[:T]
    return {int(i) for i in order}, float(means[order].sum())


def make_hard_instance(T: int, gap: float = 0.5) -> tuple[GraphEnv, CandidatePool]:
    """Unstructured instance with ``T**2`` independent unit-noise Gaussian arms.

    The first ``T`` arms have mean ``gap`` and the rest mean zero. Arms are
    nodes of an edgeless graph so labeling one reveals nothing about the others.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    if not 0 <= gap <= 1:
        raise ValueError("gap must lie in [0, 1]")
    n = T * T
    values = np.zeros(n)
    values[:T] = gap
    env = GraphEnv(Graph.empty(n), values, noise_sd=1.0)
    return env, CandidatePool.from_nodes(n)


@dataclass
class Step:
    t: int
    chosen: int
    label: float
    side_observations: list = field(default_factory=list)
    diagnostics: object = None


@dataclass
class Trajectory:
    steps: list[Step] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def chosen(self) -> list[int]:
        return [s.chosen for s in self.steps]

    @property
    def labels(self) -> list[float]:
        return [s.label for s in self.steps]


@dataclass
class RegretLedger:
    """Regret against the best ``T`` items of the initial pool.

    Step ``t`` is charged the ``t``-th largest true mean minus the true mean of
    the item chosen at that step, so ``cumulative[t]`` is the regret of the
    first ``t + 1`` choices against the best ``t + 1`` items.
    """

    oracle_value: float
    instant: np.ndarray
    cumulative: np.ndarray

    @property
    def final(self) -> float:
        return float(self.cumulative[-1]) if len(self.cumulative) else 0.0


def regret_ledger(true_means: np.ndarray, chosen: Sequence[int], T: int | None = None) -> RegretLedger:
    true_means = np.asarray(true_means, dtype=float)
    T = len(chosen) if T is None else T
    if len(chosen) != T:
        raise ValueError("trajectory length differs from the horizon")
    if T > len(true_means):
        raise HorizonError(f"horizon T={T} exceeds pool size n={len(true_means)}")
    allocation = true_means[np.argsort(-true_means, kind="stable")[:T]]
    realized = true_means[np.asarray(chosen, dtype=int)]
    cumulative = np.cumsum(allocation) - np.cumsum(realized)
    instant = np.diff(cumulative, prepend=0.0)
    return RegretLedger(float(allocation.sum()), instant, cumulative)


def coherence(basis: np.ndarray) -> np.ndarray:
    """Coherence of the column span of ``basis`` with each standard basis vector.

    Entry ``i`` is the squared norm of the projection of ``e_i`` onto the span.
    """
    q, _ = np.linalg.qr(np.asarray(basis, dtype=float))
    return np.sum(q * q, axis=1)


def incoherence_constant(M: np.ndarray, r: int) -> float:
    """Smallest gamma with max coherence of both singular subspaces <= sqrt(gamma r / m)."""
    M = np.asarray(M, dtype=float)
    m = max(M.shape)
    U, _, Vt = np.linalg.svd(M, full_matrices=False)
    mu = max(coherence(U[:, :r]).max(), coherence(Vt[:r].T).max())
    return float(m * mu**2 / r)


def entry_bound(M: np.ndarray, r: int) -> float:
    """Entry magnitude bound gamma * r^1.5 * top singular value / m for a rank-r matrix."""
    M = np.asarray(M, dtype=float)
    m = max(M.shape)
    top = np.linalg.svd(M, compute_uv=False)[0]
    return incoherence_constant(M, r) * r**1.5 * top / m
