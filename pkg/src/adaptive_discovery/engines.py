"""Stateful wrappers that keep one episode's posterior in step with its pool.

An engine exposes ``sample(pool, M, rng)`` for the active candidates,
``observe(index, label, side)`` after each labeling step, and
``aggregate_gain(v, indices)`` which turns per-candidate variance gains into
the gain of the whole observation a label brings. Only the graph engine does
more than return ``v``: labeling a node also observes its neighbors, so its
gain sums the per-node gains over the active part of the closed neighborhood.
"""

from __future__ import annotations

import numpy as np

from . import posterior as post_
from .core import LINKS, CandidatePool, GraphEnv
from .errors import IncompatibleError
from .graphtools import Graph
from .policies import select_ucb_glm, select_ucb_linear

__all__ = ["LinearEngine", "LaplaceEngine", "NodeEngine", "GibbsEngine"]


class _Engine:
    pool_kind = "features"

    def check(self, env, pool: CandidatePool) -> None:
        if pool.kind != self.pool_kind:
            raise IncompatibleError(
                f"{type(self).__name__} needs a {self.pool_kind!r} pool, got {pool.kind!r}")

    def aggregate_gain(self, v: np.ndarray, indices: np.ndarray) -> np.ndarray:
        return v


class LinearEngine(_Engine):
    def __init__(self, features, prior_sd: float = 1.0, noise_sd: float = 1.0):
        self.features = np.asarray(features, dtype=float)
        self.post = post_.GaussianLinearPosterior.prior(self.features.shape[1], prior_sd, noise_sd)

    def check(self, env, pool):
        super().check(env, pool)
        if pool.payloads.shape != self.features.shape:
            raise IncompatibleError("engine features do not match the pool")

    def sample(self, pool, M, rng):
        idx = pool.active_indices()
        return post_.linear_sample(self.post, self.features[idx], M, rng, idx)

    def observe(self, index, label, side=()):
        self.post = post_.linear_update(self.post, self.features[index], label)

    def ucb_select(self, pool, alpha):
        return select_ucb_linear(self.post, CandidatePool(self.features, "features", pool.active), alpha)


class LaplaceEngine(_Engine):
    """Refits the Laplace approximation from scratch after every observation."""

    def __init__(self, features, prior_sd: float = 1.0, link: str = "logistic",
                 tol: float = 1e-8, max_iter: int = 100):
        self.features = np.asarray(features, dtype=float)
        self.prior_sd = prior_sd
        self.link = LINKS[link]
        self.tol, self.max_iter = tol, max_iter
        self._X: list = []
        self._y: list = []
        self.post = post_.laplace_fit(np.zeros((0, self.features.shape[1])), [], prior_sd, tol, max_iter)

    def sample(self, pool, M, rng):
        idx = pool.active_indices()
        return post_.laplace_sample(self.post, self.features[idx], M, rng, self.link, idx)

    def observe(self, index, label, side=()):
        self._X.append(self.features[index])
        self._y.append(label)
        self.post = post_.laplace_fit(np.array(self._X), np.array(self._y), self.prior_sd,
                                      self.tol, self.max_iter)

    def ucb_select(self, pool, alpha):
        return select_ucb_glm(self.post, CandidatePool(self.features, "features", pool.active),
                              alpha, self.link)


class NodeEngine(_Engine):
    pool_kind = "node"

    def __init__(self, graph: Graph, prior_sd: float = 1.0, noise_sd: float = 1.0,
                 prior_mean: float = 0.0):
        self.graph = graph
        self.noise_sd = noise_sd
        self.beliefs = post_.NodeGaussianBeliefs.prior(graph.n, prior_mean, prior_sd)

    def check(self, env, pool):
        super().check(env, pool)
        if not isinstance(env, GraphEnv) or env.graph.n != self.graph.n:
            raise IncompatibleError("NodeEngine needs a GraphEnv on the same graph")
        if not np.array_equal(pool.payloads, np.arange(len(pool))):
            raise IncompatibleError("node pools must list nodes in id order")

    def sample(self, pool, M, rng):
        nodes = pool.payloads[pool.active_indices()]
        s = post_.node_sample(self.beliefs, nodes, M, rng)
        return post_.PosteriorSampleSet(s.sample_means, pool.active_indices())

    def observe(self, index, label, side=()):
        nodes = [index] + [u for u, _ in side]
        values = [label] + [y for _, y in side]
        self.beliefs = post_.node_update(self.beliefs, nodes, values, self.noise_sd)

    def aggregate_gain(self, v, indices):
        A = self.graph.adjacency[np.ix_(indices, indices)]
        return v + A @ v


class GibbsEngine(_Engine):
    pool_kind = "cell"

    def __init__(self, m1: int, m2: int, rank: int, prior_sd: float = 1.0, noise_sd: float = 1.0,
                 burn_in: int = 100, thinning: int = 1):
        self.state = post_.LowRankGibbsState(m1, m2, rank, prior_sd, noise_sd, burn_in, thinning)
        self._cells = None

    def check(self, env, pool):
        super().check(env, pool)
        self._cells = pool.payloads

    def sample(self, pool, M, rng):
        idx = pool.active_indices()
        return post_.gibbs_run(self.state, M, rng, pool.payloads[idx], idx)

    def observe(self, index, label, side=()):
        cells = self._cells
        self.state.observe(cells[index], label)
