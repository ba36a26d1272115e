"""Undirected feedback graphs, generators and structural diagnostics.

The smallest maximal independent set and the clique cover number are NP-hard,
so the diagnostics here return greedy upper bounds. Any independent set uses
at most one node per clique, hence every maximal independent set found is no
larger than any clique cover returned.
"""

from __future__ import annotations

import os
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Graph",
    "gen_random",
    "gen_complete",
    "gen_star",
    "greedy_mis",
    "estimate_smallest_mis",
    "greedy_clique_cover",
    "read_edge_list",
    "write_edge_list",
]


class Graph:
    """Simple undirected graph on nodes ``0..n-1`` with sorted neighbor lists."""

    def __init__(self, adjacency: np.ndarray):
        A = np.array(adjacency, dtype=bool)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("adjacency must be a square matrix")
        if not np.array_equal(A, A.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(A)):
            raise ValueError("self-loops are not allowed")
        A.setflags(write=False)
        self._adj = A
        self._nbrs = tuple(np.flatnonzero(row) for row in A)

    @classmethod
    def empty(cls, n: int) -> Graph:
        return cls(np.zeros((n, n), dtype=bool))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> Graph:
        A = np.zeros((n, n), dtype=bool)
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
            A[u, v] = A[v, u] = True
        return cls(A)

    @property
    def n(self) -> int:
        return self._adj.shape[0]

    @property
    def adjacency(self) -> np.ndarray:
        return self._adj

    def neighbors(self, u: int) -> np.ndarray:
        return self._nbrs[u]

    def degree(self) -> np.ndarray:
        return self._adj.sum(axis=1)

    @property
    def n_edges(self) -> int:
        return int(self._adj.sum() // 2)

    def edges(self) -> list[tuple[int, int]]:
        iu, iv = np.nonzero(np.triu(self._adj, k=1))
        return list(zip(iu.tolist(), iv.tolist()))

    def complement(self) -> Graph:
        C = ~self._adj
        np.fill_diagonal(C, False)
        return Graph(C)

    def is_independent(self, nodes: Iterable[int]) -> bool:
        idx = np.fromiter(nodes, dtype=int)
        return not self._adj[np.ix_(idx, idx)].any()

    def is_clique(self, nodes: Iterable[int]) -> bool:
        idx = np.fromiter(nodes, dtype=int)
        sub = self._adj[np.ix_(idx, idx)]
        return bool(np.all(sub | np.eye(len(idx), dtype=bool)))

    def __eq__(self, other) -> bool:
        return isinstance(other, Graph) and np.array_equal(self._adj, other._adj)

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edges={self.n_edges})"


def _upper_pairs(n: int, p: float, rng) -> np.ndarray:
    draws = rng.random((n, n)) < p
    A = np.triu(draws, k=1)
    return A | A.T


def gen_random(n: int, p: float, rng) -> Graph:
    """Erdos-Renyi graph: every unordered pair joined independently with prob ``p``."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    return Graph(_upper_pairs(n, p, rng))


def gen_complete(n: int) -> Graph:
    A = np.ones((n, n), dtype=bool)
    np.fill_diagonal(A, False)
    return Graph(A)


def gen_star(n: int, p: float, hub_fraction: float, rng) -> Graph:
    """Hubs adjacent to every other node (hubs included); the rest joined with prob ``p``.

    ``floor(hub_fraction * n)`` hubs are drawn uniformly at random from the nodes.
    """
    if not 0 < hub_fraction <= 1:
        raise ValueError("hub_fraction must lie in (0, 1]")
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    n_hubs = int(np.floor(hub_fraction * n + 1e-9))
    A = _upper_pairs(n, p, rng)
    hubs = rng.choice(n, size=n_hubs, replace=False)
    A[hubs, :] = True
    A[:, hubs] = True
    np.fill_diagonal(A, False)
    return Graph(A)


def greedy_mis(graph: Graph, order: Sequence[int]) -> set[int]:
    """Maximal independent set built by scanning ``order`` and keeping free nodes."""
    order = np.asarray(order, dtype=int)
    if sorted(order.tolist()) != list(range(graph.n)):
        raise ValueError("order must be a permutation of the nodes")
    blocked = np.zeros(graph.n, dtype=bool)
    chosen = set()
    for u in order:
        if not blocked[u]:
            chosen.add(int(u))
            blocked[u] = True
            blocked[graph.neighbors(u)] = True
    return chosen


def _residual_degree_order(graph: Graph, rng) -> np.ndarray:
    # repeatedly take a free node of largest degree among free nodes, random ties
    A = graph.adjacency
    free = np.ones(graph.n, dtype=bool)
    order = []
    while free.any():
        deg = np.where(free, (A & free).sum(axis=1), -1)
        best = np.flatnonzero(deg == deg.max())
        u = int(rng.choice(best))
        order.append(u)
        free[u] = False
        free[A[u]] = False
    seen = set(order)
    rest = [u for u in range(graph.n) if u not in seen]
    return np.array(order + rest, dtype=int)


def estimate_smallest_mis(graph: Graph, trials: int, rng) -> int:
    """Upper bound on the size of the smallest maximal independent set.

    Takes the minimum greedy size over the degree-descending order and
    ``trials`` randomized orders, alternating between uniform random
    permutations and a residual-degree order with random tie-breaking.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if graph.n == 0:
        return 0
    best = len(greedy_mis(graph, np.argsort(-graph.degree(), kind="stable")))
    for k in range(trials):
        order = rng.permutation(graph.n) if k % 2 == 0 else _residual_degree_order(graph, rng)
        best = min(best, len(greedy_mis(graph, order)))
    return best


def greedy_clique_cover(graph: Graph) -> list[list[int]]:
    """Partition nodes into cliques by greedy coloring of the complement graph.

    Nodes are colored largest-complement-degree first (ties to lowest index);
    each node joins the first existing class it is fully adjacent to.
    """
    A = graph.adjacency
    comp_deg = (graph.n - 1) - graph.degree()
    order = np.argsort(-comp_deg, kind="stable")
    cliques: list[list[int]] = []
    for u in order:
        for clique in cliques:
            if A[u, clique].all():
                clique.append(int(u))
                break
        else:
            cliques.append([int(u)])
    return [sorted(c) for c in cliques]


def read_edge_list(path: str | os.PathLike, n: int | None = None) -> Graph:
    """Read ``u v`` lines (0-based). Lines starting with ``#`` are comments;
    a ``# n <count>`` header fixes the node count so isolated nodes survive."""
    edges = []
    header_n = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "n":
                    header_n = int(parts[1])
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'u v', got {line!r}")
            try:
                edges.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer node id in {line!r}") from None
    if n is None:
        n = header_n
    if n is None:
        n = 1 + max((max(e) for e in edges), default=-1)
    return Graph.from_edges(n, edges)


def write_edge_list(graph: Graph, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# n {graph.n}\n")
        for u, v in graph.edges():
            fh.write(f"{u} {v}\n")
