"""Exact entropy and mutual information on small discrete instances (nats)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EnumerationTooLarge

__all__ = [
    "DiscreteJoint",
    "entropy",
    "mutual_information",
    "conditional_mutual_information",
    "top_k_tuple",
    "exact_info_gain",
    "MAX_JOINT_STATES",
]

MAX_JOINT_STATES = 10_000
_SUM_TOL = 1e-12


def _as_distribution(p, what="distribution") -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise ValueError(f"{what} has negative mass")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"{what} sums to {p.sum()!r}, not 1")
    return p


def entropy(p) -> float:
    """``-sum p log p`` over all entries of ``p`` (any shape), with ``0 log 0 = 0``."""
    p = _as_distribution(p).ravel()
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


@dataclass(frozen=True)
class DiscreteJoint:
    """Probability table ``table[a, b]`` of two finite random variables."""

    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 2:
            raise ValueError("joint table must be 2-D")
        if np.any(t < 0):
            raise ValueError("joint table has negative mass")
        if abs(t.sum() - 1.0) > _SUM_TOL:
            raise ValueError(f"joint table sums to {t.sum()!r}, not 1")
        object.__setattr__(self, "table", t)

    @property
    def shape(self) -> tuple[int, int]:
        return self.table.shape


def mutual_information(joint) -> float:
    """``I(X; Y) = H(X) + H(Y) - H(X, Y)`` for a 2-D joint table."""
    t = joint.table if isinstance(joint, DiscreteJoint) else DiscreteJoint(joint).table
    mi = entropy(t.sum(axis=1)) + entropy(t.sum(axis=0)) - entropy(t)
    return max(mi, 0.0)


def conditional_mutual_information(joint3) -> float:
    """``I(X; Y | Z)`` for a table indexed ``[x, y, z]``."""
    t = _as_distribution(joint3, "joint")
    if t.ndim != 3:
        raise ValueError("need a 3-D table indexed [x, y, z]")
    h_xz = entropy(t.sum(axis=1))
    h_yz = entropy(t.sum(axis=0))
    h_z = entropy(t.sum(axis=(0, 1)))
    return max(h_xz + h_yz - entropy(t) - h_z, 0.0)


def top_k_tuple(means, k: int) -> tuple[int, ...]:
    """Indices of the ``k`` largest entries, best first, ties to the lowest index."""
    return tuple(int(i) for i in np.argsort(-np.asarray(means), kind="stable")[:k])


def exact_info_gain(prior, label_probs, candidate: int, label_values=None, k: int = 1,
                    max_states: int = MAX_JOINT_STATES) -> float:
    """Mutual information between the identity of the top-``k`` candidates and
    the label of ``candidate``, by full enumeration.

    Parameters
    ----------
    prior : (s,) probabilities over a finite parameter support.
    label_probs : (s, K, L) array; ``label_probs[i, x, l]`` is the probability
        that candidate ``x`` gets label value ``l`` under parameter ``i``.
    label_values : (L,) numeric label values used to rank candidates by their
        expected label. Defaults to ``0, 1, ..., L-1``.
    """
    prior = _as_distribution(prior, "prior")
    P = np.asarray(label_probs, dtype=float)
    if P.ndim != 3 or P.shape[0] != len(prior):
        raise ValueError("label_probs must have shape (support, candidates, labels)")
    s, K, L = P.shape
    if s * L > max_states:
        raise EnumerationTooLarge(f"joint has {s * L} states, budget is {max_states}")
    if not 1 <= k <= K:
        raise ValueError("k must be between 1 and the number of candidates")
    if np.any(np.abs(P.sum(axis=2) - 1.0) > 1e-9):
        raise ValueError("label distributions must sum to 1")
    values = np.arange(L, dtype=float) if label_values is None else np.asarray(label_values, float)
    means = P @ values  # (s, K)

    groups: dict[tuple[int, ...], int] = {}
    rows = []
    for i in range(s):
        key = top_k_tuple(means[i], k)
        g = groups.setdefault(key, len(groups))
        if g == len(rows):
            rows.append(np.zeros(L))
        rows[g] += prior[i] * P[i, candidate]
    table = np.array(rows)
    return mutual_information(table / table.sum())
