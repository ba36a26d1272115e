"""Adaptive sampling for discovery.

Sequentially label points from a finite unlabeled pool to maximize the sum of
labels, using sample-based information-directed sampling and baseline policies.
"""

from .core import (CandidatePool, Glm, GraphEnv, Item, Linear, LowRank, Replay,
                   env_mean, env_sample_label, make_hard_instance, oracle_top_t)
from .errors import DiscoveryError
from .policies import PolicyConfig, make_policy

__version__ = "0.1.0"

__all__ = [
    "CandidatePool", "Glm", "GraphEnv", "Item", "Linear", "LowRank", "Replay",
    "env_mean", "env_sample_label", "make_hard_instance", "oracle_top_t",
    "DiscoveryError", "PolicyConfig", "make_policy",
]
