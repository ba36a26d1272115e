import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adaptive_discovery.core import (
    CandidatePool, Glm, GraphEnv, Linear, LowRank, Replay, entry_bound, env_mean, env_sample_label,
    incoherence_constant, make_hard_instance, mean_vector, oracle_top_t, regret_ledger,
)
from adaptive_discovery.errors import HorizonError, PayloadMismatchError
from adaptive_discovery.graphtools import Graph, gen_complete


def test_env_mean_examples():
    pool = CandidatePool.from_features([[0.5, 2.0]])
    assert env_mean(Linear(np.array([1.0, 0.0])), pool.item(0)) == 0.5
    glm_pool = CandidatePool.from_features([[1.0, 1.0]])
    assert env_mean(Glm(np.array([1.0, -1.0])), glm_pool.item(0)) == 0.5
    cells = CandidatePool.from_cells(2)
    env = LowRank(np.array([[1.0], [0.0]]), np.array([[2.0], [3.0]]))
    assert env_mean(env, cells.item(1)) == 3.0  # cell (0, 1)


def test_payload_mismatch_raises():
    env = Linear(np.array([1.0, 0.0]))
    with pytest.raises(PayloadMismatchError):
        env_mean(env, CandidatePool.from_nodes(3).item(0))
    with pytest.raises(PayloadMismatchError):
        env_mean(env, CandidatePool.from_features([[1.0, 2.0, 3.0]]).item(0))


def test_sample_label_examples():
    label, side = env_sample_label(Replay(np.array([0.9, 0.2])), CandidatePool.from_nodes(2).item(0),
                                   np.random.default_rng(0))
    assert (label, side) == (0.9, [])

    pool = CandidatePool.from_features([[0.3, -1.2]])
    env = Linear(np.array([2.0, 1.0]), noise_sd=0.0)
    label, side = env_sample_label(env, pool.item(0), np.random.default_rng(0))
    assert label == env_mean(env, pool.item(0)) and side == []


def test_star_hub_observes_every_other_node():
    n = 12
    g = Graph.from_edges(n, [(0, j) for j in range(1, n)])
    env = GraphEnv(g, np.arange(n, dtype=float), noise_sd=1.0)
    _, side = env.sample_label(CandidatePool.from_nodes(n).item(0), np.random.default_rng(1))
    assert sorted(u for u, _ in side) == list(range(1, n))
    _, leaf_side = env.sample_label(CandidatePool.from_nodes(n).item(5), np.random.default_rng(1))
    assert [u for u, _ in leaf_side] == [0]


def test_complete_graph_observes_everything():
    env = GraphEnv(gen_complete(6), np.zeros(6), noise_sd=1.0)
    _, side = env.sample_label(CandidatePool.from_nodes(6).item(3), np.random.default_rng(0))
    assert sorted(u for u, _ in side) == [0, 1, 2, 4, 5]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.5, 3.0))
def test_truncated_graph_noise_respects_bound(seed, B):
    rng = np.random.default_rng(seed)
    values = rng.uniform(-0.4, 0.4, size=8)
    env = GraphEnv(gen_complete(8), values, noise_sd=2.0, bound_B=B)
    label, side = env.sample_label(CandidatePool.from_nodes(8).item(0), rng)
    assert abs(label) <= B + 1e-12
    assert all(abs(v) <= B + 1e-12 for _, v in side)


def test_glm_means_in_unit_interval():
    rng = np.random.default_rng(0)
    X = 5 * rng.normal(size=(200, 4))
    means = mean_vector(Glm(rng.normal(size=4)), CandidatePool.from_features(X))
    assert np.all((means >= 0) & (means <= 1))


def test_low_rank_mean_matrix_rank():
    rng = np.random.default_rng(0)
    env = LowRank(rng.normal(size=(10, 2)), rng.normal(size=(10, 2)))
    assert np.linalg.matrix_rank(env.matrix) <= 2


def test_oracle_top_t_examples():
    env = Replay(np.array([0.3, 0.1, 0.2]))
    pool = CandidatePool.from_nodes(3)
    idx, value = oracle_top_t(env, pool, 2)
    assert idx == {0, 2} and value == pytest.approx(0.5)
    assert oracle_top_t(env, pool, 0) == (set(), 0.0)
    flat = Replay(np.full(5, 0.5))
    assert oracle_top_t(flat, CandidatePool.from_nodes(5), 3) == ({0, 1, 2}, 1.5)
    with pytest.raises(HorizonError):
        oracle_top_t(env, pool, 4)


def test_oracle_top_t_linear_means():
    pool = CandidatePool.from_features(np.array([[3.0], [1.0], [2.0]]))
    assert oracle_top_t(Linear(np.array([1.0])), pool, 2) == ({0, 2}, 5.0)


def test_make_hard_instance():
    env, pool = make_hard_instance(3, 0.5)
    means = mean_vector(env, pool)
    assert len(pool) == 9
    assert means.tolist() == [0.5, 0.5, 0.5] + [0.0] * 6
    assert oracle_top_t(env, pool, 3)[1] == 1.5
    env1, pool1 = make_hard_instance(1, 0.7)
    assert mean_vector(env1, pool1).tolist() == [0.7]
    assert env.noise_sd == 1.0 and env.graph.n_edges == 0


def test_pool_deactivation():
    pool = CandidatePool.from_nodes(4)
    pool.deactivate(2)
    assert pool.n_active == 3 and pool.active_indices().tolist() == [0, 1, 3]
    with pytest.raises(ValueError):
        pool.deactivate(2)
    clone = pool.copy()
    clone.deactivate(0)
    assert pool.n_active == 3


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=12), st.data())
def test_regret_ledger_properties(means, data):
    means = np.array(means)
    T = data.draw(st.integers(1, len(means)))
    chosen = data.draw(st.permutations(range(len(means))))[:T]
    ledger = regret_ledger(means, chosen, T)
    np.testing.assert_allclose(np.cumsum(ledger.instant), ledger.cumulative, atol=1e-12)
    assert ledger.oracle_value == pytest.approx(np.sort(means)[::-1][:T].sum())
    assert ledger.final == pytest.approx(ledger.oracle_value - means[chosen].sum())
    # the t best items always dominate any t chosen items
    assert np.all(ledger.cumulative >= -1e-9)


def test_regret_ledger_instant_can_be_negative():
    # choosing the second best first costs regret that is refunded at step two
    ledger = regret_ledger(np.array([2.0, 1.0]), [1, 0])
    assert ledger.instant.tolist() == [1.0, -1.0]
    assert ledger.final == 0.0


def test_incoherence_of_spread_matrix_is_small():
    m = 16
    ones = np.ones((m, 1))
    M = ones @ ones.T
    assert incoherence_constant(M, 1) == pytest.approx(1.0 / m)
    assert entry_bound(M, 1) > 0
    spike = np.zeros((m, m))
    spike[0, 0] = 1.0
    assert incoherence_constant(spike, 1) == pytest.approx(m)
