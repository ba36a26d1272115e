import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adaptive_discovery.errors import EnumerationTooLarge
from adaptive_discovery.infotheory import (
    DiscreteJoint, conditional_mutual_information, entropy, exact_info_gain, mutual_information,
)


def random_joint(rng, *shape):
    t = rng.random(shape) ** 2
    return t / t.sum()


def test_entropy_examples():
    assert entropy([1.0, 0.0]) == 0.0
    assert entropy([0.5, 0.5]) == pytest.approx(np.log(2))
    for k in (3, 7, 20):
        assert entropy(np.full(k, 1 / k)) == pytest.approx(np.log(k))
    with pytest.raises(ValueError):
        entropy([1.2, -0.2])
    with pytest.raises(ValueError):
        entropy([0.5, 0.4])


def test_mutual_information_examples():
    assert mutual_information(np.outer([0.3, 0.7], [0.1, 0.5, 0.4])) == pytest.approx(0, abs=1e-15)
    assert mutual_information(np.diag([0.5, 0.5])) == pytest.approx(np.log(2))
    with pytest.raises(ValueError):
        DiscreteJoint(np.array([[0.5, 0.4]]))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5), st.integers(1, 5))
def test_identities_on_random_joints(seed, a, b):
    P = random_joint(np.random.default_rng(seed), a, b)
    I = mutual_information(P)
    assert I >= -1e-12
    assert I == pytest.approx(mutual_information(P.T), abs=1e-9)
    px = P.sum(axis=1)
    h_y_given_x = sum(px[i] * entropy(P[i] / px[i]) for i in range(a) if px[i] > 0)
    assert entropy(P) == pytest.approx(entropy(px) + h_y_given_x, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.lists(st.integers(0, 2), min_size=3, max_size=3))
def test_data_processing(seed, f):
    P = random_joint(np.random.default_rng(seed), 3, 3)
    Q = np.zeros((3, 3))
    for y, fy in enumerate(f):
        Q[:, fy] += P[:, y]
    assert mutual_information(Q) <= mutual_information(P) + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000))
def test_chain_rule(seed):
    P = random_joint(np.random.default_rng(seed), 2, 2, 2)  # axes x, y, z
    i_x_yz = mutual_information(P.reshape(2, 4))
    i_x_z = mutual_information(P.sum(axis=1))
    assert i_x_yz == pytest.approx(i_x_z + conditional_mutual_information(P), abs=1e-9)


def test_exact_info_gain_examples():
    # two parameters whose noiseless labels at candidate 0 are disjoint
    probs = np.zeros((2, 2, 2))
    probs[0, 0, 1] = probs[0, 1, 0] = 1.0  # theta 0: candidate 0 is best
    probs[1, 0, 0] = probs[1, 1, 1] = 1.0  # theta 1: candidate 1 is best
    assert exact_info_gain([0.5, 0.5], probs, 0) == pytest.approx(np.log(2))
    assert exact_info_gain([1.0, 0.0], probs, 0) == pytest.approx(0, abs=1e-15)
    assert exact_info_gain([1.0], probs[:1], 1) == 0.0


def test_exact_info_gain_size_guard():
    probs = np.full((50, 2, 300), 1 / 300)
    with pytest.raises(EnumerationTooLarge):
        exact_info_gain(np.full(50, 1 / 50), probs, 0)


def test_exact_info_gain_top_k():
    rng = np.random.default_rng(0)
    probs = rng.random((4, 3, 2))
    probs /= probs.sum(axis=2, keepdims=True)
    prior = np.full(4, 0.25)
    # a finer target variable can only carry more information
    assert exact_info_gain(prior, probs, 1, k=2) >= exact_info_gain(prior, probs, 1, k=1) - 1e-12
