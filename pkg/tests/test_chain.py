import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from chaincompress import build_chain, random_reversible_chain, synthetic_webgraph, webgraph_chain
from chaincompress.errors import (
    AsymmetricAdjacency,
    DetailedBalanceViolated,
    DisconnectedGraph,
    NonPositiveStationary,
)
from conftest import K3_RATES, P2_RATES


def test_k3_symmetric_chain_has_uniform_stationary(k3_chain):
    np.testing.assert_allclose(k3_chain.stationary, np.full(3, 1 / 3), atol=1e-12)
    np.testing.assert_allclose(k3_chain.dense_rates(),
                               K3_RATES - np.diag([2.0, 2.0, 2.0]), atol=1e-15)


def test_p2_stationary_solved_from_rates(p2_chain):
    # hand oracle: pi solves pi_0 * 1 = pi_1 * 2 with pi_0 + pi_1 = 1
    np.testing.assert_allclose(p2_chain.stationary, [2 / 3, 1 / 3], atol=1e-12)


def test_detailed_balance_violation_raises():
    with pytest.raises(DetailedBalanceViolated):
        build_chain(P2_RATES, stationary=np.array([0.5, 0.5]))


def test_explicit_stationary_must_be_positive_and_normalized():
    with pytest.raises(NonPositiveStationary):
        build_chain(P2_RATES, stationary=np.array([1.0, -0.1]))
    with pytest.raises(NonPositiveStationary):
        build_chain(P2_RATES, stationary=np.array([2 / 3, 2 / 3]))


def test_disconnected_rates_raise():
    rates = np.zeros((4, 4))
    rates[0, 1] = rates[1, 0] = 1.0
    rates[2, 3] = rates[3, 2] = 1.0
    with pytest.raises(DisconnectedGraph):
        build_chain(rates)


def test_negative_offdiagonal_rejected():
    bad = K3_RATES.copy()
    bad[0, 1] = -1.0
    with pytest.raises(ValueError):
        build_chain(bad)


def test_webgraph_k3_matches_halved_rates():
    adjacency = (K3_RATES > 0).astype(float)
    chain = webgraph_chain(adjacency)
    np.testing.assert_allclose(chain.stationary, np.full(3, 1 / 3), atol=1e-15)
    expected = 0.5 * np.array([[-2.0, 1, 1], [1, -2, 1], [1, 1, -2]])
    np.testing.assert_allclose(chain.dense_rates(), expected, atol=1e-15)


def test_webgraph_path_stationary_proportional_to_degree():
    adjacency = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
    chain = webgraph_chain(adjacency)
    np.testing.assert_allclose(chain.stationary, [0.25, 0.5, 0.25], atol=1e-15)


def test_webgraph_isolated_vertex_raises():
    adjacency = np.zeros((3, 3))
    adjacency[0, 1] = adjacency[1, 0] = 1.0
    with pytest.raises(DisconnectedGraph):
        webgraph_chain(adjacency)


def test_webgraph_asymmetric_adjacency_raises():
    adjacency = np.array([[0, 1, 1], [0, 0, 1], [1, 1, 0]], dtype=float)
    with pytest.raises(AsymmetricAdjacency):
        webgraph_chain(adjacency)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(3, 30))
def test_random_chain_invariants(seed, n):
    chain = random_reversible_chain(n, seed=seed)
    rates = chain.dense_rates()
    assert np.abs(rates.sum(axis=1)).max() < 1e-10 * max(np.abs(rates).max(), 1.0)
    assert np.all(np.diag(rates) < 0)
    off = rates - np.diag(np.diag(rates))
    assert off.min() >= 0
    flow = chain.stationary[:, None] * rates
    assert np.abs(flow - flow.T).max() < 1e-12 * np.abs(flow).max()
    assert chain.stationary.min() > 0
    assert abs(chain.stationary.sum() - 1) < 1e-12


def test_synthetic_webgraph_is_simple_symmetric_connected():
    adj = synthetic_webgraph(200, attach=3, seed=4)
    assert abs(adj - adj.T).max() == 0
    assert abs(adj.diagonal()).max() == 0
    assert set(np.unique(adj.data)) == {1.0}
    chain = webgraph_chain(adj)  # would raise if disconnected
    assert chain.n == 200
    # determinism
    again = synthetic_webgraph(200, attach=3, seed=4)
    assert abs(adj - again).max() == 0


def test_sparse_input_accepted(k3_chain):
    sparse_chain = build_chain(sp.csr_array(K3_RATES))
    np.testing.assert_allclose(sparse_chain.dense_rates(), k3_chain.dense_rates())
