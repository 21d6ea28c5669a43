import numpy as np
import pytest

from chaincompress import (
    committor_closed_form,
    flow_limit_check,
    hitting_preservation,
    induced_chain,
    induced_from_k,
    interpretation_checks,
    symmetrize,
)


def _setup(chain, subset):
    lap = symmetrize(chain)
    bundle = committor_closed_form(lap, subset)
    return lap, bundle, induced_chain(chain, bundle)


def test_k3_induced_rates(k3_chain):
    _, _, ic = _setup(k3_chain, [0, 1])
    np.testing.assert_allclose(ic.rates, [[-1.0, 1.0], [1.0, -1.0]], atol=1e-12)
    np.testing.assert_allclose(ic.stationary, [0.5, 0.5], atol=1e-12)


def test_full_selection_recovers_original(k3_chain, p2_chain):
    for chain in (k3_chain, p2_chain):
        _, _, ic = _setup(chain, list(range(chain.n)))
        np.testing.assert_allclose(ic.rates, chain.dense_rates(), atol=1e-12)


def test_both_constructions_agree(chain_factory):
    worst = 0.0
    for seed in range(50):
        chain, subset = chain_factory(seed)
        lap, bundle, ic = _setup(chain, subset)
        other = induced_from_k(lap, subset)
        # scale against the parent chain: a singleton selection makes both
        # induced rate matrices (correctly) zero
        scale = np.abs(chain.dense_rates()).max()
        worst = max(worst, float(np.abs(ic.rates - other.rates).max() / scale))
        np.testing.assert_allclose(ic.stationary, other.stationary, atol=1e-12)
    assert worst <= 1e-10


def test_single_state_selection(k3_lap):
    ic = induced_from_k(k3_lap, [1])
    np.testing.assert_allclose(ic.rates, [[0.0]], atol=1e-12)
    np.testing.assert_allclose(ic.stationary, [1.0], atol=1e-12)


def test_induced_is_reversible_chain(chain_factory):
    chain, subset = chain_factory(31, subset_size=4)
    _, _, ic = _setup(chain, subset)
    rates = ic.rates
    assert np.abs(rates.sum(axis=1)).max() < 1e-10 * np.abs(rates).max()
    off = rates - np.diag(np.diag(rates))
    assert off.min() >= -1e-13 * np.abs(rates).max()
    assert np.all(np.diag(rates) < 0)
    flow = ic.stationary[:, None] * rates
    assert np.abs(flow - flow.T).max() < 1e-12 * np.abs(flow).max()


def test_laplacian_sign_structure_and_interlacing(chain_factory):
    chain, subset = chain_factory(8, subset_size=5)
    _, _, ic = _setup(chain, subset)
    off = ic.laplacian - np.diag(np.diag(ic.laplacian))
    assert off.max() <= 1e-12
    assert ic.laplacian_eigenvalues[1] > 0


def test_pseudoinverse_identity(chain_factory):
    chain, subset = chain_factory(12, subset_size=3)
    _, _, ic = _setup(chain, subset)
    target = np.eye(ic.n_selected) - np.outer(ic.sqrt_stationary, ic.sqrt_stationary)
    np.testing.assert_allclose(ic.laplacian @ ic.pseudoinverse, target, atol=1e-10)


def test_k3_interpretation_examples(k3_chain):
    _, _, ic = _setup(k3_chain, [0, 1])
    # expected time from 0 to reach {1} is the K3 hitting time, exactly 1
    assert -1.0 / ic.rates[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert -ic.rates[0, 1] / ic.rates[0, 0] == pytest.approx(1.0, abs=1e-12)
    report = interpretation_checks(k3_chain, ic)
    assert report.passed


def test_interpretation_on_random_chain(chain_factory):
    chain, _ = chain_factory(41, subset_size=3)
    _, _, ic = _setup(chain, (0, 2, 4))
    report = interpretation_checks(chain, ic)
    assert report.passed, (report.holding_residual, report.jump_residual,
                           report.stationary_residual)


def test_k3_hitting_preserved(k3_chain, k3_lap):
    _, _, ic = _setup(k3_chain, [0, 1])
    assert hitting_preservation(k3_lap, ic) <= 1e-12


def test_full_selection_hitting_deviation_zero(k3_chain, k3_lap):
    _, _, ic = _setup(k3_chain, [0, 1, 2])
    assert hitting_preservation(k3_lap, ic) <= 1e-10


def test_hitting_preserved_on_random_chain(chain_factory):
    from chaincompress import hitting_times

    chain, _ = chain_factory(57, n=20)
    rng = np.random.default_rng(57)
    subset = tuple(sorted(rng.choice(20, size=4, replace=False)))
    lap, bundle, ic = _setup(chain, subset)
    H_max = hitting_times(lap).matrix.max()
    assert hitting_preservation(lap, ic) <= 1e-8 * H_max


def test_flow_limit_first_order(k3_chain):
    lap, bundle, ic = _setup(k3_chain, [0, 1])
    res = flow_limit_check(k3_chain, lap, bundle, ic, 1e-4)
    assert res <= 1e-3
    res_half = flow_limit_check(k3_chain, lap, bundle, ic, 5e-5)
    assert res_half == pytest.approx(res / 2, rel=0.1)


def test_flow_limit_full_selection(k3_chain):
    lap, bundle, ic = _setup(k3_chain, [0, 1, 2])
    # with everything selected the finite-t flow estimate converges to the flow
    assert flow_limit_check(k3_chain, lap, bundle, ic, 1e-5) <= 1e-4
