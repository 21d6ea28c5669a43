import numpy as np
import pytest

from chaincompress import (
    brute_force_optimal,
    eps_nuclear_schur,
    first_index_scores,
    greedy_optimality_margin,
    greedy_select,
    nystrom_errors,
    random_reversible_chain,
    spectral_tail_slack,
    symmetrize,
    webgraph_chain,
)
from chaincompress.errors import InvalidRSK, KTooLarge, TooLargeForBruteForce


def test_k3_first_pick_breaks_tie_to_lowest_index(k3_lap):
    scores = first_index_scores(k3_lap)
    np.testing.assert_allclose(scores, scores[0])  # symmetry: all equal
    trace = greedy_select(k3_lap, 1)
    assert trace.indices == (0,)
    assert trace.eps_nuclear[0] == pytest.approx(4 / 3, abs=1e-10)


def test_p2_prefers_the_heavier_state(p2_lap):
    trace = greedy_select(p2_lap, 1)
    assert trace.indices == (0,)
    assert trace.eps_nuclear[0] == pytest.approx(0.5, abs=1e-12)
    scores = first_index_scores(p2_lap)
    assert scores[0] > scores[1]


def test_star_center_preferred_over_leaf():
    adjacency = np.zeros((5, 5))
    adjacency[0, 1:] = adjacency[1:, 0] = 1.0
    lap = symmetrize(webgraph_chain(adjacency))
    assert int(np.argmax(first_index_scores(lap))) == 0


def test_first_scores_match_direct_complement_traces(chain_factory):
    chain, _ = chain_factory(5, n=40)
    lap = symmetrize(chain)
    scores = first_index_scores(lap)
    direct = np.array([eps_nuclear_schur(lap, [i]) for i in range(chain.n)])
    # scores equal the negated singleton error up to one additive constant
    shifted = -direct - scores
    assert np.ptp(shifted) <= 1e-8 * np.abs(direct).max()
    assert int(np.argmax(scores)) == int(np.argmin(direct))


def test_greedy_matches_scratch_recomputation(chain_factory):
    chain, _ = chain_factory(1, n=10)
    lap = symmetrize(chain)
    trace = greedy_select(lap, 3)
    for k in range(1, 4):
        scratch = eps_nuclear_schur(lap, trace.indices[:k])
        assert trace.eps_nuclear[k - 1] == pytest.approx(scratch, rel=1e-9)


def test_score_equals_error_decrement(chain_factory):
    chain, _ = chain_factory(2, n=18)
    trace = greedy_select(symmetrize(chain), 6)
    decrements = trace.eps_nuclear[:-1] - trace.eps_nuclear[1:]
    np.testing.assert_allclose(trace.scores[1:], decrements, rtol=1e-8)


def test_greedy_is_deterministic_and_duplicate_free(chain_factory):
    chain, _ = chain_factory(3, n=25)
    lap = symmetrize(chain)
    a = greedy_select(lap, 8)
    b = greedy_select(lap, 8)
    assert a.indices == b.indices
    assert len(set(a.indices)) == 8
    assert np.all(np.diff(a.eps_nuclear) < 0)


def test_refactorization_path_agrees_with_scratch():
    chain = random_reversible_chain(60, seed=8)
    lap = symmetrize(chain)
    trace = greedy_select(lap, 30)  # crosses the refactor boundary at 25
    scratch = eps_nuclear_schur(lap, trace.indices)
    assert trace.eps_nuclear[-1] == pytest.approx(scratch, rel=1e-9)


def test_spectral_lower_bound_held(chain_factory):
    chain, _ = chain_factory(4, n=20)
    lap = symmetrize(chain)
    trace = greedy_select(lap, 10)
    assert np.all(trace.eps_nuclear >= trace.spectral_lower_bound - 1e-10)


def test_k_out_of_range(k3_lap):
    with pytest.raises(KTooLarge):
        greedy_select(k3_lap, 3)
    with pytest.raises(KTooLarge):
        greedy_select(k3_lap, 0)


def test_brute_force_examples(k3_lap, p2_lap):
    subset, eps = brute_force_optimal(k3_lap, 1)
    assert eps == pytest.approx(4 / 3, abs=1e-10)
    subset, eps = brute_force_optimal(p2_lap, 1)
    assert subset == (0,)
    assert eps == pytest.approx(0.5, abs=1e-12)


def test_greedy_never_beats_exhaustive(chain_factory):
    chain, _ = chain_factory(6, n=10)
    lap = symmetrize(chain)
    trace = greedy_select(lap, 2)
    _, optimal = brute_force_optimal(lap, 2)
    assert trace.eps_nuclear[1] >= optimal - 1e-12


def test_brute_force_caps(k3_lap):
    chain = random_reversible_chain(20, seed=1)
    with pytest.raises(TooLargeForBruteForce):
        brute_force_optimal(symmetrize(chain), 2)
    with pytest.raises(TooLargeForBruteForce):
        brute_force_optimal(k3_lap, 1, s_max=0)


def test_optimality_margin_nonpositive(chain_factory):
    chain, _ = chain_factory(7, n=12)
    lap = symmetrize(chain)
    trace = greedy_select(lap, 4)
    _, optimal = brute_force_optimal(lap, 2)
    margins = greedy_optimality_margin(trace, 2, optimal)
    assert margins.shape == (3,)  # k = 2, 3, 4
    assert np.all(margins <= 1e-12)


def test_optimality_margin_first_step():
    # k = s = 1: greedy is exhaustive, so the gap is zero against bound 2
    chain = random_reversible_chain(9, seed=2)
    lap = symmetrize(chain)
    trace = greedy_select(lap, 1)
    _, optimal = brute_force_optimal(lap, 1)
    margins = greedy_optimality_margin(trace, 1, optimal)
    assert margins[0] == pytest.approx(-2.0, abs=1e-12)


def test_spectral_tail_slack(chain_factory):
    chain, _ = chain_factory(9, n=30)
    lap = symmetrize(chain)
    trace = greedy_select(lap, 8)
    spectrum = lap.pseudoinverse_eigenvalues()
    assert spectral_tail_slack(trace, spectrum, 8, 4, 2) >= 0
    # r = 0 keeps the full trace in the second term: a loose but valid bound
    slack0 = spectral_tail_slack(trace, spectrum, 8, 4, 0)
    assert slack0 >= spectral_tail_slack(trace, spectrum, 8, 4, 2) >= 0
    with pytest.raises(InvalidRSK):
        spectral_tail_slack(trace, spectrum, 4, 4, 1)
    with pytest.raises(InvalidRSK):
        spectral_tail_slack(trace, spectrum, 8, 3, 3)


def test_k3_small_tail_slack(k3_lap):
    chain = random_reversible_chain(6, seed=10)
    lap = symmetrize(chain)
    trace = greedy_select(lap, 2)
    spectrum = lap.pseudoinverse_eigenvalues()
    assert spectral_tail_slack(trace, spectrum, 2, 2, 1) >= 0


def test_nystrom_error_matches_trace_path(chain_factory):
    chain, _ = chain_factory(12, n=14)
    lap = symmetrize(chain)
    trace = greedy_select(lap, 5)
    closed = nystrom_errors(lap, sorted(trace.indices)).nuclear
    assert closed == pytest.approx(trace.eps_nuclear[-1], rel=1e-9)
