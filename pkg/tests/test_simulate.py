import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chaincompress import (
    build_marked,
    committor_closed_form,
    estimate_committor,
    estimate_cycle_counts,
    estimate_hitting_time,
    estimate_reduced_dynamics,
    projections,
    sample_path,
    symmetrize,
)
from chaincompress.marked import marked_propagator
from chaincompress.simulate import marked_occupancy, occupancy_fractions


def test_trajectory_structure(p2_chain):
    path = sample_path(p2_chain, 1, t_max=20.0, seed=0)
    assert path.jump_times[0] == 0.0
    assert np.all(np.diff(path.jump_times) > 0)
    assert path.jump_times[-1] < 20.0
    assert np.all(np.diff(path.states) != 0)
    assert set(np.unique(path.states)) <= {0, 1}
    assert path.state_at(0.0) == 1


def test_fixed_seed_reproducibility(k3_chain):
    a = sample_path(k3_chain, 0, t_max=5.0, seed=7, trajectory_index=3)
    b = sample_path(k3_chain, 0, t_max=5.0, seed=7, trajectory_index=3)
    np.testing.assert_array_equal(a.states, b.states)
    np.testing.assert_array_equal(a.jump_times, b.jump_times)
    c = sample_path(k3_chain, 0, t_max=5.0, seed=7, trajectory_index=4)
    assert a.states.shape != c.states.shape or not np.array_equal(a.states, c.states)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 1000))
def test_trajectory_states_in_range(k3_chain, seed):
    path = sample_path(k3_chain, "stationary", t_max=2.0, seed=seed)
    assert path.states.min() >= 0 and path.states.max() < 3


def test_mean_first_jump_time(p2_chain):
    # exit rate 2 from state 1: mean holding time 1/2
    first = [sample_path(p2_chain, 1, 100.0, seed=11, trajectory_index=i).jump_times[1]
             for i in range(4000)]
    mean, err = np.mean(first), np.std(first, ddof=1) / np.sqrt(len(first))
    assert abs(mean - 0.5) <= 3 * err


def test_monte_carlo_committor_k3(k3_chain, k3_lap):
    bundle = committor_closed_form(k3_lap, [0, 1])
    est = estimate_committor(k3_chain, [0, 1], n_traj=10_000, seed=1)
    gap = np.abs(est.mean - bundle.probabilities)
    assert np.all(gap <= 3 * est.stderr + 1e-12)
    # starts inside the selection are exact with zero variance
    np.testing.assert_array_equal(est.mean[:2], np.eye(2))
    np.testing.assert_array_equal(est.stderr[:2], 0.0)


def test_monte_carlo_committor_single_target(p2_chain):
    est = estimate_committor(p2_chain, [0], n_traj=200, seed=2)
    np.testing.assert_allclose(est.mean, 1.0)


def test_hitting_time_estimator(p2_chain, p2_lap):
    from chaincompress import hitting_times

    H = hitting_times(p2_lap).matrix
    est = estimate_hitting_time(p2_chain, 0, 1, n_traj=4000, seed=3)
    assert est.within(H[0, 1])


def test_reduced_dynamics_estimate(k3_chain, k3_lap):
    bundle = committor_closed_form(k3_lap, [0, 1])
    mc = build_marked(k3_chain, bundle)
    proj = projections(mc, bundle)
    grid = np.array([1e-6, 1.0, 30.0])
    est = estimate_reduced_dynamics(mc, proj, grid, n_traj=10_000, seed=4)
    # t ~ 0: identity; t large: rank-one stationary projector
    for ti, t in enumerate(grid):
        dense = proj.marking.T @ marked_propagator(mc, t) @ proj.marking
        assert np.all(np.abs(est.mean[ti] - dense) <= 3 * est.stderr[ti] + 1e-12)
    np.testing.assert_allclose(est.mean[0], np.eye(2), atol=0.05)
    h_hat = bundle.sqrt_stationary
    np.testing.assert_allclose(est.mean[2], np.outer(h_hat, h_hat), atol=0.05)


def test_cycle_ratio_targets_one_on_k3(k3_chain):
    result = estimate_cycle_counts(k3_chain, 1, 0, [0], t_max=400.0, seed=5)
    assert result.target == pytest.approx(1.0, abs=1e-10)
    assert result.nesting_verified
    assert result.ratio.within(result.target)
    assert result.conditional_ratio.mean <= 1.0 + 1e-12
    assert result.conditional_ratio.within(result.conditional_target)


def test_cycle_ratio_p2(p2_chain):
    result = estimate_cycle_counts(p2_chain, 1, 0, [0], t_max=400.0, seed=6)
    assert result.target == pytest.approx(1.0, abs=1e-10)
    assert result.ratio.within(result.target)


def test_cycle_ratio_with_larger_selection(chain_factory):
    chain, _ = chain_factory(50, n=8)
    subset = (0, 3)
    outside = [s for s in range(8) if s not in subset]
    result = estimate_cycle_counts(chain, outside[0], 0, subset,
                                   t_max=3000.0, seed=7)
    assert result.nesting_verified
    assert result.conditional_ratio.mean <= 1.0 + 1e-12
    assert result.ratio.within(result.target)


def test_occupancy_converges_to_stationary(k3_chain):
    est = occupancy_fractions(k3_chain, t_max=400.0, seed=8)
    assert np.all(np.abs(est.mean - k3_chain.stationary) <= 3 * est.stderr)


def test_marked_sampling_routes_agree(k3_chain, k3_lap):
    bundle = committor_closed_form(k3_lap, [0, 1])
    mc = build_marked(k3_chain, bundle)
    direct = marked_occupancy(mc, t_max=300.0, seed=9, n_reps=24)
    lifted = marked_occupancy(mc, t_max=300.0, seed=10, n_reps=24,
                              via_original=(k3_chain, bundle))
    stderr = np.sqrt(direct.stderr**2 + lifted.stderr**2)
    assert np.all(np.abs(direct.mean - lifted.mean) <= 3 * stderr)
    # both agree with the exact augmented stationary law
    assert np.all(np.abs(direct.mean - mc.stationary) <= 3 * direct.stderr)
