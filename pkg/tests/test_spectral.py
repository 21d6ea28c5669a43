import numpy as np
import pytest

from chaincompress import (
    killed,
    matrix_norms,
    propagator,
    spectral_from_laplacian,
    symmetrize,
    time_grid,
    unsymmetrize,
)
from chaincompress.errors import (
    AsymmetryResidual,
    DisconnectedGraph,
    NegativeTime,
    NonFinite,
    NonPositiveGamma,
)


def test_k3_laplacian_and_spectrum(k3_lap):
    expected = np.array([[2.0, -1, -1], [-1, 2, -1], [-1, -1, 2]])
    np.testing.assert_allclose(k3_lap.matrix, expected, atol=1e-14)
    np.testing.assert_allclose(k3_lap.eigenvalues, [0.0, 3.0, 3.0], atol=1e-12)
    assert k3_lap.null_rank == 1


def test_p2_laplacian_hand_computed(p2_lap):
    # L[0,1] = -h_0 R[0,1] / h_1 = -sqrt(2)
    expected = np.array([[1.0, -np.sqrt(2)], [-np.sqrt(2), 2.0]])
    np.testing.assert_allclose(p2_lap.matrix, expected, atol=1e-14)
    np.testing.assert_allclose(p2_lap.eigenvalues, [0.0, 3.0], atol=1e-12)


def test_null_vector_annihilated(k3_lap, p2_lap):
    for lap in (k3_lap, p2_lap):
        h = lap.sqrt_stationary
        assert np.abs(lap.matrix @ h).max() < 1e-12
        assert np.abs(lap.pseudoinverse @ h).max() < 1e-12


def test_pseudoinverse_identities(k3_lap, p2_lap, chain_factory):
    chain, _ = chain_factory(17)
    for lap in (k3_lap, p2_lap, symmetrize(chain)):
        K, L = lap.pseudoinverse, lap.matrix
        scale = np.abs(K).max()
        assert np.abs(K @ L @ K - K).max() <= 1e-10 * scale
        assert np.abs(L @ K @ L - L).max() <= 1e-10 * np.abs(L).max()


def test_propagator_at_zero_is_identity(k3_lap):
    np.testing.assert_allclose(propagator(k3_lap, 0.0), np.eye(3), atol=1e-14)


def test_propagator_long_time_limit_is_stationary_projector(k3_lap):
    limit = np.full((3, 3), 1 / 3)
    np.testing.assert_allclose(propagator(k3_lap, 50.0), limit, atol=1e-12)


def test_p2_propagator_matches_two_by_two_spectral_oracle(p2_lap):
    # oracle: P = h h^T + exp(-3t) u u^T with u the unit vector orthogonal to h
    h = p2_lap.sqrt_stationary
    u = np.array([h[1], -h[0]])
    for t in (0.3, 1.0, 4.0):
        oracle = np.outer(h, h) + np.exp(-3.0 * t) * np.outer(u, u)
        np.testing.assert_allclose(propagator(p2_lap, t), oracle, atol=1e-13)


def test_negative_time_rejected(k3_lap):
    with pytest.raises(NegativeTime):
        propagator(k3_lap, -0.1)


def test_semigroup_property(p2_lap, k3_lap):
    rng = np.random.default_rng(0)
    for lap in (p2_lap, k3_lap):
        s, t = rng.uniform(0.05, 3.0, size=2)
        gap = propagator(lap, s + t) - propagator(lap, s) @ propagator(lap, t)
        assert matrix_norms(gap).spectral <= 1e-10


def test_probability_conservation(k3_lap):
    h = k3_lap.sqrt_stationary
    for t in time_grid(k3_lap, points=9):
        assert abs(h @ propagator(k3_lap, t) @ h - 1.0) < 1e-10


def test_unsymmetrize_uniform_h_is_identity_transform(k3_lap):
    P = propagator(k3_lap, 0.8)
    np.testing.assert_allclose(unsymmetrize(P, k3_lap.sqrt_stationary), P, atol=1e-14)


def test_unsymmetrize_gives_row_stochastic_transitions(p2_lap):
    for t in (0.2, 1.0, 7.0):
        trans = unsymmetrize(propagator(p2_lap, t), p2_lap.sqrt_stationary)
        assert np.abs(trans.sum(axis=1) - 1.0).max() < 1e-12
        assert trans.min() >= 0


def test_unsymmetrize_at_zero(k3_lap):
    np.testing.assert_allclose(
        unsymmetrize(propagator(k3_lap, 0.0), k3_lap.sqrt_stationary), np.eye(3),
        atol=1e-14)


def test_killed_operators(k3_lap):
    ops = killed(k3_lap, 0.25)
    np.testing.assert_allclose(ops.matrix @ ops.inverse, np.eye(3), atol=1e-12)
    assert abs(np.linalg.eigvalsh(ops.matrix)[0] - 0.25) < 1e-12
    t = 0.9
    np.testing.assert_allclose(ops.propagator(t),
                               np.exp(-0.25 * t) * propagator(k3_lap, t), atol=1e-12)
    with pytest.raises(NonPositiveGamma):
        killed(k3_lap, 0.0)


def test_norms_identity_and_rank_one(k3_lap):
    eye = matrix_norms(np.eye(3))
    assert eye.spectral == pytest.approx(1.0) and eye.nuclear == pytest.approx(3.0)
    h = k3_lap.sqrt_stationary
    rank1 = matrix_norms(np.outer(h, h))
    assert rank1.spectral == pytest.approx(1.0, abs=1e-12)
    assert rank1.nuclear == pytest.approx(1.0, abs=1e-12)


def test_norms_of_k3_pseudoinverse(k3_lap):
    norms = matrix_norms(k3_lap.pseudoinverse)
    assert norms.spectral == pytest.approx(1 / 3, abs=1e-12)
    assert norms.nuclear == pytest.approx(2 / 3, abs=1e-12)


def test_norms_reject_nonfinite():
    with pytest.raises(NonFinite):
        matrix_norms(np.array([[1.0, np.nan], [0.0, 1.0]]))


def test_symmetrize_detects_broken_detailed_balance(p2_chain):
    import dataclasses

    broken = dataclasses.replace(p2_chain, stationary=np.array([0.5, 0.5]),
                                 sqrt_stationary=np.sqrt([0.5, 0.5]))
    with pytest.raises(AsymmetryResidual):
        symmetrize(broken)


def test_spectral_from_laplacian_requires_single_null():
    block = np.array([[1.0, -1.0, 0, 0], [-1.0, 1.0, 0, 0],
                      [0, 0, 1.0, -1.0], [0, 0, -1.0, 1.0]])
    with pytest.raises(DisconnectedGraph):
        spectral_from_laplacian(block)


def test_time_grid_spans_five_decades_around_mean_relaxation(k3_lap):
    grid = time_grid(k3_lap)
    anchor = k3_lap.trace_pseudoinverse / k3_lap.n
    assert grid.size == 64
    assert grid[0] == pytest.approx(1e-2 * anchor)
    assert grid[-1] == pytest.approx(1e3 * anchor)
    assert np.all(np.diff(np.log(grid)) > 0)
