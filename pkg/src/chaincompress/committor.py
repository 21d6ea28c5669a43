"""Committor matrices, hitting times, and reduced stationary quantities.

The committor entry (i, j) is the probability that the chain started in
state i first reaches the selected set at its member j. Both the direct
absorbing-boundary linear solve and the closed form through the fundamental
matrix K are provided; they agree to solver precision and serve as mutual
oracles.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .chain import ReversibleChain
from .errors import NonPositiveGamma, SingularComplementBlock, SingularPrincipalBlock
from .spectral import KilledOperators, SpectralLaplacian
from .validation import check_index_set


@dataclass(frozen=True)
class CommittorBundle:
    """Committor matrices for a selected index set, plus derived quantities.

    Attributes
    ----------
    indices : tuple of int
        Selected states, sorted ascending; columns follow this order.
    probabilities : ndarray, shape (n, m)
        Row-stochastic committor matrix; rows over ``indices`` equal the
        identity.
    symmetrized : ndarray, shape (n, m)
        Diag(h) @ probabilities @ Diag(h_hat)^-1, a contraction with
        top singular value exactly one.
    stationary : ndarray, shape (m,)
        Stationary distribution of the induced chain over the selection.
    sqrt_stationary : ndarray
        Entrywise square root of ``stationary``.
    marking_time : float
        Expected time to reach the selection from a stationary start
        (zero when every state is selected).
    sqrt_stationary_full : ndarray
        h of the parent chain, kept for downstream transforms.
    principal_condition : float
        Condition number of the principal block K[I, I]; reported, never
        used to regularize.
    """

    indices: tuple
    probabilities: np.ndarray
    symmetrized: np.ndarray
    stationary: np.ndarray
    sqrt_stationary: np.ndarray
    marking_time: float
    sqrt_stationary_full: np.ndarray
    principal_condition: float

    @property
    def n(self) -> int:
        return self.probabilities.shape[0]

    @property
    def n_selected(self) -> int:
        return len(self.indices)


def _principal_factor(block: np.ndarray):
    try:
        return sla.cho_factor(block, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularPrincipalBlock(str(exc)) from None
    except sla.LinAlgError as exc:  # scipy's own error type
        raise SingularPrincipalBlock(str(exc)) from None


def committor_closed_form(lap: SpectralLaplacian, indices) -> CommittorBundle:
    """Committor bundle from the fundamental matrix K = L^+.

    Uses the closed form built on the principal block K[I, I], which is
    positive definite for any proper selection of an irreducible chain.
    """
    idx = check_index_set(indices, lap.n)
    h = lap.sqrt_stationary
    n, m = lap.n, len(idx)
    if m == n:
        eye = np.eye(n)
        return CommittorBundle(
            indices=idx,
            probabilities=eye,
            symmetrized=eye.copy(),
            stationary=lap.stationary.copy(),
            sqrt_stationary=h.copy(),
            marking_time=0.0,
            sqrt_stationary_full=h,
            principal_condition=1.0,
        )
    sel = np.asarray(idx)
    K = lap.pseudoinverse
    block = K[np.ix_(sel, sel)]
    factor = _principal_factor(block)
    h_sel = h[sel]
    y = sla.cho_solve(factor, h_sel)               # K[I,I]^-1 h_I
    omega = 1.0 / float(h_sel @ y)                 # mean marking time
    cross = sla.cho_solve(factor, K[sel, :]).T     # K[:,I] K[I,I]^-1
    escape = h - cross @ h_sel
    tilde = (omega * np.outer(escape, y) + cross) * (h_sel[None, :] / h[:, None])
    pi_hat = omega * h_sel * y
    h_hat = np.sqrt(pi_hat)
    sym = tilde * (h[:, None] / h_hat[None, :])
    return CommittorBundle(
        indices=idx,
        probabilities=tilde,
        symmetrized=sym,
        stationary=pi_hat,
        sqrt_stationary=h_hat,
        marking_time=omega,
        sqrt_stationary_full=h,
        principal_condition=float(np.linalg.cond(block)),
    )


def committor_absorbing_solve(chain: ReversibleChain, indices) -> np.ndarray:
    """Committor probabilities from the absorbing-boundary linear solve.

    Solves ``R[comp, comp] X = -R[comp, I]`` and stacks the identity on the
    selected rows. Independent of the fundamental-matrix route.
    """
    idx = check_index_set(indices, chain.n)
    sel = np.asarray(idx)
    comp = np.setdiff1d(np.arange(chain.n), sel)
    out = np.zeros((chain.n, len(idx)))
    out[sel, np.arange(len(idx))] = 1.0
    if comp.size:
        dense = chain.dense_rates()
        try:
            interior = sla.solve(dense[np.ix_(comp, comp)], -dense[np.ix_(comp, sel)])
        except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
            raise SingularComplementBlock(str(exc)) from None
        out[comp, :] = interior
    return out


@dataclass(frozen=True)
class KilledCommittorBundle:
    """Committor-like quantities of the chain killed at rate gamma.

    ``probabilities`` is substochastic (killing may occur before the
    selection is reached) and converges to the unkilled committor linearly
    in gamma.
    """

    gamma: float
    indices: tuple
    probabilities: np.ndarray
    symmetrized: np.ndarray
    stationary: np.ndarray
    sqrt_stationary: np.ndarray
    sqrt_stationary_full: np.ndarray


def killed_committor(ops: KilledOperators, indices) -> KilledCommittorBundle:
    """Killed committor from the shifted inverse (L + gamma I)^-1."""
    if ops.gamma <= 0:
        raise NonPositiveGamma(f"killing rate must be positive, got {ops.gamma}")
    idx = check_index_set(indices, ops.base.n)
    sel = np.asarray(idx)
    h = ops.base.sqrt_stationary
    Kg = ops.inverse
    factor = _principal_factor(Kg[np.ix_(sel, sel)])
    cross = sla.cho_solve(factor, Kg[sel, :]).T
    tilde = cross * (h[sel][None, :] / h[:, None])
    pi_hat = tilde.T @ (h**2)
    h_hat = np.sqrt(pi_hat)
    sym = tilde * (h[:, None] / h_hat[None, :])
    return KilledCommittorBundle(
        gamma=ops.gamma,
        indices=idx,
        probabilities=tilde,
        symmetrized=sym,
        stationary=pi_hat,
        sqrt_stationary=h_hat,
        sqrt_stationary_full=h,
    )


@dataclass(frozen=True)
class HittingTimes:
    """Mean first passage times H and the scaled pseudoinverse S.

    ``S = Diag(h)^-1 K Diag(h)^-1`` and ``H = 1 diag(S)^T - S``, so the
    diagonal of H vanishes identically.
    """

    matrix: np.ndarray
    scaled_pseudoinverse: np.ndarray


def hitting_times(lap: SpectralLaplacian) -> HittingTimes:
    h = lap.sqrt_stationary
    scaled = lap.pseudoinverse / np.outer(h, h)
    matrix = np.diag(scaled)[None, :] - scaled
    np.fill_diagonal(matrix, 0.0)
    return HittingTimes(matrix=matrix, scaled_pseudoinverse=scaled)


def mean_marking_time(lap: SpectralLaplacian, indices) -> float:
    """Expected time to reach the selection from a stationary start.

    Returns 0 by convention when every state is selected.
    """
    idx = check_index_set(indices, lap.n)
    if len(idx) == lap.n:
        return 0.0
    sel = np.asarray(idx)
    block = lap.pseudoinverse[np.ix_(sel, sel)]
    factor = _principal_factor(block)
    h_sel = lap.sqrt_stationary[sel]
    return 1.0 / float(h_sel @ sla.cho_solve(factor, h_sel))


def mean_marking_time_absorbing(chain: ReversibleChain, indices) -> float:
    """Oracle for the marking time: stationary-weighted absorbing solve."""
    idx = check_index_set(indices, chain.n)
    comp = np.setdiff1d(np.arange(chain.n), np.asarray(idx))
    if comp.size == 0:
        return 0.0
    dense = chain.dense_rates()
    expected = sla.solve(dense[np.ix_(comp, comp)], -np.ones(comp.size))
    return float(chain.stationary[comp] @ expected)
