"""Greedy state selection by nuclear-error maximization, with exact scores.

Each step adds the state whose inclusion removes the most nuclear low-rank
error. With the complement-block inverse M = (L[comp, comp])^-1 maintained
incrementally, the removal score of candidate i is |M[:, i]|^2 / M[i, i]
and the error drops by exactly that amount. The first step is special (the
empty-selection error diverges) and reduces to minimizing the stationary-
scaled diagonal of the fundamental matrix.
"""

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import InvalidRSK, KTooLarge, TooLargeForBruteForce
from .spectral import SpectralLaplacian
from .validation import check_index_set

REFACTOR_EVERY = 25


@dataclass(frozen=True)
class SelectionTrace:
    """Greedy selection history.

    Attributes
    ----------
    indices : tuple of int
        Chosen states in selection order.
    eps_nuclear : ndarray
        Nuclear low-rank error after each step; strictly decreasing for an
        irreducible chain.
    scores : ndarray
        Score of the chosen state per step. From the second step on, the
        score equals the decrement ``eps_nuclear[k-1] - eps_nuclear[k]``;
        the first entry is the (shifted) singleton score, since the
        empty-selection error diverges.
    spectral_lower_bound : ndarray
        Tail eigenvalue sums of the fundamental matrix: after k picks the
        error can never drop below the sum beyond the top k+1 eigenvalues.
    trace_k : float
        Trace of the fundamental matrix.
    """

    indices: tuple
    eps_nuclear: np.ndarray
    scores: np.ndarray
    spectral_lower_bound: np.ndarray
    trace_k: float

    @property
    def k(self) -> int:
        return len(self.indices)


def first_index_scores(lap: SpectralLaplacian) -> np.ndarray:
    """Score of each state as the sole first pick (larger is better).

    Equals the negated singleton nuclear error up to a common additive
    constant; the argmax therefore minimizes Tr[(L without state i)^-1].
    """
    return -np.diag(lap.pseudoinverse) / lap.stationary


def spectral_lower_bounds(lap: SpectralLaplacian, k: int) -> np.ndarray:
    """Tail sums of the descending fundamental-matrix spectrum, k = 1..k."""
    desc = lap.pseudoinverse_eigenvalues()
    tails = np.concatenate([np.cumsum(desc[::-1])[::-1], [0.0]])
    return np.array([tails[min(j + 1, lap.n)] for j in range(1, k + 1)])


def eps_nuclear_schur(lap: SpectralLaplacian, indices) -> float:
    """From-scratch nuclear error: trace of the complement-block inverse."""
    idx = check_index_set(indices, lap.n)
    comp = np.setdiff1d(np.arange(lap.n), np.asarray(idx))
    if comp.size == 0:
        return 0.0
    factor = sla.cho_factor(lap.matrix[np.ix_(comp, comp)], lower=True)
    return float(np.trace(sla.cho_solve(factor, np.eye(comp.size))))


def greedy_select(lap: SpectralLaplacian, k: int,
                  *, refactor_every=REFACTOR_EVERY) -> SelectionTrace:
    """Select k states greedily with exact nuclear scores.

    Ties break toward the lowest state index. The complement-block inverse
    is maintained by rank-one downdates and refactorized from scratch every
    ``refactor_every`` steps to limit drift.
    """
    n = lap.n
    if not 1 <= k < n:
        raise KTooLarge(f"selection size must satisfy 1 <= k < {n}, got {k}")
    firsts = first_index_scores(lap)
    pick = int(np.argmax(firsts))
    selected = [pick]
    scores = [float(firsts[pick])]
    eps_history = [float(lap.trace_pseudoinverse - firsts[pick])]

    comp = np.delete(np.arange(n), pick)
    M = np.linalg.inv(lap.matrix[np.ix_(comp, comp)])
    for step in range(1, k):
        if step % refactor_every == 0:
            M = np.linalg.inv(lap.matrix[np.ix_(comp, comp)])
        candidate_scores = np.einsum("ij,ij->j", M, M) / np.diag(M)
        local = int(np.argmax(candidate_scores))
        gain = float(candidate_scores[local])
        selected.append(int(comp[local]))
        scores.append(gain)
        eps_history.append(eps_history[-1] - gain)
        column = M[:, local].copy()
        M = np.delete(np.delete(M, local, axis=0), local, axis=1)
        reduced_col = np.delete(column, local)
        M -= np.outer(reduced_col, reduced_col) / column[local]
        comp = np.delete(comp, local)

    return SelectionTrace(
        indices=tuple(selected),
        eps_nuclear=np.array(eps_history),
        scores=np.array(scores),
        spectral_lower_bound=spectral_lower_bounds(lap, k),
        trace_k=lap.trace_pseudoinverse,
    )


def brute_force_optimal(lap: SpectralLaplacian, s: int,
                        *, n_max=16, s_max=4):
    """Exhaustive minimizer of the nuclear error over all s-subsets.

    Returns (best_subset, best_error). Capped at ``n_max`` states and
    subsets of size ``s_max``.
    """
    if lap.n > n_max or s > s_max:
        raise TooLargeForBruteForce(
            f"exhaustive search capped at n <= {n_max}, s <= {s_max}"
        )
    if not 1 <= s < lap.n:
        raise ValueError(f"need 1 <= s < {lap.n}")
    best, best_eps = None, np.inf
    for subset in itertools.combinations(range(lap.n), s):
        eps = eps_nuclear_schur(lap, subset)
        if eps < best_eps:
            best, best_eps = subset, eps
    return best, float(best_eps)


def greedy_optimality_margin(trace: SelectionTrace, s: int,
                             eps_optimal: float) -> np.ndarray:
    """Margins of the greedy-vs-optimal guarantee, one per step k >= s.

    Each entry is ``(eps(I_k) - eps(O_s)) / Tr[K] - 2 exp(-(k-1)/s)`` and
    must be nonpositive when scores are exact.
    """
    if not 1 <= s <= trace.k:
        raise ValueError(f"need 1 <= s <= {trace.k}")
    ks = np.arange(s, trace.k + 1)
    gap = (trace.eps_nuclear[ks - 1] - eps_optimal) / trace.trace_k
    return gap - 2.0 * np.exp(-(ks - 1) / s)


def spectral_tail_slack(trace: SelectionTrace, spectrum: np.ndarray,
                        k: int, s: int, r: int) -> float:
    """Slack of the spectrum-only guarantee on the greedy error at step k.

    ``spectrum`` holds the descending eigenvalues of the fundamental
    matrix. Requires r < s <= k; the slack is nonnegative when the
    guarantee holds.
    """
    if not (0 <= r < s <= k):
        raise InvalidRSK(f"need 0 <= r < s <= k, got r={r}, s={s}, k={k}")
    if k > trace.k:
        raise ValueError(f"trace only covers k <= {trace.k}")
    spectrum = np.asarray(spectrum, dtype=float)
    total = float(spectrum.sum())
    top_r = float(spectrum[:r].sum()) if r else 0.0
    bound = 2.0 * total * np.exp(-(k - 1) / s) + (s + 1) / (s - r) * (total - top_r)
    return float(bound - trace.eps_nuclear[k - 1])
