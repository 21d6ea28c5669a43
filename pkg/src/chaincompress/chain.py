"""Reversible continuous-time Markov chains: construction and validation.

A chain is held as a rate matrix ``R`` (rows sum to zero, off-diagonal
nonnegative), its stationary distribution ``pi`` and the entrywise square
root ``h = pi ** 0.5`` used throughout for symmetrization.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import (
    AsymmetricAdjacency,
    DetailedBalanceViolated,
    DisconnectedGraph,
    NonPositiveStationary,
)

DETAILED_BALANCE_RTOL = 1e-8
STATIONARY_SUM_RTOL = 1e-10


@dataclass(frozen=True)
class ReversibleChain:
    """An irreducible reversible CTMC.

    Attributes
    ----------
    rates : scipy.sparse.csr_array
        Rate matrix, rows summing to zero, off-diagonal entries >= 0.
    stationary : ndarray
        Stationary distribution pi, entrywise positive, summing to one.
    sqrt_stationary : ndarray
        h = pi ** 0.5.
    """

    rates: sp.csr_array
    stationary: np.ndarray
    sqrt_stationary: np.ndarray

    @property
    def n(self) -> int:
        return self.rates.shape[0]

    def dense_rates(self) -> np.ndarray:
        return self.rates.toarray()


def _as_offdiagonal_csr(rates) -> sp.csr_array:
    if sp.issparse(rates):
        mat = sp.csr_array(rates, dtype=float)
    else:
        mat = sp.csr_array(np.asarray(rates, dtype=float))
    if mat.shape[0] != mat.shape[1]:
        raise ValueError(f"rate matrix must be square, got {mat.shape}")
    mat = sp.csr_array(mat - sp.diags_array(mat.diagonal()))
    mat.eliminate_zeros()
    if mat.nnz and mat.data.min() < 0:
        raise ValueError("off-diagonal rates must be nonnegative")
    return mat


def _check_connected(pattern: sp.csr_array):
    n_comp, _ = connected_components(pattern, directed=False)
    if n_comp != 1:
        raise DisconnectedGraph(f"adjacency graph has {n_comp} components")


def _solve_stationary(rates: sp.csr_array) -> np.ndarray:
    # Null space of R^T via SVD of the dense matrix; dense is fine at the
    # scales where a stationary solve is needed at all.
    _, _, vt = np.linalg.svd(rates.toarray().T)
    pi = vt[-1]
    pi = pi * np.sign(pi.sum())
    if pi.min() <= 0:
        raise NonPositiveStationary("computed stationary vector is not positive")
    return pi / pi.sum()


def _check_detailed_balance(rates: sp.csr_array, pi: np.ndarray, rtol: float):
    flow = sp.diags_array(pi) @ rates
    residual = abs(flow - flow.T).max()
    scale = abs(flow).max()
    if residual > rtol * max(scale, 1e-300):
        raise DetailedBalanceViolated(
            f"detailed-balance residual {residual:.3e} exceeds {rtol:.1e} * {scale:.3e}"
        )


def _finalize(offdiag: sp.csr_array, pi: np.ndarray, rtol: float) -> ReversibleChain:
    n = offdiag.shape[0]
    exit_rates = np.asarray(offdiag.sum(axis=1)).ravel()
    if np.any(exit_rates <= 0):
        raise DisconnectedGraph("a state has no outgoing rate")
    rates = sp.csr_array(offdiag - sp.diags_array(exit_rates))
    _check_detailed_balance(rates, pi, rtol)
    return ReversibleChain(rates=rates, stationary=pi, sqrt_stationary=np.sqrt(pi))


def build_chain(rates, stationary=None, *, rtol=DETAILED_BALANCE_RTOL) -> ReversibleChain:
    """Assemble a reversible chain from off-diagonal rates.

    Parameters
    ----------
    rates : array or sparse matrix
        Off-diagonal transition rates; any diagonal entries are discarded and
        recomputed so rows sum to zero.
    stationary : ndarray, optional
        Stationary distribution. Solved from the null space of R^T when
        absent; validated either way.
    rtol : float
        Relative tolerance for the detailed-balance residual.
    """
    offdiag = _as_offdiagonal_csr(rates)
    if offdiag.shape[0] < 2:
        raise ValueError("a chain needs at least two states")
    _check_connected(offdiag)
    exit_rates = np.asarray(offdiag.sum(axis=1)).ravel()
    if np.any(exit_rates <= 0):
        raise DisconnectedGraph("a state has no outgoing rate")
    full = sp.csr_array(offdiag - sp.diags_array(exit_rates))
    if stationary is None:
        pi = _solve_stationary(full)
    else:
        pi = np.asarray(stationary, dtype=float)
        if pi.shape != (offdiag.shape[0],):
            raise ValueError("stationary vector has wrong shape")
        if pi.min() <= 0:
            raise NonPositiveStationary("stationary entries must be positive")
        if abs(pi.sum() - 1.0) > STATIONARY_SUM_RTOL * offdiag.shape[0]:
            raise NonPositiveStationary("stationary vector must sum to one")
    return _finalize(offdiag, pi, rtol)


def webgraph_chain(adjacency) -> ReversibleChain:
    """Degree-weighted random-walk chain of an undirected graph.

    The stationary distribution is proportional to the vertex degrees and
    the rate matrix is ``Diag(d)^-1 (A - Diag(d))`` with ``d = A 1``.
    """
    if sp.issparse(adjacency):
        adj = sp.csr_array(adjacency, dtype=float)
    else:
        adj = sp.csr_array(np.asarray(adjacency, dtype=float))
    if adj.shape[0] != adj.shape[1]:
        raise ValueError(f"adjacency must be square, got {adj.shape}")
    if abs(adj - adj.T).max() > 0:
        raise AsymmetricAdjacency("adjacency matrix is not symmetric")
    if abs(adj.diagonal()).max() > 0:
        raise AsymmetricAdjacency("adjacency matrix must have a zero diagonal")
    degrees = np.asarray(adj.sum(axis=1)).ravel()
    if np.any(degrees <= 0):
        raise DisconnectedGraph("isolated vertex in adjacency matrix")
    _check_connected(adj)
    pi = degrees / degrees.sum()
    offdiag = sp.diags_array(1.0 / degrees) @ adj
    return _finalize(sp.csr_array(offdiag), pi, DETAILED_BALANCE_RTOL)


def random_reversible_chain(n, seed=0, extra_edges=2.0, rate_scale=1.0) -> ReversibleChain:
    """Random connected reversible chain, reproducible from ``seed``.

    Built from a random spanning tree plus ``extra_edges * n`` additional
    edges carrying symmetric flows S, a random positive stationary pi, and
    rates R_ij = S_ij / pi_i, which satisfies detailed balance exactly.
    """
    rng = np.random.default_rng(seed)
    pi = rng.uniform(0.2, 1.0, size=n)
    pi /= pi.sum()
    flow = np.zeros((n, n))
    order = rng.permutation(n)
    for pos in range(1, n):
        a, b = order[pos], order[rng.integers(0, pos)]
        flow[a, b] = flow[b, a] = rng.uniform(0.5, 1.5)
    n_extra = int(extra_edges * n)
    for _ in range(n_extra):
        a, b = rng.integers(0, n, size=2)
        if a != b:
            w = rng.uniform(0.5, 1.5)
            flow[a, b] += w
            flow[b, a] += w
    rates = rate_scale * flow / pi[:, None]
    return build_chain(rates, pi)


def synthetic_webgraph(n, attach=3, seed=0) -> sp.csr_array:
    """Preferential-attachment adjacency matrix (0/1, symmetric, connected).

    New vertices attach to ``attach`` existing vertices drawn proportionally
    to degree, which mimics the heavy-tailed degree structure of webgraphs.
    """
    if n <= attach + 1:
        raise ValueError("need n > attach + 1")
    rng = np.random.default_rng(seed)
    rows, cols = [], []
    ends = []  # repeated-node trick: uniform sampling from ends is degree-biased

    def add_edge(a, b):
        rows.extend((a, b))
        cols.extend((b, a))
        ends.extend((a, b))

    for v in range(1, attach + 1):  # connected clique seed
        for u in range(v):
            add_edge(v, u)
    for v in range(attach + 1, n):
        targets = set()
        while len(targets) < attach:
            targets.add(int(ends[rng.integers(0, len(ends))]))
        for t in targets:
            add_edge(v, t)
    adj = sp.csr_array(sp.coo_array((np.ones(len(rows)), (rows, cols)), shape=(n, n)))
    adj.data[:] = 1.0  # collapse duplicates to simple edges
    return adj
