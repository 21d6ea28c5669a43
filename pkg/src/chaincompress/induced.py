"""The induced chain on a selected state subset.

Two equivalent constructions: contraction of the stationary flow through
the committor, and closed forms in the principal block of the fundamental
matrix. The induced chain is itself reversible, keeps the stationary
weights of the committor, and preserves mean first passage times among the
selected states exactly.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .chain import ReversibleChain
from .committor import CommittorBundle, committor_absorbing_solve, hitting_times
from .errors import SingularPrincipalBlock
from .spectral import SpectralLaplacian, propagator, unsymmetrize
from .validation import check_index_set


@dataclass(frozen=True)
class InducedChain:
    """Reversible chain induced on the selected states.

    Attributes
    ----------
    indices : tuple of int
    rates : ndarray, shape (m, m)
        Induced rate matrix; rows sum to zero, off-diagonal >= 0.
    stationary, sqrt_stationary : ndarray
    laplacian : ndarray
        Symmetrized generator of the induced chain.
    pseudoinverse : ndarray
        Moore-Penrose pseudoinverse of ``laplacian``.
    laplacian_eigenvalues, laplacian_eigenvectors : ndarray
        Full spectral decomposition of ``laplacian`` (ascending).
    marking_time : float
    """

    indices: tuple
    rates: np.ndarray
    stationary: np.ndarray
    sqrt_stationary: np.ndarray
    laplacian: np.ndarray
    pseudoinverse: np.ndarray
    laplacian_eigenvalues: np.ndarray
    laplacian_eigenvectors: np.ndarray
    marking_time: float

    @property
    def n_selected(self) -> int:
        return len(self.indices)

    def propagator(self, t: float) -> np.ndarray:
        """exp(-L_hat t) on the reduced space."""
        decay = np.exp(-self.laplacian_eigenvalues * t)
        out = (self.laplacian_eigenvectors * decay) @ self.laplacian_eigenvectors.T
        return 0.5 * (out + out.T)

    def transition_matrix(self, t: float) -> np.ndarray:
        """Row-stochastic exp(R_hat t)."""
        return unsymmetrize(self.propagator(t), self.sqrt_stationary)


def _assemble(indices, pi_hat, laplacian, omega) -> InducedChain:
    h_hat = np.sqrt(pi_hat)
    laplacian = 0.5 * (laplacian + laplacian.T)
    rates = -laplacian * (h_hat[None, :] / h_hat[:, None])
    vals, vecs = np.linalg.eigh(laplacian)
    inv = np.zeros_like(vals)
    if len(vals) > 1:
        inv[1:] = 1.0 / vals[1:]
    pseudo = (vecs * inv) @ vecs.T
    return InducedChain(
        indices=indices,
        rates=rates,
        stationary=pi_hat,
        sqrt_stationary=h_hat,
        laplacian=laplacian,
        pseudoinverse=0.5 * (pseudo + pseudo.T),
        laplacian_eigenvalues=vals,
        laplacian_eigenvectors=vecs,
        marking_time=omega,
    )


def induced_chain(chain: ReversibleChain, bundle: CommittorBundle) -> InducedChain:
    """Induced chain as the committor contraction of the stationary flow.

    ``flow_hat = C~^T (-Diag(pi) R) C~`` is symmetric PSD with zero row
    sums; dividing out the reduced stationary weights yields the rate
    matrix and the symmetrized generator.
    """
    flow = -(chain.dense_rates() * chain.stationary[:, None])
    tilde = bundle.probabilities
    flow_hat = tilde.T @ flow @ tilde
    flow_hat = 0.5 * (flow_hat + flow_hat.T)
    h_hat = bundle.sqrt_stationary
    laplacian = flow_hat / np.outer(h_hat, h_hat)
    return _assemble(bundle.indices, bundle.stationary, laplacian, bundle.marking_time)


def induced_from_k(lap: SpectralLaplacian, indices) -> InducedChain:
    """Induced chain from closed forms in the principal block K[I, I]."""
    idx = check_index_set(indices, lap.n)
    if len(idx) == lap.n:
        pi = lap.stationary
        return _assemble(idx, pi.copy(), lap.matrix.copy(), 0.0)
    sel = np.asarray(idx)
    K = lap.pseudoinverse
    block = K[np.ix_(sel, sel)]
    try:
        factor = sla.cho_factor(block, lower=True)
    except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
        raise SingularPrincipalBlock(str(exc)) from None
    h_sel = lap.sqrt_stationary[sel]
    y = sla.cho_solve(factor, h_sel)
    omega = 1.0 / float(h_sel @ y)
    pi_hat = omega * h_sel * y
    h_hat = np.sqrt(pi_hat)
    block_inv = sla.cho_solve(factor, np.eye(len(idx)))
    ratio = h_sel / h_hat
    laplacian = block_inv * np.outer(ratio, ratio) - np.outer(h_hat, h_hat) / omega
    return _assemble(idx, pi_hat, laplacian, omega)


@dataclass(frozen=True)
class InterpretationReport:
    """Residuals of the probabilistic characterizations of the induced rates.

    ``holding`` compares -1/R_hat_ii with the expected time to reach the
    rest of the selection from i; ``jump`` compares -R_hat_ij / R_hat_ii
    with the corresponding stopping probabilities; ``stationary`` compares
    the induced stationary law with the committor average.
    """

    holding_residual: float
    jump_residual: float
    stationary_residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        worst = max(self.holding_residual, self.jump_residual, self.stationary_residual)
        return worst <= self.tolerance


def interpretation_checks(chain: ReversibleChain, ic: InducedChain,
                          *, tolerance=1e-8) -> InterpretationReport:
    """Verify the induced rates against absorbing-solve oracles."""
    idx = ic.indices
    if len(idx) < 2:
        raise ValueError("interpretation checks need at least two selected states")
    dense = chain.dense_rates()
    n = chain.n
    holding = 0.0
    jump = 0.0
    for pos, i in enumerate(idx):
        others = [j for j in idx if j != i]
        keep = np.setdiff1d(np.arange(n), np.asarray(others))
        block = dense[np.ix_(keep, keep)]
        i_local = int(np.searchsorted(keep, i))
        expected_time = sla.solve(block, -np.ones(keep.size))[i_local]
        holding = max(holding, abs(-1.0 / ic.rates[pos, pos] - expected_time)
                      / max(abs(expected_time), 1e-300))
        absorb = sla.solve(block, -dense[np.ix_(keep, np.asarray(others))])
        probs = absorb[i_local]
        for q, j in enumerate(others):
            pos_j = idx.index(j)
            model = -ic.rates[pos, pos_j] / ic.rates[pos, pos]
            jump = max(jump, abs(model - probs[q]))
    tilde = committor_absorbing_solve(chain, idx)
    stationary = float(np.abs(tilde.T @ chain.stationary - ic.stationary).max())
    return InterpretationReport(
        holding_residual=holding,
        jump_residual=jump,
        stationary_residual=stationary,
        tolerance=tolerance,
    )


def hitting_preservation(lap: SpectralLaplacian, ic: InducedChain) -> float:
    """Max deviation between induced and original passage times on I x I."""
    if ic.n_selected < 2:
        raise ValueError("need at least two selected states")
    sel = np.asarray(ic.indices)
    full = hitting_times(lap).matrix[np.ix_(sel, sel)]
    scaled = ic.pseudoinverse / np.outer(ic.sqrt_stationary, ic.sqrt_stationary)
    reduced = np.diag(scaled)[None, :] - scaled
    return float(np.abs(reduced - full).max())


def flow_limit_check(chain: ReversibleChain, lap: SpectralLaplacian,
                     bundle: CommittorBundle, ic: InducedChain,
                     t_small: float) -> float:
    """Residual of the finite-time stationary-flow estimate of the induced flow.

    Evaluates ``C~^T Diag(pi) (I - exp(R t)) C~ / t`` exactly and returns
    its max-norm distance from the induced flow; first-order in ``t_small``.
    """
    if t_small <= 0:
        raise ValueError("t_small must be positive")
    trans = unsymmetrize(propagator(lap, t_small), lap.sqrt_stationary)
    tilde = bundle.probabilities
    finite = tilde.T @ ((chain.stationary[:, None] * (np.eye(chain.n) - trans)) @ tilde)
    finite = 0.5 * (finite + finite.T) / t_small
    flow_hat = -ic.rates * ic.stationary[:, None]
    return float(np.abs(finite - flow_hat).max())
