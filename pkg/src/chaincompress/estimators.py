"""Scikit-learn style estimators wrapping the functional toolkit.

The selector behaves like an unsupervised feature selector (the chosen
states index columns of the fundamental matrix); the compressors fit a
chain and then evaluate reduced or lifted dynamics at requested times.
All three follow the fit / attributes-with-trailing-underscore /
get_params conventions so they compose with sklearn tooling.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .committor import committor_closed_form
from .compress import (
    OBLIQUE_BOUND_CONSTANT,
    PROJECTIVE_BOUND_CONSTANT,
    nystrom_errors,
    obliqueness,
    orthonormal_committor_basis,
    projective_compression,
    structure_preserving,
)
from .induced import induced_chain
from .select import greedy_select
from .spectral import symmetrize
from .validation import as_chain, check_index_set


class GreedyStateSelector(BaseEstimator, TransformerMixin):
    """Select states of a reversible chain by greedy nuclear maximization.

    Parameters
    ----------
    n_select : int
        Number of states to pick.

    Attributes
    ----------
    indices_ : ndarray of int
        Chosen states in selection order.
    trace_ : SelectionTrace
        Full greedy history (errors, scores, lower bounds).
    eps_nuclear_ : float
        Nuclear low-rank error of the final selection.
    """

    def __init__(self, n_select=5):
        self.n_select = n_select

    def fit(self, X, y=None):
        chain = as_chain(X)
        self.chain_ = chain
        self.laplacian_ = symmetrize(chain)
        self.trace_ = greedy_select(self.laplacian_, self.n_select)
        self.indices_ = np.array(self.trace_.indices)
        self.eps_nuclear_ = float(self.trace_.eps_nuclear[-1])
        return self

    def transform(self, X):
        """Select the chosen columns of an (n_rows, n_states) array."""
        check_is_fitted(self, "indices_")
        X = np.asarray(X)
        return X[:, self.indices_]

    def get_support(self, indices=False):
        check_is_fitted(self, "indices_")
        if indices:
            return np.sort(self.indices_)
        mask = np.zeros(self.chain_.n, dtype=bool)
        mask[self.indices_] = True
        return mask


class _CompressorBase(BaseEstimator):
    """Shared fitting: resolve the selection, build committor machinery."""

    def __init__(self, n_select=5, indices=None):
        self.n_select = n_select
        self.indices = indices

    def _fit_common(self, X):
        chain = as_chain(X)
        self.chain_ = chain
        self.laplacian_ = symmetrize(chain)
        if self.indices is not None:
            self.indices_ = np.array(check_index_set(self.indices, chain.n))
        else:
            trace = greedy_select(self.laplacian_, self.n_select)
            self.indices_ = np.array(sorted(trace.indices))
        self.bundle_ = committor_closed_form(self.laplacian_, self.indices_)
        errors = nystrom_errors(self.laplacian_, self.indices_)
        self.eps_spectral_ = errors.spectral
        self.eps_nuclear_ = errors.nuclear
        return self


class ProjectiveCompressor(_CompressorBase):
    """Compress the dynamics onto an orthonormal committor basis.

    The compression is the more accurate of the two schemes but is not
    entrywise nonnegative. ``error_bound`` gives the proved 1/t guarantee
    against the exact propagator.

    Attributes
    ----------
    indices_ : ndarray of int
    basis_ : ndarray, shape (n, k)
        Orthonormal committor basis.
    reduced_generator_ : ndarray, shape (k, k)
        Projection of the symmetrized generator onto the basis.
    eps_spectral_, eps_nuclear_ : float
        Low-rank errors controlling the bound.
    """

    def fit(self, X, y=None):
        self._fit_common(X)
        self.basis_ = orthonormal_committor_basis(self.bundle_)
        reduced = self.basis_.T @ self.laplacian_.matrix @ self.basis_
        self.reduced_generator_ = 0.5 * (reduced + reduced.T)
        return self

    def propagator(self, t):
        """Compressed symmetrized propagator at time t (n x n)."""
        check_is_fitted(self, "basis_")
        return projective_compression(self.laplacian_, self.bundle_, t)

    def error_bound(self, t, norm="spectral"):
        check_is_fitted(self, "basis_")
        eps = self.eps_spectral_ if norm == "spectral" else self.eps_nuclear_
        return PROJECTIVE_BOUND_CONSTANT * eps / t


class StructurePreservingCompressor(_CompressorBase):
    """Compress to the induced chain on the selection and lift back.

    The reduced model is a genuine reversible chain: ``reduced_rates_``
    rows sum to zero and ``transition_matrix`` is row stochastic and
    entrywise nonnegative for every t.

    Attributes
    ----------
    indices_ : ndarray of int
    reduced_rates_ : ndarray, shape (k, k)
        Rate matrix of the induced chain.
    reduced_stationary_ : ndarray
    psi_spectral_, psi_nuclear_ : float
        Obliqueness norms entering the a-posteriori bounds.
    """

    def fit(self, X, y=None):
        self._fit_common(X)
        self.induced_ = induced_chain(self.chain_, self.bundle_)
        self.reduced_rates_ = self.induced_.rates
        self.reduced_stationary_ = self.induced_.stationary
        psi = obliqueness(self.laplacian_, self.indices_)
        self.psi_spectral_ = psi.spectral
        self.psi_nuclear_ = psi.nuclear
        return self

    def propagator(self, t):
        """Lifted symmetrized propagator at time t (n x n)."""
        check_is_fitted(self, "induced_")
        return structure_preserving(self.bundle_, self.induced_, t).symmetric

    def transition_matrix(self, t):
        """Lifted row-stochastic transition matrix at time t (n x n)."""
        check_is_fitted(self, "induced_")
        return structure_preserving(self.bundle_, self.induced_, t).stochastic

    def reduced_transition_matrix(self, t):
        """Transition matrix of the induced chain itself (k x k)."""
        check_is_fitted(self, "induced_")
        return self.induced_.transition_matrix(t)

    def error_bound(self, t, norm="spectral"):
        """Composite a-posteriori bound against the exact propagator."""
        check_is_fitted(self, "induced_")
        if norm == "spectral":
            return (PROJECTIVE_BOUND_CONSTANT * self.eps_spectral_
                    + OBLIQUE_BOUND_CONSTANT * self.psi_spectral_) / t
        return (PROJECTIVE_BOUND_CONSTANT * self.eps_nuclear_
                + OBLIQUE_BOUND_CONSTANT * self.psi_nuclear_) / t
