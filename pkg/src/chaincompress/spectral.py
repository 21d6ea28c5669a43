"""Symmetrized Laplacian, pseudoinverse, matrix exponential and norms.

The similarity transform ``L = -Diag(h) R Diag(h)^-1`` turns the rate matrix
of a reversible chain into a symmetric positive semidefinite operator whose
null vector is ``h``. Everything downstream (committors, compressions, error
bounds) is expressed through ``L``, its eigendecomposition and its
Moore-Penrose pseudoinverse ``K``.
"""

from dataclasses import dataclass

import numpy as np

from .chain import ReversibleChain
from .errors import (
    AsymmetryResidual,
    DisconnectedGraph,
    NegativeTime,
    NonFinite,
    NonPositiveGamma,
)

NULLSPACE_RTOL = 1e-10
SYMMETRY_RTOL = 1e-8
DENSE_LIMIT = 20_000


@dataclass(frozen=True)
class SpectralLaplacian:
    """Symmetric PSD Laplacian with its full spectral decomposition.

    Attributes
    ----------
    matrix : ndarray
        The symmetrized generator L.
    eigenvalues : ndarray
        Ascending; the first ``null_rank`` entries are treated as zero.
    eigenvectors : ndarray
        Orthonormal columns matching ``eigenvalues``.
    pseudoinverse : ndarray
        K = L^+, assembled from the nonzero eigenpairs.
    null_rank : int
        Number of eigenvalues treated as zero (1 for an irreducible chain).
    sqrt_stationary : ndarray
        The positive null vector h.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    pseudoinverse: np.ndarray
    null_rank: int
    sqrt_stationary: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def stationary(self) -> np.ndarray:
        return self.sqrt_stationary**2

    @property
    def trace_pseudoinverse(self) -> float:
        return float(self.pseudoinverse.trace())

    def pseudoinverse_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of K in descending order (includes the zeros)."""
        vals = np.zeros(self.n)
        nz = self.eigenvalues[self.null_rank:]  # ascending positive
        vals[: nz.size] = 1.0 / nz
        return vals


def _decompose(matrix: np.ndarray, h: np.ndarray | None, null_rtol: float) -> SpectralLaplacian:
    n = matrix.shape[0]
    if n > DENSE_LIMIT:
        raise ValueError(f"dense spectral path is limited to n <= {DENSE_LIMIT}")
    eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    scale = max(eigenvalues[-1], 1e-300)
    null_rank = int(np.sum(eigenvalues < null_rtol * scale))
    if null_rank != 1:
        raise DisconnectedGraph(
            f"expected exactly one zero eigenvalue, found {null_rank}"
        )
    if h is None:
        h = eigenvectors[:, 0].copy()
        h *= np.sign(h.sum())
    inv = np.zeros_like(eigenvalues)
    inv[null_rank:] = 1.0 / eigenvalues[null_rank:]
    pseudo = (eigenvectors * inv) @ eigenvectors.T
    pseudo = 0.5 * (pseudo + pseudo.T)
    return SpectralLaplacian(
        matrix=matrix,
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
        pseudoinverse=pseudo,
        null_rank=null_rank,
        sqrt_stationary=h,
    )


def symmetrize(chain: ReversibleChain, *, rtol=SYMMETRY_RTOL,
               null_rtol=NULLSPACE_RTOL) -> SpectralLaplacian:
    """Build the symmetrized Laplacian of a reversible chain.

    Raises
    ------
    AsymmetryResidual
        If ``-Diag(h) R Diag(h)^-1`` is asymmetric beyond ``rtol``, which
        signals broken detailed balance upstream.
    """
    h = chain.sqrt_stationary
    lap = -(chain.dense_rates() * h[:, None]) / h[None, :]
    residual = np.abs(lap - lap.T).max()
    scale = max(np.abs(lap).max(), 1e-300)
    if residual > rtol * scale:
        raise AsymmetryResidual(
            f"symmetrization residual {residual:.3e} exceeds {rtol:.1e} * {scale:.3e}"
        )
    lap = 0.5 * (lap + lap.T)
    return _decompose(lap, h, null_rtol)


def spectral_from_laplacian(matrix, null_vector=None, *,
                            null_rtol=NULLSPACE_RTOL) -> SpectralLaplacian:
    """Spectral machinery for an already-symmetric PSD Laplacian."""
    matrix = np.asarray(matrix, dtype=float)
    residual = np.abs(matrix - matrix.T).max()
    if residual > SYMMETRY_RTOL * max(np.abs(matrix).max(), 1e-300):
        raise AsymmetryResidual("input matrix is not symmetric")
    matrix = 0.5 * (matrix + matrix.T)
    return _decompose(matrix, null_vector, null_rtol)


def propagator(lap: SpectralLaplacian, t: float) -> np.ndarray:
    """Evaluate exp(-L t) through the eigendecomposition."""
    if t < 0:
        raise NegativeTime(f"time must be nonnegative, got {t}")
    decay = np.exp(-lap.eigenvalues * t)
    out = (lap.eigenvectors * decay) @ lap.eigenvectors.T
    return 0.5 * (out + out.T)


def unsymmetrize(matrix: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Undo the similarity transform: ``Diag(h)^-1 M Diag(h)``.

    Applied to exp(-L t) this recovers the row-stochastic transition matrix
    exp(R t).
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape[0] != h.shape[0]:
        raise ValueError("shape mismatch between matrix and h")
    return matrix * (h[None, :] / h[:, None])


@dataclass(frozen=True)
class KilledOperators:
    """Shifted Laplacian of the chain killed at rate gamma > 0."""

    gamma: float
    base: SpectralLaplacian
    matrix: np.ndarray    # L + gamma I
    inverse: np.ndarray   # (L + gamma I)^-1

    def propagator(self, t: float) -> np.ndarray:
        """exp(-(L + gamma I) t) = exp(-gamma t) exp(-L t)."""
        return np.exp(-self.gamma * t) * propagator(self.base, t)


def killed(lap: SpectralLaplacian, gamma: float) -> KilledOperators:
    if gamma <= 0:
        raise NonPositiveGamma(f"killing rate must be positive, got {gamma}")
    shifted = lap.matrix + gamma * np.eye(lap.n)
    inv = (lap.eigenvectors / (lap.eigenvalues + gamma)) @ lap.eigenvectors.T
    return KilledOperators(gamma=gamma, base=lap, matrix=shifted,
                           inverse=0.5 * (inv + inv.T))


@dataclass(frozen=True)
class MatrixNorms:
    spectral: float
    nuclear: float


def matrix_norms(matrix) -> MatrixNorms:
    """Spectral (largest singular value) and nuclear (sum of singular values).

    Symmetric inputs go through eigenvalue magnitudes, everything else
    through the SVD.
    """
    matrix = np.asarray(matrix, dtype=float)
    if not np.all(np.isfinite(matrix)):
        raise NonFinite("matrix norms require finite entries")
    scale = np.abs(matrix).max() if matrix.size else 0.0
    if matrix.shape[0] == matrix.shape[1] and (
        scale == 0.0 or np.abs(matrix - matrix.T).max() <= 1e-12 * scale
    ):
        sv = np.abs(np.linalg.eigvalsh(matrix))
    else:
        sv = np.linalg.svd(matrix, compute_uv=False)
    return MatrixNorms(spectral=float(sv.max(initial=0.0)), nuclear=float(sv.sum()))


def time_grid(lap: SpectralLaplacian, points=64, lo=1e-2, hi=1e3) -> np.ndarray:
    """Log-spaced evaluation times anchored at the mean relaxation scale.

    The anchor is Tr[K] / n; the default window spans five decades around it.
    """
    anchor = lap.trace_pseudoinverse / lap.n
    return np.geomspace(lo * anchor, hi * anchor, points)
