"""Input validation helpers shared by the functional API and estimators."""

import numpy as np
import scipy.sparse as sp


def check_index_set(indices, n) -> tuple:
    """Normalize a selection to a sorted tuple of distinct valid indices."""
    if np.isscalar(indices):
        indices = [indices]
    idx = sorted(int(i) for i in indices)
    if not idx:
        raise ValueError("index set must be nonempty")
    if len(set(idx)) != len(idx):
        raise ValueError("index set contains duplicates")
    if idx[0] < 0 or idx[-1] >= n:
        raise ValueError(f"indices must lie in [0, {n}), got {idx}")
    return tuple(idx)


def check_square(matrix) -> np.ndarray:
    mat = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {mat.shape}")
    return mat


def looks_like_rate_matrix(matrix, rtol=1e-8) -> bool:
    """Rows sum to ~zero and off-diagonal entries are nonnegative."""
    mat = check_square(matrix)
    off = mat - np.diag(np.diag(mat))
    if off.min() < 0:
        return False
    scale = max(np.abs(mat).max(), 1e-300)
    return bool(np.abs(mat.sum(axis=1)).max() <= rtol * scale * mat.shape[0])


def as_chain(X):
    """Coerce estimator input to a ReversibleChain.

    Accepts a ReversibleChain, or a square rate matrix (dense or sparse)
    whose rows sum to zero. Adjacency matrices should be turned into chains
    explicitly with ``webgraph_chain`` first.
    """
    from .chain import ReversibleChain, build_chain

    if isinstance(X, ReversibleChain):
        return X
    mat = check_square(X)
    if not looks_like_rate_matrix(mat):
        raise ValueError(
            "input is not a rate matrix (rows must sum to zero with "
            "nonnegative off-diagonal entries); build a chain explicitly "
            "with build_chain or webgraph_chain"
        )
    return build_chain(mat)
