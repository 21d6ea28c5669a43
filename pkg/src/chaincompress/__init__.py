"""Compression of reversible continuous-time Markov chains onto state subsets.

Workflow: build a ReversibleChain, symmetrize it into a SpectralLaplacian,
pick states (greedy nuclear maximization or your own), then compress the
dynamics projectively or structure-preservingly. Every approximation comes
with proved 1/t error bounds that the verification suites check explicitly.
"""

from . import _threads  # noqa: F401  (thread override before numpy's BLAS binds)

__version__ = "0.1.0"

from .chain import (
    ReversibleChain,
    build_chain,
    random_reversible_chain,
    synthetic_webgraph,
    webgraph_chain,
)
from .committor import (
    CommittorBundle,
    HittingTimes,
    committor_absorbing_solve,
    committor_closed_form,
    hitting_times,
    killed_committor,
    mean_marking_time,
)
from .compress import (
    BoundReport,
    NystromErrors,
    Obliqueness,
    autocorrelation,
    error_curves,
    generalized_projective,
    integrated_occupation_check,
    nystrom_errors,
    obliqueness,
    obliqueness_from_hitting,
    projective_compression,
    structure_preserving,
)
from .errors import ChainCompressError
from .estimators import (
    GreedyStateSelector,
    ProjectiveCompressor,
    StructurePreservingCompressor,
)
from .induced import (
    InducedChain,
    flow_limit_check,
    hitting_preservation,
    induced_chain,
    induced_from_k,
    interpretation_checks,
)
from .marked import (
    MarkedChain,
    MarkedProjections,
    alpha_limit_check,
    build_marked,
    identity_suite,
    marked_spectrum,
    projections,
)
from .select import (
    SelectionTrace,
    brute_force_optimal,
    eps_nuclear_schur,
    first_index_scores,
    greedy_optimality_margin,
    greedy_select,
    spectral_tail_slack,
)
from .simulate import (
    Estimator,
    Trajectory,
    estimate_committor,
    estimate_cycle_counts,
    estimate_hitting_time,
    estimate_reduced_dynamics,
    sample_path,
)
from .spectral import (
    KilledOperators,
    MatrixNorms,
    SpectralLaplacian,
    killed,
    matrix_norms,
    propagator,
    spectral_from_laplacian,
    symmetrize,
    time_grid,
    unsymmetrize,
)

__all__ = [name for name in dir() if not name.startswith("_")]
