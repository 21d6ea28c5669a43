"""Projective and structure-preserving compressed dynamics and their bounds.

Both compressions replace exp(-L t) by a rank-|I| surrogate built from the
committor of the selected states. The projective variant projects onto an
orthonormalized committor basis and is the more accurate of the two; the
structure-preserving variant propagates the induced chain and lifts it back,
staying entrywise nonnegative and row stochastic after unsymmetrizing.

Every approximation error is controlled by two scalars per selection: the
low-rank approximation error of the fundamental matrix (spectral and nuclear
flavors) and an obliqueness term weighting the non-orthogonality of the
committor along slow modes. The bound constants are 3*sqrt(3)/(2*pi) for
projective compression and 2/pi for the obliqueness gap.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from .committor import CommittorBundle, committor_closed_form, hitting_times, killed_committor
from .errors import BoundViolation, NullSpaceNotSpanned, SingularPrincipalBlock
from .induced import InducedChain
from .spectral import SpectralLaplacian, killed, matrix_norms, unsymmetrize
from .validation import check_index_set

PROJECTIVE_BOUND_CONSTANT = 3.0 * math.sqrt(3.0) / (2.0 * math.pi)
OBLIQUE_BOUND_CONSTANT = 2.0 / math.pi
BOUND_SLACK = 1e-8


def _sym_inv_sqrt(gram: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(gram)
    if vals.min() <= 0:
        raise SingularPrincipalBlock("basis Gram matrix is not positive definite")
    return (vecs / np.sqrt(vals)) @ vecs.T


def orthonormal_committor_basis(bundle: CommittorBundle, method="symmetric") -> np.ndarray:
    """Orthonormal basis for the committor range.

    ``symmetric`` uses C (C^T C)^(-1/2); ``qr`` uses a QR factorization.
    The projective compression is invariant to this choice.
    """
    C = bundle.symmetrized
    if method == "symmetric":
        return C @ _sym_inv_sqrt(C.T @ C)
    if method == "qr":
        q, _ = np.linalg.qr(C)
        return q
    raise ValueError(f"unknown orthogonalization {method!r}")


def projective_compression(lap: SpectralLaplacian, bundle: CommittorBundle,
                           t: float, *, method="symmetric") -> np.ndarray:
    """Projected dynamics V exp(-(V^T L V) t) V^T with V = orth(C)."""
    V = orthonormal_committor_basis(bundle, method)
    reduced = V.T @ lap.matrix @ V
    vals, vecs = np.linalg.eigh(0.5 * (reduced + reduced.T))
    core = (vecs * np.exp(-np.clip(vals, 0.0, None) * t)) @ vecs.T
    out = V @ core @ V.T
    return 0.5 * (out + out.T)


def generalized_projective(lap: SpectralLaplacian, basis, t: float,
                           *, ortho_tol=1e-10):
    """Compression onto an arbitrary orthonormal basis containing h.

    Returns the compressed propagator and the pair (spectral, nuclear) of
    residual norms ``|K - V (V^T L V)^+ V^T|`` that control the
    approximation error via the same 1/t bound as the committor basis.
    """
    V = np.asarray(basis, dtype=float)
    if np.abs(V.T @ V - np.eye(V.shape[1])).max() > ortho_tol:
        raise ValueError("basis columns are not orthonormal")
    h = lap.sqrt_stationary
    if np.linalg.norm(h - V @ (V.T @ h)) > ortho_tol:
        raise NullSpaceNotSpanned("basis must contain the stationary mode in its span")
    reduced = V.T @ lap.matrix @ V
    vals, vecs = np.linalg.eigh(0.5 * (reduced + reduced.T))
    vals = np.clip(vals, 0.0, None)
    core = (vecs * np.exp(-vals * t)) @ vecs.T
    compressed = V @ core @ V.T
    # pseudoinverse of the reduced generator; its null space is V^T h
    inv = np.zeros_like(vals)
    positive = vals > 1e-10 * max(vals[-1], 1e-300)
    inv[positive] = 1.0 / vals[positive]
    residual = lap.pseudoinverse - V @ ((vecs * inv) @ vecs.T) @ V.T
    norms = matrix_norms(residual)
    return 0.5 * (compressed + compressed.T), norms.spectral, norms.nuclear


@dataclass(frozen=True)
class StructurePreservingPair:
    """Symmetrized and row-stochastic forms of the lifted induced dynamics."""

    symmetric: np.ndarray
    stochastic: np.ndarray


def structure_preserving(bundle: CommittorBundle, ic: InducedChain,
                         t: float) -> StructurePreservingPair:
    """Lift exp(-L_hat t) through the committor: C exp(-L_hat t) C^T."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    C = bundle.symmetrized
    sym = C @ ic.propagator(t) @ C.T
    sym = 0.5 * (sym + sym.T)
    return StructurePreservingPair(
        symmetric=sym,
        stochastic=unsymmetrize(sym, bundle.sqrt_stationary_full),
    )


@dataclass(frozen=True)
class NystromErrors:
    """Low-rank approximation errors of the fundamental matrix.

    ``spectral`` and ``nuclear`` are the limiting errors of the shifted
    Nystrom approximation as the killing rate vanishes; ``nuclear_schur``
    is the independent complement-block expression Tr[(L[comp,comp])^-1].
    """

    spectral: float
    nuclear: float
    nuclear_schur: float


def _principal(lap: SpectralLaplacian, sel: np.ndarray):
    K = lap.pseudoinverse
    block = K[np.ix_(sel, sel)]
    try:
        factor = sla.cho_factor(block, lower=True)
    except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
        raise SingularPrincipalBlock(str(exc)) from None
    h_sel = lap.sqrt_stationary[sel]
    y = sla.cho_solve(factor, h_sel)
    omega = 1.0 / float(h_sel @ y)
    return K, block, factor, h_sel, y, omega


def nystrom_errors(lap: SpectralLaplacian, indices) -> NystromErrors:
    """Both closed forms of the limiting low-rank errors for a selection."""
    idx = check_index_set(indices, lap.n)
    if len(idx) == lap.n:
        return NystromErrors(0.0, 0.0, 0.0)
    sel = np.asarray(idx)
    K, block, factor, h_sel, y, omega = _principal(lap, sel)
    cross = sla.cho_solve(factor, K[sel, :]).T          # K[:,I] K[I,I]^-1
    escape = lap.sqrt_stationary - cross @ h_sel
    residual = K - cross @ K[sel, :] + omega * np.outer(escape, escape)
    spectral = float(np.abs(np.linalg.eigvalsh(0.5 * (residual + residual.T))).max())
    k2_block = K[:, sel].T @ K[:, sel]                  # (K^2)[I,I]
    nuclear = (
        float(np.trace(K)) - float(np.trace(sla.cho_solve(factor, k2_block)))
        + omega * (1.0 + float(y @ k2_block @ y))
    )
    comp = np.setdiff1d(np.arange(lap.n), sel)
    comp_block = lap.matrix[np.ix_(comp, comp)]
    comp_factor = sla.cho_factor(comp_block, lower=True)
    nuclear_schur = float(np.trace(sla.cho_solve(comp_factor, np.eye(comp.size))))
    return NystromErrors(spectral=spectral, nuclear=nuclear,
                         nuclear_schur=nuclear_schur)


@dataclass(frozen=True)
class Obliqueness:
    """Non-orthogonality of the committor weighted along slow reduced modes.

    ``nuclear`` is the trace and ``spectral`` the spectral radius of the
    limiting obliqueness matrix. The nuclear value never exceeds
    |I| times the nuclear low-rank error.
    """

    spectral: float
    nuclear: float
    matrix: np.ndarray


def obliqueness(lap: SpectralLaplacian, indices, *, check_factor=True) -> Obliqueness:
    idx = check_index_set(indices, lap.n)
    r = len(idx)
    if r == lap.n:
        zero = np.zeros((r, r))
        return Obliqueness(0.0, 0.0, zero)
    sel = np.asarray(idx)
    K, block, factor, h_sel, y, omega = _principal(lap, sel)
    k2_block = K[:, sel].T @ K[:, sel]
    block_inv = sla.cho_solve(factor, np.eye(r))
    psi_matrix = (
        omega * (block * (y / h_sel)[None, :] + k2_block @ np.outer(y, y))
        - k2_block @ block_inv
    )
    eigs = np.linalg.eigvals(psi_matrix).real
    result = Obliqueness(
        spectral=float(np.abs(eigs).max()),
        nuclear=float(np.trace(psi_matrix)),
        matrix=psi_matrix,
    )
    if check_factor:
        nuclear_eps = (
            float(np.trace(K)) - float(np.trace(sla.cho_solve(factor, k2_block)))
            + omega * (1.0 + float(y @ k2_block @ y))
        )
        if result.nuclear > r * nuclear_eps * (1.0 + 1e-9) + 1e-12:
            raise BoundViolation(
                f"obliqueness {result.nuclear:.6e} exceeds "
                f"{r} * nuclear error {nuclear_eps:.6e}"
            )
    return result


def obliqueness_from_hitting(lap: SpectralLaplacian, indices,
                             probabilities=None) -> float:
    """Nuclear obliqueness through mean first passage times.

    ``sum_i H[:, i]^T Diag(pi) C~[:, i]`` over the selection; pass committor
    ``probabilities`` from the absorbing solve to keep the routes independent.
    """
    idx = check_index_set(indices, lap.n)
    if probabilities is None:
        probabilities = committor_closed_form(lap, idx).probabilities
    H = hitting_times(lap).matrix
    pi = lap.stationary
    sel = np.asarray(idx)
    return float(np.einsum("ij,i,ij->", H[:, sel], pi, probabilities))


@dataclass(frozen=True)
class BoundReport:
    """Per-time approximation errors, bound values and tightness ratios.

    Errors: ``err*_proj`` = projective vs exact, ``err*_sp`` = structure-
    preserving vs exact, ``err*_gap`` = between the two compressions.
    Bounds: ``bound*_proj`` covers the projective error, ``bound*_gap`` the
    gap, ``bound*_composite`` the structure-preserving error in both norms,
    and ``boundnuc_apriori`` the selection-only nuclear bound. A bound above
    its trivial ceiling is flagged vacuous instead of being enforced.
    """

    indices: tuple
    t_grid: np.ndarray
    err2_proj: np.ndarray
    errnuc_proj: np.ndarray
    err2_sp: np.ndarray
    errnuc_sp: np.ndarray
    err2_gap: np.ndarray
    errnuc_gap: np.ndarray
    bound2_proj: np.ndarray
    boundnuc_proj: np.ndarray
    bound2_gap: np.ndarray
    boundnuc_gap: np.ndarray
    bound2_composite: np.ndarray
    boundnuc_composite: np.ndarray
    boundnuc_apriori: np.ndarray
    nystrom: NystromErrors
    obliqueness: Obliqueness
    n: int
    violations: tuple = field(default=())

    _FAMILIES = (
        ("proj_spectral", "err2_proj", "bound2_proj", "spectral"),
        ("proj_nuclear", "errnuc_proj", "boundnuc_proj", "nuclear"),
        ("gap_spectral", "err2_gap", "bound2_gap", "spectral"),
        ("gap_nuclear", "errnuc_gap", "boundnuc_gap", "nuclear"),
        ("composite_spectral", "err2_sp", "bound2_composite", "spectral"),
        ("composite_nuclear", "errnuc_sp", "boundnuc_composite", "nuclear"),
        ("apriori_nuclear", "errnuc_sp", "boundnuc_apriori", "rank"),
    )

    def ceiling(self, kind: str) -> float:
        if kind == "spectral":
            return 2.0
        if kind == "nuclear":
            return 2.0 * self.n
        return 2.0 * min(self.n, 2 * len(self.indices) + 1)

    def vacuous(self, family: str) -> np.ndarray:
        for name, _, bound, kind in self._FAMILIES:
            if name == family:
                return getattr(self, bound) > self.ceiling(kind)
        raise KeyError(family)

    def tightness(self) -> dict:
        """Max actual/bound ratio per family over the non-vacuous points."""
        out = {}
        for name, err, bound, kind in self._FAMILIES:
            active = ~self.vacuous(name)
            ratios = getattr(self, err)[active] / getattr(self, bound)[active]
            out[name] = float(ratios.max()) if ratios.size else float("nan")
        return out

    @property
    def passed(self) -> bool:
        return len(self.violations) == 0


def _half_exp_factor(vals, vecs, t):
    return vecs * np.exp(-np.clip(vals, 0.0, None) * t / 2.0)


def _sym_norms_from_eigs(vals):
    a = np.abs(vals)
    return float(a.max()), float(a.sum())


def error_curves(lap: SpectralLaplacian, bundle: CommittorBundle,
                 ic: InducedChain, t_grid, *, enforce=True,
                 slack=BOUND_SLACK) -> BoundReport:
    """Evaluate both compressions and every error bound over a time grid.

    All norms are exact: differences against the full propagator are
    reduced to the Laplacian eigenbasis (diagonal minus low rank) and the
    compression gap to a 2|I| x 2|I| eigenproblem. Non-vacuous violations
    beyond ``slack`` relative raise BoundViolation when ``enforce``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    n, r = lap.n, bundle.n_selected
    lam, U = lap.eigenvalues, lap.eigenvectors
    V = orthonormal_committor_basis(bundle)
    GV = U.T @ V
    GC = U.T @ bundle.symmetrized
    reduced = GV.T @ (lam[:, None] * GV)
    a_vals, a_vecs = np.linalg.eigh(0.5 * (reduced + reduced.T))
    l_vals, l_vecs = ic.laplacian_eigenvalues, ic.laplacian_eigenvectors

    eps = nystrom_errors(lap, bundle.indices)
    psi = obliqueness(lap, bundle.indices)

    shape = t_grid.shape
    err = {key: np.empty(shape) for key in
           ("2_proj", "nuc_proj", "2_sp", "nuc_sp", "2_gap", "nuc_gap")}
    signature = np.concatenate([np.ones(r), -np.ones(r)])
    for k, t in enumerate(t_grid):
        decay = np.exp(-lam * t)
        BV = GV @ _half_exp_factor(a_vals, a_vecs, t)
        M = -(BV @ BV.T)
        M[np.diag_indices(n)] += decay
        err["2_proj"][k], err["nuc_proj"][k] = _sym_norms_from_eigs(
            np.linalg.eigvalsh(0.5 * (M + M.T)))
        BC = GC @ _half_exp_factor(l_vals, l_vecs, t)
        M = -(BC @ BC.T)
        M[np.diag_indices(n)] += decay
        err["2_sp"][k], err["nuc_sp"][k] = _sym_norms_from_eigs(
            np.linalg.eigvalsh(0.5 * (M + M.T)))
        F = np.hstack([BC, BV])
        gap_eigs = np.linalg.eigvals((F.T @ F) * signature[None, :]).real
        err["2_gap"][k], err["nuc_gap"][k] = _sym_norms_from_eigs(gap_eigs)

    c_proj = PROJECTIVE_BOUND_CONSTANT
    c_gap = OBLIQUE_BOUND_CONSTANT
    report = BoundReport(
        indices=bundle.indices,
        t_grid=t_grid,
        err2_proj=err["2_proj"], errnuc_proj=err["nuc_proj"],
        err2_sp=err["2_sp"], errnuc_sp=err["nuc_sp"],
        err2_gap=err["2_gap"], errnuc_gap=err["nuc_gap"],
        bound2_proj=c_proj * eps.spectral / t_grid,
        boundnuc_proj=c_proj * eps.nuclear / t_grid,
        bound2_gap=c_gap * psi.spectral / t_grid,
        boundnuc_gap=c_gap * psi.nuclear / t_grid,
        bound2_composite=(c_proj * eps.spectral + c_gap * psi.spectral) / t_grid,
        boundnuc_composite=(c_proj * eps.nuclear + c_gap * psi.nuclear) / t_grid,
        boundnuc_apriori=(c_proj + r * c_gap) * eps.nuclear / t_grid,
        nystrom=eps,
        obliqueness=psi,
        n=n,
    )
    violations = []
    for name, err_key, bound_key, kind in BoundReport._FAMILIES:
        actual = getattr(report, err_key)
        bound = getattr(report, bound_key)
        active = bound <= report.ceiling(kind)
        bad = active & (actual > bound * (1.0 + slack) + 1e-15)
        for where in np.nonzero(bad)[0]:
            violations.append((name, float(t_grid[where]),
                               float(actual[where]), float(bound[where])))
    report = replace(report, violations=tuple(violations))
    if enforce and violations:
        name, t_bad, actual, bound = violations[0]
        raise BoundViolation(
            f"{name} bound violated at t={t_bad:.4g}: "
            f"actual {actual:.6e} > bound {bound:.6e} "
            f"({len(violations)} grid points total)"
        )
    return report


def stochasticity_check(bundle: CommittorBundle, ic: InducedChain, t_grid):
    """Worst entrywise negativity and row-sum drift of the lifted stochastic
    dynamics over a time grid. Returns (min_entry, max_rowsum_deviation)."""
    min_entry = np.inf
    max_dev = 0.0
    for t in np.asarray(t_grid, dtype=float):
        stochastic = structure_preserving(bundle, ic, t).stochastic
        min_entry = min(min_entry, float(stochastic.min()))
        max_dev = max(max_dev, float(np.abs(stochastic.sum(axis=1) - 1.0).max()))
    return min_entry, max_dev


@dataclass(frozen=True)
class IntegratedOccupation:
    """Residuals of the time-integrated killed compressions against the
    shifted low-rank approximation of (L + gamma I)^-1."""

    residual_sp: float
    residual_proj: float

    @property
    def max_residual(self) -> float:
        return max(self.residual_sp, self.residual_proj)


def default_integration_gamma(lap: SpectralLaplacian) -> float:
    """Killing rate for integral checks: small next to the slowest timescale
    but large enough to keep the shifted inverse well conditioned."""
    return 1.0 / (10.0 * lap.trace_pseudoinverse)


def integrated_occupation_check(lap: SpectralLaplacian, indices,
                                gamma: float) -> IntegratedOccupation:
    """Closed-form time integrals of both killed compressions.

    Both must reproduce the shifted low-rank approximation
    ``Kg[:, I] Kg[I, I]^-1 Kg[I, :]`` exactly.
    """
    idx = check_index_set(indices, lap.n)
    sel = np.asarray(idx)
    ops = killed(lap, gamma)
    Kg = ops.inverse
    nystrom = Kg[:, sel] @ sla.solve(Kg[np.ix_(sel, sel)], Kg[sel, :],
                                     assume_a="pos")
    scale = max(np.abs(nystrom).max(), 1e-300)
    kb = killed_committor(ops, idx)
    Cg = kb.symmetrized
    reduced = Cg.T @ ops.matrix @ Cg
    sp_integral = Cg @ sla.solve(reduced, Cg.T, assume_a="pos")
    Vg = Cg @ _sym_inv_sqrt(Cg.T @ Cg)
    reduced_v = Vg.T @ ops.matrix @ Vg
    proj_integral = Vg @ sla.solve(reduced_v, Vg.T, assume_a="pos")
    return IntegratedOccupation(
        residual_sp=float(np.abs(sp_integral - nystrom).max() / scale),
        residual_proj=float(np.abs(proj_integral - nystrom).max() / scale),
    )


def autocorrelation(f, transition, stationary):
    """Stationary autocorrelation of an observable under given dynamics.

    ``f`` may be a vector (returns a scalar) or an (n, m) matrix (returns
    an (m, m) matrix); ``transition`` is the row-stochastic propagator at
    the lag of interest.
    """
    f = np.asarray(f, dtype=float)
    if f.ndim == 1:
        return float(f @ (stationary * (transition @ f)))
    return f.T @ (stationary[:, None] * (transition @ f))


def autocorrelation_discrepancy(h, p_sym, q_sym, n_samples=1000, seed=0):
    """Sampled autocorrelation gap between two dynamics vs its exact supremum.

    Draws random observables with unit stationary norm; the absolute
    autocorrelation difference never exceeds the spectral norm of the
    symmetrized difference, and the sample supremum approaches it.
    Returns (sampled_supremum, spectral_norm).
    """
    rng = np.random.default_rng(seed)
    diff = p_sym - q_sym
    n = diff.shape[0]
    g = rng.standard_normal((n_samples, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    samples = np.abs(np.einsum("si,ij,sj->s", g, diff, g))
    return float(samples.max()), matrix_norms(diff).spectral
