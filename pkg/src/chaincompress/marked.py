"""The marked chain: the original process labelled by its last selected state.

States of the augmented space are pairs (marking, position) with marking in
the selection and position anywhere; positions inside the selection force
marking == position. The marked chain is Markovian but not reversible.
Orthogonal projections onto the marking and position coordinates recover
the induced and original generators exactly, which is what makes the
structure-preserving compression analyzable.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from .chain import ReversibleChain
from .committor import CommittorBundle, KilledCommittorBundle
from .compress import structure_preserving
from .induced import InducedChain
from .spectral import SpectralLaplacian, propagator
from .validation import check_index_set


@dataclass(frozen=True)
class MarkedChain:
    """Rate matrix and stationary law of the augmented (marked) process.

    The augmented ordering is: marked states first, in selection order,
    then unmarked states lexicographic in (marking, position). States that
    cannot be reached from any marked state are pruned so the stationary
    law stays entrywise positive; the unpruned operator is kept for
    spectrum comparisons.

    Attributes
    ----------
    indices : tuple of int
    states : tuple of (marking, position) pairs
        The essential augmented states after pruning.
    rates : ndarray, shape (m, m)
    stationary : ndarray
        Entrywise positive on the essential states.
    sqrt_stationary : ndarray
    laplacian : ndarray
        -Diag(h0) rates Diag(h0)^-1; asymmetric in general.
    pruned_states : tuple of (marking, position) pairs
    rates_full, states_full, stationary_full
        The unpruned operator and its (possibly zero-padded) stationary law.
    """

    indices: tuple
    states: tuple
    rates: np.ndarray
    stationary: np.ndarray
    sqrt_stationary: np.ndarray
    laplacian: np.ndarray
    pruned_states: tuple
    rates_full: np.ndarray
    states_full: tuple
    stationary_full: np.ndarray

    @property
    def m(self) -> int:
        return self.rates.shape[0]

    @property
    def pruned(self) -> bool:
        return len(self.pruned_states) > 0


def _reachable_within(adjacency: np.ndarray, start: int, allowed: np.ndarray) -> set:
    """Breadth-first positions reachable from ``start`` through ``allowed``."""
    seen = {start}
    frontier = [start]
    allowed_set = set(int(a) for a in allowed)
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.nonzero(adjacency[u])[0]:
                v = int(v)
                if v in allowed_set and v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
    return seen


def build_marked(chain: ReversibleChain, bundle: CommittorBundle) -> MarkedChain:
    """Assemble the marked chain for the bundle's selection."""
    idx = check_index_set(bundle.indices, chain.n)
    sel = np.asarray(idx)
    comp = np.setdiff1d(np.arange(chain.n), sel)
    dense = chain.dense_rates()
    pi = chain.stationary

    states_full = [(int(i), int(i)) for i in sel]
    states_full += [(int(i), int(j)) for i in sel for j in comp]
    m_full = len(states_full)
    marks = np.array([s[0] for s in states_full])
    positions = np.array([s[1] for s in states_full])
    in_selection = np.isin(positions, sel)

    # rate (i,p) -> (k,q): R[p,q] if the marking transfers consistently
    rates_full = dense[np.ix_(positions, positions)].copy()
    same_mark = marks[:, None] == marks[None, :]
    allowed = np.where(in_selection[None, :], True, same_mark)
    rates_full[~allowed] = 0.0

    col_of = {int(i): c for c, i in enumerate(sel)}
    stationary_full = np.empty(m_full)
    stationary_full[: len(idx)] = pi[sel]
    for a in range(len(idx), m_full):
        i, j = states_full[a]
        stationary_full[a] = bundle.probabilities[j, col_of[i]] * pi[j]

    # prune unmarked states unreachable from their own marked state
    adjacency = dense > 0
    keep = np.ones(m_full, dtype=bool)
    if comp.size:
        for i in sel:
            allowed_positions = np.concatenate(([i], comp))
            reach = _reachable_within(adjacency, int(i), allowed_positions)
            for a in range(len(idx), m_full):
                mi, pj = states_full[a]
                if mi == i and pj not in reach:
                    keep[a] = False

    kept = np.nonzero(keep)[0]
    pruned_states = tuple(states_full[a] for a in np.nonzero(~keep)[0])
    rates = rates_full[np.ix_(kept, kept)]
    stationary = stationary_full[kept]
    stationary_full_clean = np.where(keep, stationary_full, 0.0)
    h0 = np.sqrt(stationary)
    laplacian = -rates * (h0[:, None] / h0[None, :])
    return MarkedChain(
        indices=idx,
        states=tuple(states_full[a] for a in kept),
        rates=rates,
        stationary=stationary,
        sqrt_stationary=h0,
        laplacian=laplacian,
        pruned_states=pruned_states,
        rates_full=rates_full,
        states_full=tuple(states_full),
        stationary_full=stationary_full_clean,
    )


@dataclass(frozen=True)
class MarkedProjections:
    """Indicator matrices of marking/position and their orthonormal rescalings.

    ``marking`` (m x |I|) and ``position`` (m x n) have orthonormal columns;
    ``position^T marking`` equals the symmetrized committor. Killed variants
    carry their own stationary rescaling; the killed position map is only a
    contraction, not orthonormal.
    """

    indicator_marking: np.ndarray
    indicator_position: np.ndarray
    marking: np.ndarray
    position: np.ndarray
    sqrt_stationary_reduced: np.ndarray
    gamma: float | None = None
    killed_marking: np.ndarray | None = None
    killed_position: np.ndarray | None = None
    killed_stationary: np.ndarray | None = None
    killed_laplacian: np.ndarray | None = None


def projections(mc: MarkedChain, bundle: CommittorBundle,
                killed: KilledCommittorBundle | None = None) -> MarkedProjections:
    """Build the marking/position projections, optionally with killing."""
    m = mc.m
    r = len(mc.indices)
    n = bundle.n
    col_of = {int(i): c for c, i in enumerate(mc.indices)}
    w_tilde = np.zeros((m, r))
    q_tilde = np.zeros((m, n))
    for a, (i, j) in enumerate(mc.states):
        w_tilde[a, col_of[i]] = 1.0
        q_tilde[a, j] = 1.0
    h0 = mc.sqrt_stationary
    h = bundle.sqrt_stationary_full
    h_hat = bundle.sqrt_stationary
    marking = w_tilde * (h0[:, None] / h_hat[None, :])
    position = q_tilde * (h0[:, None] / h[None, :])

    if killed is None:
        return MarkedProjections(
            indicator_marking=w_tilde,
            indicator_position=q_tilde,
            marking=marking,
            position=position,
            sqrt_stationary_reduced=h_hat,
        )

    pi = h**2
    pi0_g = np.array([killed.probabilities[j, col_of[i]] * pi[j] for i, j in mc.states])
    h0_g = np.sqrt(pi0_g)
    marking_g = w_tilde * (h0_g[:, None] / killed.sqrt_stationary[None, :])
    position_g = q_tilde * (h0_g[:, None] / h[None, :])
    rates_g = mc.rates - killed.gamma * np.eye(m)
    laplacian_g = -rates_g * (h0_g[:, None] / h0_g[None, :])
    return MarkedProjections(
        indicator_marking=w_tilde,
        indicator_position=q_tilde,
        marking=marking,
        position=position,
        sqrt_stationary_reduced=h_hat,
        gamma=killed.gamma,
        killed_marking=marking_g,
        killed_position=position_g,
        killed_stationary=pi0_g,
        killed_laplacian=laplacian_g,
    )


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance


@dataclass(frozen=True)
class IdentityReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def residual(self, name: str) -> float:
        for c in self.checks:
            if c.name == name:
                return c.residual
        raise KeyError(name)


def identity_suite(mc: MarkedChain, proj: MarkedProjections,
                   lap: SpectralLaplacian, bundle: CommittorBundle,
                   ic: InducedChain, *, killed=None, killed_lap=None,
                   tolerance=1e-9) -> IdentityReport:
    """Verify every projection identity linking marked, original and induced
    generators. Residuals are max-norm, relative to the scale of each target.

    ``killed`` / ``killed_lap`` are the KilledCommittorBundle and
    KilledOperators matching the killed projections, when present.
    """
    W, Q = proj.marking, proj.position
    L0 = mc.laplacian
    L = lap.matrix
    L_hat = ic.laplacian
    scale_L = max(np.abs(L).max(), 1e-300)
    scale_Lh = max(np.abs(L_hat).max(), 1e-300)

    def rel(residual, scale):
        return float(residual / scale)

    checks = [
        IdentityCheck("position_orthonormal",
                      float(np.abs(Q.T @ Q - np.eye(Q.shape[1])).max()), tolerance),
        IdentityCheck("marking_orthonormal",
                      float(np.abs(W.T @ W - np.eye(W.shape[1])).max()), tolerance),
        IdentityCheck("projection_recovers_committor",
                      float(np.abs(Q.T @ W - bundle.symmetrized).max()), tolerance),
        IdentityCheck("original_generator_recovered",
                      rel(np.abs(Q.T @ L0 @ Q - L).max(), scale_L), tolerance),
        IdentityCheck("position_invariant_subspace",
                      rel(np.abs(L0 @ Q - Q @ L).max(), scale_L), tolerance),
        IdentityCheck("induced_generator_recovered",
                      rel(np.abs(W.T @ L0 @ W - L_hat).max(), scale_Lh), tolerance),
        IdentityCheck("stationary_marginal_position",
                      float(np.abs(proj.indicator_position.T @ mc.stationary
                                   - lap.stationary).max()), tolerance),
        IdentityCheck("stationary_marginal_marking",
                      float(np.abs(proj.indicator_marking.T @ mc.stationary
                                   - bundle.stationary).max()), tolerance),
        IdentityCheck("stationary_left_null",
                      rel(np.abs(mc.stationary @ mc.rates).max(),
                          np.abs(mc.rates).max()), tolerance),
    ]
    if proj.killed_marking is not None:
        if killed is None or killed_lap is None:
            raise ValueError("killed projections present: pass killed and killed_lap")
        Wg = proj.killed_marking
        kb_sym = killed.symmetrized
        target = kb_sym.T @ killed_lap.matrix @ kb_sym
        got = Wg.T @ proj.killed_laplacian @ Wg
        checks.append(IdentityCheck(
            "killed_induced_generator_recovered",
            rel(np.abs(got - target).max(), max(np.abs(target).max(), 1e-300)),
            tolerance,
        ))
        checks.append(IdentityCheck(
            "killed_marking_orthonormal",
            float(np.abs(Wg.T @ Wg - np.eye(Wg.shape[1])).max()), tolerance,
        ))
        Qg = proj.killed_position
        sv = np.linalg.svd(Qg, compute_uv=False)
        checks.append(IdentityCheck("killed_position_contraction",
                                    abs(float(sv.max()) - 1.0), tolerance))
        checks.append(IdentityCheck(
            "killed_projection_recovers_committor",
            float(np.abs(Qg.T @ Wg - kb_sym).max()), tolerance,
        ))
    return IdentityReport(checks=tuple(checks))


@dataclass(frozen=True)
class SpectrumComparison:
    """Multiset comparison of the marked spectrum with its predicted split.

    The marked rate matrix carries every eigenvalue of the original rate
    matrix once, plus the complement-block eigenvalues repeated
    (|I| - 1) times. Comparison always uses the unpruned operator;
    ``pruned`` flags that the essential chain differs from it.
    """

    eigenvalues: np.ndarray
    expected: np.ndarray
    max_deviation: float
    pruned: bool

    def passed(self, tol=1e-8) -> bool:
        return self.max_deviation <= tol


def marked_spectrum(mc: MarkedChain, lap: SpectralLaplacian) -> SpectrumComparison:
    got = np.sort(np.linalg.eigvals(mc.rates_full).real)
    expected = [-lap.eigenvalues]
    r = len(mc.indices)
    comp = np.setdiff1d(np.arange(lap.n), np.asarray(mc.indices))
    if comp.size and r > 1:
        block_vals = np.linalg.eigvalsh(lap.matrix[np.ix_(comp, comp)])
        expected.extend([-block_vals] * (r - 1))
    expected = np.sort(np.concatenate(expected))
    dev = float(np.abs(got - expected).max()) if got.size == expected.size else np.inf
    return SpectrumComparison(eigenvalues=got, expected=expected,
                              max_deviation=dev, pruned=mc.pruned)


def marked_propagator(mc: MarkedChain, t: float) -> np.ndarray:
    """exp(-L0 t) for the asymmetric marked generator (Pade, scaling-squaring)."""
    return sla.expm(-mc.laplacian * t)


def marked_propagator_ode(mc: MarkedChain, t: float, rtol=1e-10, atol=1e-12) -> np.ndarray:
    """Integrator oracle for exp(-L0 t); column-by-column solve."""
    m = mc.m

    def rhs(_, y):
        return (-mc.laplacian @ y.reshape(m, m)).ravel()

    sol = solve_ivp(rhs, (0.0, t), np.eye(m).ravel(), rtol=rtol, atol=atol,
                    method="RK45", dense_output=False)
    return sol.y[:, -1].reshape(m, m)


@dataclass(frozen=True)
class AlphaConvergence:
    """Deviation of the mixed-generator projection from the reduced target.

    Pushing states of equal marking together at rate ``alpha`` turns the
    position-projected marked propagator into the structure-preserving
    compression; the deviation decays like 1/alpha. ``recovered_residual``
    is the alpha = 0 sanity check against the exact propagator.
    """

    t_grid: np.ndarray
    alpha_grid: np.ndarray
    deviations: np.ndarray          # shape (len(t_grid), len(alpha_grid))
    recovered_residual: np.ndarray  # per t
    alpha_cap: float = 1e6


def alpha_limit_check(mc: MarkedChain, proj: MarkedProjections,
                      lap: SpectralLaplacian, bundle: CommittorBundle,
                      ic: InducedChain, t_grid, alpha_grid,
                      *, alpha_cap=1e6) -> AlphaConvergence:
    t_grid = np.asarray(t_grid, dtype=float)
    alpha_grid = np.asarray(alpha_grid, dtype=float)
    if np.any(np.diff(alpha_grid) <= 0):
        raise ValueError("alpha grid must be increasing")
    W, Q = proj.marking, proj.position
    mixer = np.eye(mc.m) - W @ W.T
    deviations = np.full((t_grid.size, alpha_grid.size), np.nan)
    recovered = np.empty(t_grid.size)
    for ti, t in enumerate(t_grid):
        exact = propagator(lap, t)
        recovered[ti] = float(np.abs(Q.T @ marked_propagator(mc, t) @ Q - exact).max())
        target = structure_preserving(bundle, ic, t).symmetric
        for ai, alpha in enumerate(alpha_grid):
            if alpha * t > alpha_cap:
                continue
            mixed = sla.expm(-(mc.laplacian + alpha * mixer) * t)
            deviations[ti, ai] = float(np.abs(Q.T @ mixed @ Q - target).max())
    return AlphaConvergence(t_grid=t_grid, alpha_grid=alpha_grid,
                            deviations=deviations, recovered_residual=recovered,
                            alpha_cap=alpha_cap)
