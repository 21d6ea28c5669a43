"""Verification suites: every closed-form identity and bound at desk scale.

Each suite returns a list of CheckResult rows; the CLI aggregates them into
an exit code and a machine-readable failure list. The same functions back
the acceptance tests.
"""

from dataclasses import dataclass

import numpy as np

from .chain import ReversibleChain
from .committor import (
    committor_absorbing_solve,
    committor_closed_form,
    hitting_times,
    killed_committor,
    mean_marking_time_absorbing,
)
from .compress import (
    default_integration_gamma,
    error_curves,
    integrated_occupation_check,
    nystrom_errors,
    obliqueness,
    obliqueness_from_hitting,
    projective_compression,
    stochasticity_check,
)
from .errors import BoundViolation
from .induced import (
    flow_limit_check,
    hitting_preservation,
    induced_chain,
    induced_from_k,
    interpretation_checks,
)
from .marked import build_marked, identity_suite, marked_spectrum, projections
from .spectral import killed, propagator, symmetrize, time_grid, unsymmetrize


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance

    def as_dict(self) -> dict:
        return {
            "suite": self.suite,
            "name": self.name,
            "residual": float(self.residual),
            "tolerance": float(self.tolerance),
            "passed": bool(self.passed),
        }


def _rel(difference, scale) -> float:
    return float(difference / max(scale, 1e-300))


def verify_chain(chain: ReversibleChain, lap, *, seed=0) -> list:
    rng = np.random.default_rng(seed)
    out = []
    grid = time_grid(lap, points=8)
    s, t = rng.uniform(grid[0], grid[-1], size=2)
    semigroup = np.abs(propagator(lap, s + t) - propagator(lap, s) @ propagator(lap, t)).max()
    out.append(CheckResult("chain", "semigroup", float(semigroup), 1e-10))
    h = lap.sqrt_stationary
    conservation = max(abs(float(h @ propagator(lap, t) @ h) - 1.0) for t in grid)
    out.append(CheckResult("chain", "probability_conservation", conservation, 1e-10))
    K = lap.pseudoinverse
    pinv = np.abs(K @ lap.matrix @ K - K).max()
    out.append(CheckResult("chain", "pseudoinverse", _rel(pinv, np.abs(K).max()), 1e-10))
    gamma = default_integration_gamma(lap)
    ops = killed(lap, gamma)
    t_mid = float(grid[len(grid) // 2])
    killed_res = np.abs(ops.propagator(t_mid)
                        - np.exp(-gamma * t_mid) * propagator(lap, t_mid)).max()
    out.append(CheckResult("chain", "killed_consistency", float(killed_res), 1e-12))
    rowsum = np.abs(np.asarray(chain.rates.sum(axis=1))).max()
    out.append(CheckResult("chain", "rate_rows_sum_zero",
                           _rel(rowsum, abs(chain.rates).max()), 1e-12))
    stochastic = unsymmetrize(propagator(lap, t_mid), h)
    out.append(CheckResult("chain", "transition_row_stochastic",
                           float(np.abs(stochastic.sum(axis=1) - 1.0).max()), 1e-12))
    return out


def verify_committor(chain: ReversibleChain, lap, indices) -> list:
    out = []
    bundle = committor_closed_form(lap, indices)
    direct = committor_absorbing_solve(chain, indices)
    out.append(CheckResult("committor", "oracle_equivalence",
                           float(np.abs(bundle.probabilities - direct).max()), 1e-9))
    C = bundle.symmetrized
    sv = np.linalg.svd(C, compute_uv=False)
    out.append(CheckResult("committor", "contraction_top_singular_value",
                           abs(float(sv.max()) - 1.0), 1e-10))
    out.append(CheckResult("committor", "maps_reduced_stationary",
                           float(np.abs(C @ bundle.sqrt_stationary
                                        - lap.sqrt_stationary).max()), 1e-10))
    flow = -(chain.dense_rates() * chain.stationary[:, None])
    comp = np.setdiff1d(np.arange(chain.n), np.asarray(bundle.indices))
    dirichlet = np.abs((flow @ bundle.probabilities)[comp]).max() if comp.size else 0.0
    out.append(CheckResult("committor", "dirichlet_stationarity",
                           _rel(dirichlet, np.abs(flow).max()), 1e-9))
    previous = np.inf
    monotone = 0.0
    for gamma in (1e-1, 1e-2, 1e-3):
        kb = killed_committor(killed(lap, gamma), indices)
        gap = float(np.abs(kb.probabilities - bundle.probabilities).max())
        if gap > previous:
            monotone = max(monotone, gap - previous)
        previous = gap
    out.append(CheckResult("committor", "killed_monotone_convergence", monotone, 0.0))
    omega_oracle = mean_marking_time_absorbing(chain, indices)
    out.append(CheckResult("committor", "marking_time",
                           _rel(abs(bundle.marking_time - omega_oracle),
                                max(omega_oracle, 1e-300)), 1e-9))
    return out


def verify_induced(chain: ReversibleChain, lap, indices) -> list:
    out = []
    bundle = committor_closed_form(lap, indices)
    via_flow = induced_chain(chain, bundle)
    via_k = induced_from_k(lap, indices)
    scale = np.abs(via_flow.rates).max()
    out.append(CheckResult("induced", "construction_equivalence",
                           _rel(np.abs(via_flow.rates - via_k.rates).max(), scale), 1e-10))
    off = via_flow.laplacian - np.diag(np.diag(via_flow.laplacian))
    out.append(CheckResult("induced", "laplacian_sign_structure",
                           float(max(off.max(), 0.0)), 1e-12))
    identity = via_flow.laplacian @ via_flow.pseudoinverse
    target = np.eye(via_flow.n_selected) - np.outer(via_flow.sqrt_stationary,
                                                    via_flow.sqrt_stationary)
    out.append(CheckResult("induced", "pseudoinverse_identity",
                           float(np.abs(identity - target).max()), 1e-9))
    if len(bundle.indices) >= 2:
        H = hitting_times(lap).matrix
        out.append(CheckResult("induced", "hitting_preservation",
                               _rel(hitting_preservation(lap, via_flow), H.max()), 1e-8))
        report = interpretation_checks(chain, via_flow)
        out.append(CheckResult("induced", "holding_time_interpretation",
                               report.holding_residual, report.tolerance))
        out.append(CheckResult("induced", "jump_probability_interpretation",
                               report.jump_residual, report.tolerance))
        out.append(CheckResult("induced", "stationary_interpretation",
                               report.stationary_residual, report.tolerance))
    t_small = 1e-4 * lap.trace_pseudoinverse / lap.n
    res_small = flow_limit_check(chain, lap, bundle, via_flow, t_small)
    res_half = flow_limit_check(chain, lap, bundle, via_flow, t_small / 2)
    out.append(CheckResult("induced", "flow_limit_first_order",
                           res_half / max(res_small, 1e-300), 0.75))
    return out


def verify_marked(chain: ReversibleChain, lap, indices, *, gamma=0.1) -> list:
    out = []
    bundle = committor_closed_form(lap, indices)
    ic = induced_chain(chain, bundle)
    mc = build_marked(chain, bundle)
    ops = killed(lap, gamma)
    kb = killed_committor(ops, indices)
    proj = projections(mc, bundle, killed=kb)
    report = identity_suite(mc, proj, lap, bundle, ic, killed=kb, killed_lap=ops)
    for check in report.checks:
        out.append(CheckResult("marked", check.name, check.residual, check.tolerance))
    spectrum = marked_spectrum(mc, lap)
    out.append(CheckResult("marked", "spectrum_multiset",
                           spectrum.max_deviation, 1e-8))
    pi_flow = mc.stationary @ mc.rates
    out.append(CheckResult("marked", "stationary_flow",
                           _rel(np.abs(pi_flow).max(), np.abs(mc.rates).max()), 1e-10))
    return out


def verify_bounds(lap, indices, *, points=16, chain=None) -> list:
    out = []
    bundle = committor_closed_form(lap, indices)
    if chain is not None:
        ic = induced_chain(chain, bundle)
    else:
        ic = induced_from_k(lap, indices)
    grid = time_grid(lap, points=points)
    try:
        report = error_curves(lap, bundle, ic, grid)
        out.append(CheckResult("bounds", "all_inequalities", 0.0, 1.0))
        for family, ratio in report.tightness().items():
            if np.isfinite(ratio):
                out.append(CheckResult("bounds", f"tightness_{family}", ratio, 1.0 + 1e-8))
    except BoundViolation as exc:
        out.append(CheckResult("bounds", f"violated: {exc}", 1.0, 0.0))
        return out
    min_entry, rowsum_dev = stochasticity_check(bundle, ic, grid)
    out.append(CheckResult("bounds", "lifted_nonnegative", max(-min_entry, 0.0), 1e-12))
    out.append(CheckResult("bounds", "lifted_row_stochastic", rowsum_dev, 1e-10))
    t_probe = float(grid[points // 2])
    proj_t = projective_compression(lap, bundle, t_probe)
    out.append(CheckResult("bounds", "projective_conserves_stationary",
                           float(np.abs(proj_t @ lap.sqrt_stationary
                                        - lap.sqrt_stationary).max()), 1e-10))
    return out


def verify_obliqueness(chain: ReversibleChain, lap, indices) -> list:
    out = []
    psi = obliqueness(lap, indices)
    tilde = committor_absorbing_solve(chain, indices)
    via_hitting = obliqueness_from_hitting(lap, indices, tilde)
    out.append(CheckResult("obliqueness", "two_formula_agreement",
                           _rel(abs(psi.nuclear - via_hitting),
                                max(abs(via_hitting), 1e-300)), 1e-7))
    eps = nystrom_errors(lap, indices)
    out.append(CheckResult("obliqueness", "nuclear_error_schur_agreement",
                           _rel(abs(eps.nuclear - eps.nuclear_schur),
                                max(eps.nuclear, 1e-300)), 1e-8))
    margin = psi.nuclear - len(list(indices)) * eps.nuclear
    out.append(CheckResult("obliqueness", "bounded_by_selection_size",
                           max(margin, 0.0), 1e-9))
    return out


def verify_integral(lap, indices, *, gamma=None) -> list:
    gamma = default_integration_gamma(lap) if gamma is None else gamma
    result = integrated_occupation_check(lap, indices, gamma)
    return [
        CheckResult("integral", "structure_preserving_occupation",
                    result.residual_sp, 1e-9),
        CheckResult("integral", "projective_occupation",
                    result.residual_proj, 1e-9),
    ]


def run_suites(chain: ReversibleChain, indices, *, suites=None, seed=0) -> list:
    """Run the requested verification suites on one chain and selection."""
    available = ("chain", "committor", "induced", "marked", "bounds",
                 "obliqueness", "integral")
    selected = available if suites is None else tuple(suites)
    unknown = set(selected) - set(available)
    if unknown:
        raise ValueError(f"unknown suites: {sorted(unknown)}")
    lap = symmetrize(chain)
    results = []
    if "chain" in selected:
        results += verify_chain(chain, lap, seed=seed)
    if "committor" in selected:
        results += verify_committor(chain, lap, indices)
    if "induced" in selected:
        results += verify_induced(chain, lap, indices)
    if "marked" in selected:
        results += verify_marked(chain, lap, indices)
    if "bounds" in selected:
        results += verify_bounds(lap, indices, chain=chain)
    if "obliqueness" in selected:
        results += verify_obliqueness(chain, lap, indices)
    if "integral" in selected:
        results += verify_integral(lap, indices)
    return results
