"""Continuous-time trajectory sampling and Monte-Carlo corroboration.

Jump-process sampling of the original and marked chains with
counter-based per-trajectory random streams, so results are reproducible
regardless of evaluation order. Estimators report mean, standard error and
the sample count; acceptance everywhere is the 3-sigma rule.
"""

from dataclasses import dataclass

import numpy as np

from .chain import ReversibleChain
from .committor import CommittorBundle
from .marked import MarkedChain, MarkedProjections
from .validation import check_index_set


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for trajectory ``index`` of run ``seed``."""
    return np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF,
                                                     index & 0xFFFFFFFFFFFFFFFF]))


@dataclass(frozen=True)
class Trajectory:
    """One sampled path: state sequence and the times it jumped.

    ``jump_times[0]`` is 0 with the initial state; later entries are the
    jump instants, strictly increasing and bounded by ``t_max``.
    """

    jump_times: np.ndarray
    states: np.ndarray
    t_max: float

    def state_at(self, t: float) -> int:
        if not 0 <= t <= self.t_max:
            raise ValueError(f"t must lie in [0, {self.t_max}]")
        return int(self.states[np.searchsorted(self.jump_times, t, side="right") - 1])


@dataclass(frozen=True)
class Estimator:
    """Sample mean with its standard error."""

    mean: np.ndarray | float
    stderr: np.ndarray | float
    n_samples: int
    seed: int

    def within(self, target, n_sigma=3.0) -> bool:
        dev = np.abs(np.asarray(self.mean) - np.asarray(target))
        return bool(np.all(dev <= n_sigma * np.asarray(self.stderr) + 1e-12))


class _JumpSampler:
    """Preprocessed sampler for an arbitrary conservative rate matrix."""

    def __init__(self, rates: np.ndarray, stationary: np.ndarray):
        rates = np.asarray(rates, dtype=float)
        self.n = rates.shape[0]
        self.exit_rates = -np.diag(rates)
        self.stationary = stationary
        off = rates.copy()
        np.fill_diagonal(off, 0.0)
        self.targets = []
        self.cum_probs = []
        for i in range(self.n):
            nz = np.nonzero(off[i])[0]
            probs = off[i, nz] / self.exit_rates[i]
            self.targets.append(nz)
            self.cum_probs.append(np.cumsum(probs))

    def initial(self, x0, rng):
        if x0 == "stationary":
            return int(rng.choice(self.n, p=self.stationary))
        return int(x0)

    def step(self, state, rng):
        dt = rng.exponential(1.0 / self.exit_rates[state])
        u = rng.random()
        nxt = self.targets[state][np.searchsorted(self.cum_probs[state], u)]
        return dt, int(nxt)

    def run(self, x0, t_max, rng):
        state = self.initial(x0, rng)
        times, states = [0.0], [state]
        t = 0.0
        while True:
            dt, nxt = self.step(state, rng)
            if t + dt >= t_max:
                break
            t += dt
            state = nxt
            times.append(t)
            states.append(state)
        return Trajectory(jump_times=np.array(times), states=np.array(states),
                          t_max=t_max)

    def run_until(self, x0, targets: set, rng, t_budget=np.inf):
        """Run until a target state is entered; returns (state, time)."""
        state = self.initial(x0, rng)
        t = 0.0
        if state in targets:
            return state, 0.0
        while t < t_budget:
            dt, nxt = self.step(state, rng)
            t += dt
            state = nxt
            if state in targets:
                return state, t
        raise RuntimeError("time budget exhausted before reaching targets")


def _chain_sampler(chain: ReversibleChain) -> _JumpSampler:
    return _JumpSampler(chain.dense_rates(), chain.stationary)


def sample_path(chain: ReversibleChain, x0, t_max: float, seed: int,
                *, trajectory_index=0) -> Trajectory:
    """Sample one path of the chain; ``x0`` is a state index or "stationary"."""
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    return _chain_sampler(chain).run(x0, t_max,
                                     trajectory_rng(seed, trajectory_index))


def estimate_committor(chain: ReversibleChain, indices, n_traj: int,
                       seed: int) -> Estimator:
    """Monte-Carlo committor matrix: first selected state hit, per start.

    Starts inside the selection are exact indicators with zero variance and
    are not sampled.
    """
    idx = check_index_set(indices, chain.n)
    if n_traj < 100:
        raise ValueError("need at least 100 trajectories")
    sel = set(idx)
    col_of = {j: c for c, j in enumerate(idx)}
    sampler = _chain_sampler(chain)
    mean = np.zeros((chain.n, len(idx)))
    stderr = np.zeros_like(mean)
    stream = 0
    for start in range(chain.n):
        if start in sel:
            mean[start, col_of[start]] = 1.0
            continue
        hits = np.zeros((n_traj, len(idx)))
        for rep in range(n_traj):
            rng = trajectory_rng(seed, stream)
            stream += 1
            state, _ = sampler.run_until(start, sel, rng)
            hits[rep, col_of[state]] = 1.0
        mean[start] = hits.mean(axis=0)
        stderr[start] = hits.std(axis=0, ddof=1) / np.sqrt(n_traj)
    return Estimator(mean=mean, stderr=stderr, n_samples=n_traj, seed=seed)


def estimate_hitting_time(chain: ReversibleChain, start: int, target: int,
                          n_traj: int, seed: int) -> Estimator:
    """Monte-Carlo mean first passage time from ``start`` to ``target``."""
    sampler = _chain_sampler(chain)
    times = np.empty(n_traj)
    for rep in range(n_traj):
        _, times[rep] = sampler.run_until(start, {target},
                                          trajectory_rng(seed, rep))
    return Estimator(mean=float(times.mean()),
                     stderr=float(times.std(ddof=1) / np.sqrt(n_traj)),
                     n_samples=n_traj, seed=seed)


@dataclass(frozen=True)
class ReducedDynamicsEstimate:
    """Sampled marking-projected propagator of the marked chain over a grid."""

    t_grid: np.ndarray
    mean: np.ndarray     # (T, m, m) in the reduced marking space
    stderr: np.ndarray
    n_samples: int
    seed: int


def estimate_reduced_dynamics(mc: MarkedChain, proj: MarkedProjections,
                              t_grid, n_traj: int, seed: int) -> ReducedDynamicsEstimate:
    """Estimate the marking-projected marked propagator from trajectories.

    Each path starts from the marked stationary law; the estimator of entry
    (a, b) at lag t is the indicator product of markings at times 0 and t,
    rescaled by the reduced stationary square roots.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    r = len(mc.indices)
    col_of = {i: c for c, i in enumerate(mc.indices)}
    markings = np.array([col_of[s[0]] for s in mc.states])
    sampler = _JumpSampler(mc.rates, mc.stationary)
    t_max = float(t_grid.max()) * 1.0000001
    sums = np.zeros((t_grid.size, r, r))
    for rep in range(n_traj):
        rng = trajectory_rng(seed, rep)
        path = sampler.run("stationary", t_max, rng)
        mark0 = markings[path.states[0]]
        cuts = np.searchsorted(path.jump_times, t_grid, side="right") - 1
        marks_t = markings[path.states[cuts]]
        for ti, mt in enumerate(marks_t):
            sums[ti, mark0, mt] += 1.0
    h_hat = proj.sqrt_stationary_reduced
    scale = np.outer(h_hat, h_hat)
    mean = sums / n_traj
    # indicator products: the second moment equals the first; empty cells
    # get a one-count stderr floor so 3-sigma acceptance stays meaningful
    var = (mean - mean**2) * (n_traj / max(n_traj - 1, 1))
    stderr = np.maximum(np.sqrt(var / n_traj), 1.0 / n_traj) / scale[None, :, :]
    return ReducedDynamicsEstimate(t_grid=t_grid, mean=mean / scale[None, :, :],
                                   stderr=stderr, n_samples=n_traj, seed=seed)


@dataclass(frozen=True)
class CycleRatioEstimate:
    """Renewal-cycle count ratios against their closed-form targets.

    ``ratio`` estimates (# returns to k after visiting the selection) over
    (# returns to k after visiting state i); its target is
    ``pi_k (H[k,i] + H[i,k]) / (L[comp,comp]^-1)[k,k]``. The conditional
    ratio restricts the numerator to cycles whose first selected state was
    i and can never exceed one, pathwise.
    """

    ratio: Estimator
    conditional_ratio: Estimator
    target: float
    conditional_target: float
    nesting_verified: bool


def estimate_cycle_counts(chain: ReversibleChain, k_state: int, i_state: int,
                          indices, t_max: float, seed: int,
                          *, n_reps=32) -> CycleRatioEstimate:
    """Count renewal cycles of a long trajectory started at ``k_state``.

    Verifies pathwise that every return-after-i cycle endpoint is also a
    return-after-selection endpoint, and estimates both count ratios over
    ``n_reps`` independent replicates.
    """
    idx = check_index_set(indices, chain.n)
    sel = set(idx)
    if k_state in sel:
        raise ValueError("k_state must lie outside the selection")
    if i_state not in sel:
        raise ValueError("i_state must belong to the selection")
    sampler = _chain_sampler(chain)
    ratios = np.empty(n_reps)
    conditional = np.empty(n_reps)
    nesting = True
    for rep in range(n_reps):
        rng = trajectory_rng(seed, rep)
        path = sampler.run(k_state, t_max, rng)
        ends_sel, ends_i, ends_sel_first_i = [], [], []
        seen_sel = False      # hit selection since last k-return (selection scan)
        first_was_i = False
        seen_i = False        # hit i since last k-return (i scan)
        for pos in range(1, path.states.size):
            s = int(path.states[pos])
            if s in sel:
                if not seen_sel:
                    first_was_i = s == i_state
                seen_sel = True
                if s == i_state:
                    seen_i = True
            elif s == k_state:
                if seen_sel:
                    ends_sel.append(pos)
                    if first_was_i:
                        ends_sel_first_i.append(pos)
                    seen_sel = False
                    first_was_i = False
                if seen_i:
                    ends_i.append(pos)
                    seen_i = False
        if not set(ends_i) <= set(ends_sel):
            nesting = False
        if not set(ends_sel_first_i) <= set(ends_i):
            nesting = False
        if not ends_i:
            raise RuntimeError("no complete cycles observed; increase t_max")
        ratios[rep] = len(ends_sel) / len(ends_i)
        conditional[rep] = len(ends_sel_first_i) / len(ends_i)

    from .committor import committor_absorbing_solve, hitting_times
    from .spectral import symmetrize

    lap = symmetrize(chain)
    H = hitting_times(lap).matrix
    comp = np.setdiff1d(np.arange(chain.n), np.asarray(idx))
    comp_inv = np.linalg.inv(lap.matrix[np.ix_(comp, comp)])
    k_local = int(np.searchsorted(comp, k_state))
    target = (chain.stationary[k_state]
              * (H[k_state, i_state] + H[i_state, k_state])
              / comp_inv[k_local, k_local])
    tilde = committor_absorbing_solve(chain, idx)
    conditional_target = target * tilde[k_state, idx.index(i_state)]
    return CycleRatioEstimate(
        ratio=Estimator(float(ratios.mean()),
                        float(ratios.std(ddof=1) / np.sqrt(n_reps)),
                        n_reps, seed),
        conditional_ratio=Estimator(float(conditional.mean()),
                                    float(conditional.std(ddof=1) / np.sqrt(n_reps)),
                                    n_reps, seed),
        target=float(target),
        conditional_target=float(conditional_target),
        nesting_verified=nesting,
    )


def occupancy_fractions(chain: ReversibleChain, t_max: float, seed: int,
                        *, n_reps=16) -> Estimator:
    """Time-averaged state occupancy over long paths; converges to pi."""
    sampler = _chain_sampler(chain)
    fractions = np.zeros((n_reps, chain.n))
    for rep in range(n_reps):
        path = sampler.run("stationary", t_max, trajectory_rng(seed, rep))
        bounds = np.append(path.jump_times, t_max)
        np.add.at(fractions[rep], path.states, np.diff(bounds) / t_max)
    return Estimator(mean=fractions.mean(axis=0),
                     stderr=fractions.std(axis=0, ddof=1) / np.sqrt(n_reps),
                     n_samples=n_reps, seed=seed)


def marked_occupancy(mc: MarkedChain, t_max: float, seed: int,
                     *, n_reps=16, via_original=None) -> Estimator:
    """Time-averaged occupancy of the augmented states.

    With ``via_original = (chain, bundle)`` the marked process is sampled
    by running the original chain and updating the marking on selection
    visits, which must agree in distribution with sampling the augmented
    rate matrix directly.
    """
    m = mc.m
    state_of = {s: a for a, s in enumerate(mc.states)}
    fractions = np.zeros((n_reps, m))
    if via_original is None:
        sampler = _JumpSampler(mc.rates, mc.stationary)
        for rep in range(n_reps):
            path = sampler.run("stationary", t_max, trajectory_rng(seed, rep))
            bounds = np.append(path.jump_times, t_max)
            np.add.at(fractions[rep], path.states, np.diff(bounds) / t_max)
    else:
        chain, bundle = via_original
        sel = set(mc.indices)
        sampler = _chain_sampler(chain)
        for rep in range(n_reps):
            rng = trajectory_rng(seed, rep)
            pos0 = int(rng.choice(chain.n, p=chain.stationary))
            if pos0 in sel:
                mark = pos0
            else:
                row = np.clip(bundle.probabilities[pos0], 0.0, None)
                mark = int(rng.choice(mc.indices, p=row / row.sum()))
            path = sampler.run(pos0, t_max, rng)
            bounds = np.append(path.jump_times, t_max)
            durations = np.diff(bounds) / t_max
            for s, d in zip(path.states, durations):
                s = int(s)
                if s in sel:
                    mark = s
                fractions[rep, state_of[(mark, s)]] += d
    return Estimator(mean=fractions.mean(axis=0),
                     stderr=fractions.std(axis=0, ddof=1) / np.sqrt(n_reps),
                     n_samples=n_reps, seed=seed)
