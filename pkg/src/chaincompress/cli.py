"""Command-line surface: build, select, compress, verify, simulate, report.

Runs are driven by a JSON config file with flag overrides (flags win); every
emitted report embeds the hash of the effective config and the library
version so figures can be regenerated from their inputs.
"""

import argparse
import dataclasses
import hashlib
import json
import os
import sys

from . import _threads  # noqa: F401  (must run before numpy binds its BLAS)

import numpy as np

from . import __version__
from . import io as cio
from .chain import build_chain, synthetic_webgraph, webgraph_chain
from .committor import committor_closed_form, hitting_times
from .compress import default_integration_gamma, error_curves, nystrom_errors, obliqueness
from .errors import ChainCompressError
from .induced import induced_chain
from .marked import build_marked, projections
from .select import greedy_select
from .simulate import (
    estimate_committor,
    estimate_cycle_counts,
    estimate_hitting_time,
    estimate_reduced_dynamics,
)
from .spectral import symmetrize, time_grid
from .verify import run_suites

_SUITES = ("chain", "committor", "induced", "marked", "bounds",
           "obliqueness", "integral")


@dataclasses.dataclass
class RunConfig:
    """Validated run parameters; unknown keys in the config file are rejected."""

    input: str = ""
    format: str = "matrix-market"        # matrix-market | edge-list | synthetic
    mode: str = "webgraph"               # webgraph | rates
    n_synthetic: int = 2000
    k: int = 5
    t_points: int = 64
    t_lo: float = 1e-2
    t_hi: float = 1e3
    gamma: float = 0.0                   # 0 -> default 1 / (10 Tr K)
    seed: int = 0
    n_traj: int = 10_000
    output_dir: str = "out"
    suites: tuple = _SUITES

    def validate(self):
        if self.format not in ("matrix-market", "edge-list", "synthetic"):
            raise ValueError(f"unknown format {self.format!r}")
        if self.mode not in ("webgraph", "rates"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.t_points < 2 or self.t_lo <= 0 or self.t_hi <= self.t_lo:
            raise ValueError("time grid must be log-spaced with t_hi > t_lo > 0")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.n_traj < 100:
            raise ValueError("n_traj must be >= 100")
        unknown = set(self.suites) - set(_SUITES)
        if unknown:
            raise ValueError(f"unknown suites {sorted(unknown)}")
        return self

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["suites"] = list(self.suites)
        return out

    def hash(self) -> str:
        canonical = json.dumps(self.as_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def load_config(path: str | None, overrides: dict) -> RunConfig:
    baseline = {}
    if path:
        with open(path) as handle:
            baseline = json.load(handle)
        allowed = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = set(baseline) - allowed
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
    baseline.update({k: v for k, v in overrides.items() if v is not None})
    if "suites" in baseline:
        baseline["suites"] = tuple(baseline["suites"])
    return RunConfig(**baseline).validate()


def _load_chain(config: RunConfig):
    if config.format == "synthetic":
        adjacency = synthetic_webgraph(config.n_synthetic, seed=config.seed)
        return webgraph_chain(adjacency)
    if not config.input:
        raise ValueError("config.input is required unless format is synthetic")
    if config.format == "matrix-market":
        matrix = cio.load_matrix_market(config.input,
                                        require_symmetric=config.mode == "webgraph")
    else:
        matrix = cio.load_edge_list(config.input,
                                    undirected=config.mode == "webgraph")
    if config.mode == "webgraph":
        return webgraph_chain(matrix)
    return build_chain(matrix)


def _stamp(config: RunConfig, payload: dict) -> dict:
    return {"config_hash": config.hash(), "version": __version__,
            "config": config.as_dict(), **payload}


def _write_json(config: RunConfig, name: str, payload: dict) -> str:
    path = os.path.join(config.output_dir, name)
    cio.atomic_write_text(path, json.dumps(_stamp(config, payload), indent=2))
    return path


def cmd_build(config: RunConfig) -> int:
    chain = _load_chain(config)
    lap = symmetrize(chain)
    key = cio.content_hash(chain.rates)
    cache_dir = os.path.join(config.output_dir, "cache")
    cio.save_spectral_cache(cache_dir, key, lap)
    cio.save_matrix_market(os.path.join(config.output_dir, "rates.mtx"),
                           chain.rates, comment="validated rate matrix")
    _write_json(config, "build.json", {
        "n": chain.n,
        "nnz": int(chain.rates.nnz),
        "content_hash": key,
        "trace_pseudoinverse": lap.trace_pseudoinverse,
    })
    print(f"build: n={chain.n} nnz={chain.rates.nnz} cached key={key}")
    return 0


def cmd_select(config: RunConfig) -> int:
    chain = _load_chain(config)
    lap = symmetrize(chain)
    trace = greedy_select(lap, config.k)
    cio.export_selection_csv(os.path.join(config.output_dir, "selection.csv"), trace)
    curves = {"k": [], "eps_spectral": [], "eps_nuclear": [],
              "psi_spectral": [], "psi_nuclear": []}
    probe = sorted({1, 2, 5, 10, 25, 50, 100, config.k} & set(range(1, config.k + 1)))
    for k in probe:
        subset = trace.indices[:k]
        eps = nystrom_errors(lap, subset)
        psi = obliqueness(lap, subset)
        curves["k"].append(k)
        curves["eps_spectral"].append(eps.spectral)
        curves["eps_nuclear"].append(eps.nuclear)
        curves["psi_spectral"].append(psi.spectral)
        curves["psi_nuclear"].append(psi.nuclear)
    lower = trace.spectral_lower_bound
    ok = bool(np.all(trace.eps_nuclear >= lower - 1e-9 * np.abs(trace.eps_nuclear)))
    _write_json(config, "selection.json", {
        "selection": cio.selection_to_dict(trace),
        "error_curves": curves,
        "lower_bound_respected": ok,
    })
    print(f"select: k={config.k} eps_nuclear={trace.eps_nuclear[-1]:.6g} "
          f"lower_bound_respected={ok}")
    return 0 if ok else 1


def cmd_compress(config: RunConfig) -> int:
    chain = _load_chain(config)
    lap = symmetrize(chain)
    trace = greedy_select(lap, config.k)
    indices = sorted(trace.indices)
    bundle = committor_closed_form(lap, indices)
    ic = induced_chain(chain, bundle)
    grid = time_grid(lap, points=config.t_points, lo=config.t_lo, hi=config.t_hi)
    report = error_curves(lap, bundle, ic, grid, enforce=False)
    cio.export_bound_report_csv(os.path.join(config.output_dir, "bounds.csv"), report)
    cio.export_induced_chain(os.path.join(config.output_dir, "induced.mtx"),
                             os.path.join(config.output_dir, "induced_stationary.csv"),
                             ic)
    cio.export_indexed_matrix_csv(os.path.join(config.output_dir, "committor.csv"),
                                  bundle.probabilities, bundle.indices)
    cio.export_indexed_matrix_csv(os.path.join(config.output_dir, "hitting.csv"),
                                  hitting_times(lap).matrix, range(chain.n))
    # reduced-subspace comparison: reduced propagators vs projected full ones
    basis_rows = _reduced_subspace_rows(chain, lap, bundle, ic, grid)
    cio.atomic_write_text(os.path.join(config.output_dir, "reduced_subspace.csv"),
                          basis_rows)
    _write_json(config, "compress.json", cio.bound_report_summary(report))
    print(f"compress: |I|={len(indices)} passed={report.passed} "
          f"tightness={max(v for v in report.tightness().values() if np.isfinite(v)):.3f}")
    return 0 if report.passed else 1


def _reduced_subspace_rows(chain, lap, bundle, ic, grid) -> str:
    import csv as _csv
    import io as _io

    from .compress import orthonormal_committor_basis
    from .marked import marked_propagator
    from .spectral import propagator

    V = orthonormal_committor_basis(bundle)
    reduced = V.T @ lap.matrix @ V
    vals, vecs = np.linalg.eigh(0.5 * (reduced + reduced.T))
    mc = build_marked(chain, bundle)
    proj = projections(mc, bundle)
    W = proj.marking
    out = _io.StringIO()
    writer = _csv.writer(out)
    writer.writerow(["t", "entry", "proj_reduced", "proj_reference",
                     "sp_reduced", "sp_reference"])
    row = 0
    for t in grid:
        core = (vecs * np.exp(-vals * t)) @ vecs.T
        reference = V.T @ propagator(lap, t) @ V
        sp_core = ic.propagator(t)
        sp_reference = W.T @ marked_propagator(mc, t) @ W
        for col in range(core.shape[1]):
            writer.writerow([repr(float(t)), f"{row},{col}",
                             repr(float(core[row, col])),
                             repr(float(reference[row, col])),
                             repr(float(sp_core[row, col])),
                             repr(float(sp_reference[row, col]))])
    return out.getvalue()


def cmd_verify(config: RunConfig) -> int:
    chain = _load_chain(config)
    lap = symmetrize(chain)
    trace = greedy_select(lap, min(config.k, chain.n - 1))
    indices = sorted(trace.indices)
    results = run_suites(chain, indices, suites=config.suites, seed=config.seed)
    failures = [r.as_dict() for r in results if not r.passed]
    _write_json(config, "verify.json", {
        "indices": indices,
        "checks": [r.as_dict() for r in results],
        "failures": failures,
    })
    for r in results:
        status = "ok" if r.passed else "FAIL"
        print(f"verify[{r.suite}] {r.name}: residual={r.residual:.3e} "
              f"tol={r.tolerance:.1e} {status}")
    return 0 if not failures else 1


def cmd_simulate(config: RunConfig) -> int:
    chain = _load_chain(config)
    lap = symmetrize(chain)
    trace = greedy_select(lap, min(config.k, chain.n - 1))
    indices = sorted(trace.indices)
    bundle = committor_closed_form(lap, indices)
    failures = []

    committor_mc = estimate_committor(chain, indices, config.n_traj, config.seed)
    dev = np.abs(committor_mc.mean - bundle.probabilities)
    z_ok = bool(np.all(dev <= 3.0 * committor_mc.stderr + 1e-12))
    if not z_ok:
        failures.append("committor")

    H = hitting_times(lap).matrix
    start, target = int(np.argmax(chain.stationary)), indices[0]
    if start == target:
        start = (target + 1) % chain.n
    hit = estimate_hitting_time(chain, start, target, config.n_traj, config.seed + 1)
    if not hit.within(H[start, target]):
        failures.append("hitting_time")

    comp = [s for s in range(chain.n) if s not in set(indices)]
    cycles = None
    if comp:
        cycles = estimate_cycle_counts(chain, comp[0], indices[0], indices,
                                       t_max=200.0 * lap.trace_pseudoinverse / chain.n,
                                       seed=config.seed + 2)
        if not (cycles.nesting_verified and cycles.ratio.within(cycles.target)):
            failures.append("cycle_ratio")

    mc = build_marked(chain, bundle)
    proj = projections(mc, bundle)
    grid = time_grid(lap, points=5, lo=1e-1, hi=1e1)
    reduced = estimate_reduced_dynamics(mc, proj, grid, config.n_traj, config.seed + 3)
    from .marked import marked_propagator

    worst = 0.0
    for ti, t in enumerate(grid):
        dense = proj.marking.T @ marked_propagator(mc, t) @ proj.marking
        gap = np.abs(reduced.mean[ti] - dense)
        bad = gap > 3.0 * reduced.stderr[ti] + 1e-12
        worst = max(worst, float((gap / np.maximum(reduced.stderr[ti], 1e-12)).max()))
        if bad.any():
            failures.append(f"reduced_dynamics_t{ti}")
    payload = {
        "failures": failures,
        "committor_max_z": float((dev / np.maximum(committor_mc.stderr, 1e-12)).max()),
        "hitting_mean": hit.mean,
        "hitting_target": float(H[start, target]),
        "reduced_dynamics_max_z": worst,
    }
    if cycles is not None:
        payload["cycle_ratio"] = cycles.ratio.mean
        payload["cycle_target"] = cycles.target
    _write_json(config, "simulate.json", payload)
    print(f"simulate: failures={failures or 'none'}")
    return 0 if not failures else 1


def cmd_report(config: RunConfig) -> int:
    merged = {}
    for name in ("build", "selection", "compress", "verify", "simulate"):
        path = os.path.join(config.output_dir, f"{name}.json")
        if os.path.exists(path):
            with open(path) as handle:
                merged[name] = json.load(handle)
    ok = all(
        not part.get("failures") and part.get("passed", True)
        for part in merged.values()
    )
    _write_json(config, "report.json", {"parts": merged, "passed": ok})
    print(f"report: merged {sorted(merged)} passed={ok}")
    return 0 if ok else 1


_COMMANDS = {
    "build": cmd_build,
    "select": cmd_select,
    "compress": cmd_compress,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "report": cmd_report,
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chaincompress",
        description="Compress reversible Markov chains onto selected states "
                    "and verify the accompanying error bounds.",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--input", help="input matrix path")
    parser.add_argument("--format", choices=["matrix-market", "edge-list", "synthetic"])
    parser.add_argument("--mode", choices=["webgraph", "rates"])
    parser.add_argument("--n-synthetic", type=int, dest="n_synthetic")
    parser.add_argument("--k", type=int)
    parser.add_argument("--t-points", type=int, dest="t_points")
    parser.add_argument("--t-lo", type=float, dest="t_lo")
    parser.add_argument("--t-hi", type=float, dest="t_hi")
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--n-traj", type=int, dest="n_traj")
    parser.add_argument("--output-dir", dest="output_dir")
    parser.add_argument("--suites", nargs="+", choices=_SUITES)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    overrides = {
        key: getattr(args, key)
        for key in ("input", "format", "mode", "n_synthetic", "k", "t_points",
                    "t_lo", "t_hi", "gamma", "seed", "n_traj", "output_dir")
    }
    if args.suites:
        overrides["suites"] = tuple(args.suites)
    try:
        config = load_config(args.config, overrides)
        os.makedirs(config.output_dir, exist_ok=True)
        return _COMMANDS[args.command](config)
    except (ChainCompressError, ValueError, FileNotFoundError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
