"""Command-line entry point: simulate - analyze - fit - optimize - compare.

Structured scenario YAML in, CSV tables out; no plotting, the emitted files
are plot-ready.  Every run writes a manifest listing each produced file
with its SHA-256 checksum, and nothing is written outside the output
directory (``--out``, falling back to $BEAMFACTORY_OUT, then ./out).

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (coverage_probability, delta_stats, dominance_map, gamma_map,
                       local_average, write_cdf_csv, write_grid_csv)
from .beams import SsbId
from .layout import GridSpec, angles_to_tx_many
from .link import run_campaign, trace_from_csv, trace_path_gain_samples, trace_to_csv
from .propagation import (LOS_PRESETS, NLOS_PRESETS, DegenerateFitError, ModelPreset,
                          fit_slope_intercept, model_rmse, write_preset_table)
from .scenario import ScenarioConfig, ScenarioError, load_scenario
from .switchoff import (EXHAUSTIVE_GUARD, GaParams, build_problem, problem_to_csv,
                        solve_dbscan, solve_exhaustive, solve_ga)

USAGE_EXIT = 2
RUNTIME_EXIT = 1

ANALYSES = ("delta", "gamma", "coverage", "dominance", "local-average")


class _UsageError(ValueError):
    pass


class ReportBundle:
    """Collects emitted files and writes the checksum manifest."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.out_dir / name
        self.files.append(p)
        return p

    def write_manifest(self, command: str, inputs: dict) -> Path:
        entries = []
        for p in sorted(set(self.files)):
            digest = hashlib.sha256(p.read_bytes()).hexdigest()
            entries.append({"name": p.name, "sha256": digest, "bytes": p.stat().st_size})
        manifest = {
            "tool": "beamfactory",
            "version": __version__,
            "command": command,
            "inputs": inputs,
            "files": entries,
        }
        out = self.out_dir / "manifest.json"
        with open(out, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return out


def _out_dir(args) -> Path:
    if args.out:
        return Path(args.out)
    env = os.environ.get("BEAMFACTORY_OUT")
    return Path(env) if env else Path("out")


def _load_scenario(path: str, seed: int | None) -> ScenarioConfig:
    scenario = load_scenario(path)
    if seed is not None:
        raw = dict(scenario.raw)
        raw["seed"] = seed
        from .scenario import build_scenario
        scenario = build_scenario(raw)
    return scenario


def _parse_grid(text: str) -> tuple[float, float]:
    try:
        dx, dy = (float(v) for v in text.split(","))
    except ValueError:
        raise _UsageError(f"--grid expects 'dx,dy', got {text!r}") from None
    if dx <= 0 or dy <= 0:
        raise _UsageError("--grid cells must be positive")
    return dx, dy


def _parse_list(text: str, cast, flag: str) -> list:
    try:
        return [cast(v) for v in text.split(",") if v != ""]
    except ValueError:
        raise _UsageError(f"{flag} could not parse {text!r}") from None


def _simulate_trace(scenario: ScenarioConfig, seed: int):
    fld = scenario.shadowing_field(seed)
    return run_campaign(
        scenario.layout, scenario.beam_config, scenario.model_los, scenario.model_nlos,
        fld, scenario.budget, list(scenario.routes), seed=seed, timing=scenario.timing,
        noise_floor_dbm=scenario.noise_floor_dbm,
        fast_fading_sigma=scenario.fast_fading_sigma)


# ---------------------------------------------------------------------------
# subcommands

def cmd_simulate(args) -> int:
    scenario = _load_scenario(args.scenario, args.seed)
    seed = args.seed if args.seed is not None else scenario.seed
    bundle = ReportBundle(_out_dir(args))
    trace = _simulate_trace(scenario, seed)
    trace_to_csv(trace, bundle.path("trace.csv"))
    bundle.write_manifest("simulate", {"scenario": str(args.scenario), "seed": seed,
                                       "beam_config": scenario.beam_config.config})
    print(f"simulate: {trace.n_samples} bursts, configuration "
          f"{trace.config}, wrote {bundle.out_dir / 'trace.csv'}")
    return 0


def _grid_for(trace, cell: tuple[float, float]) -> GridSpec:
    return GridSpec.cover(trace.positions, cell[0], cell[1])


def cmd_analyze(args) -> int:
    requested = _parse_list(args.analyses, str, "--analyses") if args.analyses else []
    unknown = [a for a in requested if a not in ANALYSES]
    if unknown:
        raise _UsageError(f"unknown analyses {unknown}; available: {', '.join(ANALYSES)}")
    trace = trace_from_csv(args.trace)
    bundle = ReportBundle(_out_dir(args))
    cell = _parse_grid(args.grid) if args.grid else (1.0, 1.0)
    scenario = _load_scenario(args.scenario, None) if args.scenario else None

    for analysis in requested:
        if analysis == "delta":
            stats = delta_stats(trace, args.max_order)
            with open(bundle.path("delta_percentiles.csv"), "w", newline="") as fh:
                w = csv.writer(fh)
                orders = sorted(stats.deltas)
                w.writerow(["probability"] + [f"delta_{i}_db" for i in orders])
                for p, row in stats.percentile_table().items():
                    w.writerow([f"{p:.2f}"] + [f"{row[i]:.4f}" for i in orders])
            for i in sorted(stats.deltas):
                v, pr = stats.cdf(i)
                write_cdf_csv(bundle.path(f"delta_cdf_order{i}.csv"), v, pr, "delta_db")
        elif analysis == "gamma":
            other = trace_from_csv(args.against) if args.against else trace
            grid = GridSpec.cover(np.vstack([trace.positions, other.positions]),
                                  cell[0], cell[1])
            diff = gamma_map(local_average(trace, grid), local_average(other, grid))
            write_grid_csv(bundle.path("gamma_map.csv"), grid, diff.diff, "gamma_db")
        elif analysis == "coverage":
            if scenario is None:
                raise _UsageError("coverage analysis needs --scenario for TX geometry")
            _az, _tilt, d3 = angles_to_tx_many(scenario.layout, trace.positions)
            lo, hi = math.floor(d3.min()), math.ceil(d3.max())
            bins = [(float(b), float(b + 1)) for b in range(lo, hi)]
            cov = coverage_probability(trace, args.threshold, bins, scenario.layout)
            with open(bundle.path("coverage_bins.csv"), "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["d_lo_m", "d_hi_m", "count", "p_below_threshold"])
                for (blo, bhi), n, p in zip(cov.bins, cov.count, cov.probability):
                    w.writerow([f"{blo:.1f}", f"{bhi:.1f}", n,
                                "" if not np.isfinite(p) else f"{p:.6f}"])
            for k, (v, pr) in enumerate(cov.cdfs):
                if len(v):
                    write_cdf_csv(bundle.path(f"coverage_cdf_bin{k}.csv"), v, pr, "rsrp_dbm")
        elif analysis == "dominance":
            if not args.subset:
                raise _UsageError("dominance analysis needs --subset 'B-3-4,B-3-5,...'")
            subset = {SsbId.parse(s) for s in _parse_list(args.subset, str, "--subset")}
            grid = _grid_for(trace, (2.7, 2.4) if not args.grid else cell)
            dom = dominance_map(trace, subset, grid)
            write_grid_csv(bundle.path("dominance_map.csv"), grid, dom.fraction,
                           "dominant_fraction")
        elif analysis == "local-average":
            grid = _grid_for(trace, cell)
            stat = local_average(trace, grid)
            write_grid_csv(bundle.path("local_average.csv"), grid, stat.mean, "rsrp_dbm")

    bundle.write_manifest("analyze", {
        "trace": str(args.trace), "analyses": requested,
        "against": str(args.against) if args.against else None,
        "threshold_dbm": args.threshold,
    })
    print(f"analyze: wrote {len(bundle.files)} artifact(s) to {bundle.out_dir}")
    return 0


def _fit_block(samples: np.ndarray, presets, label: str, writer, echo) -> None:
    fitted = fit_slope_intercept(samples)
    writer.writerow([label, "fit", f"{fitted.pg_1m:.1f}", f"{fitted.n:.2f}",
                     f"{fitted.sigma:.1f}", ""])
    echo(f"  {label} fit: pg_1m={fitted.pg_1m:.1f} dB  n={fitted.n:.2f}  "
         f"sigma={fitted.sigma:.1f} dB")
    for preset in presets:
        rmse = model_rmse(preset.model, samples)
        writer.writerow([label, preset.preset_name, f"{preset.model.pg_1m:.1f}",
                         f"{preset.model.n:.2f}", f"{preset.model.sigma:.1f}",
                         f"{rmse:.1f}"])
        echo(f"  {label} {preset.preset_name}: rmse={rmse:.1f} dB")


def cmd_fit(args) -> int:
    bundle = ReportBundle(_out_dir(args))
    if args.samples:
        data = np.loadtxt(args.samples, delimiter=",", skiprows=1, ndmin=2)
        if data.shape[1] != 2:
            raise _UsageError(f"{args.samples}: expected two columns d_m,pg_db")
        blocks = [("all", data, tuple(ModelPreset))]
    else:
        if not args.scenario:
            raise _UsageError("fit from a trace needs --scenario for budget and geometry")
        scenario = _load_scenario(args.scenario, None)
        trace = trace_from_csv(args.trace)
        samples = trace_path_gain_samples(trace, scenario.beam_config, scenario.layout,
                                          scenario.budget)
        if args.split:
            from .layout import classify_visibility_many
            is_los = classify_visibility_many(scenario.layout, trace.positions)
            best, col = trace.strongest()
            ok = col >= 0
            los_rows = is_los[ok]
            blocks = [("LoS", samples[los_rows], LOS_PRESETS),
                      ("NLoS", samples[~los_rows], NLOS_PRESETS)]
        else:
            blocks = [("all", samples, tuple(ModelPreset))]

    with open(bundle.path("fit_results.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["block", "model", "pg_1m_db", "n", "sigma_db", "rmse_db"])
        for label, data, presets in blocks:
            if len(data) < 3:
                raise DegenerateFitError(f"block {label!r} has fewer than 3 samples")
            print(f"fit block {label} ({len(data)} samples):")
            _fit_block(np.asarray(data), presets, label, w, print)
    write_preset_table(bundle.path("preset_table.csv"))
    bundle.write_manifest("fit", {
        "trace": str(args.trace) if args.trace else None,
        "samples": str(args.samples) if args.samples else None,
        "split": bool(args.split),
    })
    return 0


def cmd_optimize(args) -> int:
    trace = trace_from_csv(args.trace)
    bundle = ReportBundle(_out_dir(args))
    cell = _parse_grid(args.grid) if args.grid else (2.7, 2.4)
    xis = _parse_list(args.xi, int, "--xi") or [3, 5, 10]
    solvers = _parse_list(args.solver, str, "--solver") or ["ga", "dbscan"]
    seeds = _parse_list(args.seeds, int, "--seeds") or [0]
    unknown = [s for s in solvers if s not in ("ga", "dbscan", "exhaustive")]
    if unknown:
        raise _UsageError(f"unknown solvers {unknown}; available: ga, dbscan, exhaustive")
    grid = _grid_for(trace, cell)
    rows = []
    for xi in xis:
        problem = build_problem(trace, grid, xi)
        if args.export_problem:
            problem_to_csv(problem, bundle.path(f"problem_xi{xi}.csv"))
        for solver in solvers:
            for seed in seeds:
                start = time.perf_counter()
                try:
                    if solver == "ga":
                        res = solve_ga(problem, GaParams(), seed=seed)
                    elif solver == "dbscan":
                        res = solve_dbscan(problem, eps=args.eps, min_pts=args.min_pts)
                    else:
                        res = solve_exhaustive(problem)
                except ValueError as exc:
                    rows.append([xi, solver, seed, "", "", f"{0.0:.3f}", f"error: {exc}"])
                    continue
                elapsed = time.perf_counter() - start
                mask_txt = "".join(str(b) for b in res.mask)
                rows.append([xi, solver, seed, f"{res.objective:.6f}",
                             res.evaluations, f"{elapsed:.3f}", mask_txt])
                if solver in ("dbscan", "exhaustive"):
                    break  # deterministic solvers need one run per xi
    with open(bundle.path("optimize_results.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["xi", "solver", "seed", "objective_db", "evaluations",
                    "wall_time_s", "mask"])
        w.writerows(rows)
    bundle.write_manifest("optimize", {
        "trace": str(args.trace), "xi": xis, "solvers": solvers, "seeds": seeds,
        "grid": list(cell), "guard": EXHAUSTIVE_GUARD,
    })
    print(f"optimize: {len(rows)} solver runs written to {bundle.out_dir}")
    return 0


def cmd_compare(args) -> int:
    scenario = _load_scenario(args.scenario, args.seed)
    seed = args.seed if args.seed is not None else scenario.seed
    bundle = ReportBundle(_out_dir(args))
    cell = _parse_grid(args.grid) if args.grid else (1.0, 1.0)
    traces = {}
    for which in ("A", "B"):
        variant = scenario.with_beam_config(which)
        traces[which] = _simulate_trace(variant, seed)  # same seed: shared shadowing
        trace_to_csv(traces[which], bundle.path(f"trace_{which}.csv"))
    grid = GridSpec.cover(np.vstack([traces["A"].positions, traces["B"].positions]),
                          cell[0], cell[1])
    diff = gamma_map(local_average(traces["A"], grid), local_average(traces["B"], grid))
    write_grid_csv(bundle.path("gamma_map.csv"), grid, diff.diff, "gamma_db")
    bundle.write_manifest("compare", {"scenario": str(args.scenario), "seed": seed})
    finite = diff.diff[np.isfinite(diff.diff)]
    print(f"compare: gamma map over {finite.size} joint cells "
          f"(mean {finite.mean():+.2f} dB, A minus B)")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beamfactory",
        description="FR2 indoor-factory coverage and beam-management toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output directory (fallback: $BEAMFACTORY_OUT, ./out)")

    p = sub.add_parser("simulate", help="synthesize a measurement campaign")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="run analyses over a trace CSV")
    p.add_argument("--trace", required=True)
    p.add_argument("--analyses", default="",
                   help=f"comma list of: {', '.join(ANALYSES)}")
    p.add_argument("--against", help="second trace for the gamma comparison")
    p.add_argument("--scenario", help="scenario file (needed for coverage)")
    p.add_argument("--threshold", type=float, default=-100.0, help="RSRP threshold, dBm")
    p.add_argument("--grid", help="cell size dx,dy in meters")
    p.add_argument("--subset", help="SSB subset for dominance, e.g. 'B-3-4,B-3-5'")
    p.add_argument("--max-order", type=int, default=4, dest="max_order")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fit", help="fit a slope-intercept model and score presets")
    p.add_argument("--trace", help="trace CSV (requires --scenario)")
    p.add_argument("--samples", help="two-column CSV d_m,pg_db")
    p.add_argument("--scenario")
    p.add_argument("--split", action="store_true", help="fit LoS and NLoS separately")
    common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("optimize", help="solve the beam switch-off problem")
    p.add_argument("--trace", required=True)
    p.add_argument("--xi", default="", help="comma list of cardinality bounds")
    p.add_argument("--solver", default="", help="comma list: ga, dbscan, exhaustive")
    p.add_argument("--seeds", default="", help="comma list of GA seeds")
    p.add_argument("--grid", help="cell size dx,dy in meters")
    p.add_argument("--eps", type=float, default=3.0, help="DBSCAN radius")
    p.add_argument("--min-pts", type=int, default=5, dest="min_pts")
    p.add_argument("--export-problem", action="store_true", dest="export_problem",
                   help="also write the per-cell per-beam table per xi")
    common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("compare", help="run configurations A and B, emit the gamma map")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--grid", help="cell size dx,dy in meters")
    common(p)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (_UsageError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (ValueError, KeyError, OSError, DegenerateFitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
