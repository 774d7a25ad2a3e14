"""Batch command-line front end.

Subcommands: validate, simulate, baseline, calibrate, crossval, effects,
sweep.  Every writing command records a manifest (input hashes, config echo,
seed, timing) next to its outputs.  Exit codes: 0 success, 1 input error,
2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, io
from .calibration import CVPlan, cross_validate, fit_alpha, fit_beta, per_year_matrices
from .effects import DEFAULT_THRESHOLDS, compute_effects, depth_sweep, threshold_label
from .errors import InputError
from .joint import JointRunConfig, run_baseline, run_joint
from .migration import (KIND_NEURAL, KIND_RADIATION, ModelSpec, default_climate_spec,
                        default_standard_spec, train_neural)
from .mlp import NeuralConfig
from .slr import FloodScenario
from .zones import ZoneGraph

log = logging.getLogger(__name__)

# run metadata notes recording modeling choices that inputs cannot express
METADATA_NOTES = {
    "intervening_opportunities": "computed over post-split projected populations of the "
                                 "destination universe at simulation time",
    "flooded_part_geometry": "flooded parts reuse the county centroid; opportunity sums "
                             "for their flows run over unflooded-part populations",
}


class _Parser(argparse.ArgumentParser):
    """Usage problems are input errors: exit 1, not argparse's default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _add_common(parser: argparse.ArgumentParser, out_required: bool = True) -> None:
    parser.add_argument("--seed", type=int, default=42,
                        help="seed for all randomness (neural init, fold shuffling)")
    parser.add_argument("--threads", type=int, default=1,
                        help="data-parallel width; outputs are identical for any value")
    if out_required:
        parser.add_argument("--out", required=True, help="output directory")


def _parse_model(value: str | None, default: ModelSpec) -> ModelSpec:
    """A model spec JSON path, or shorthand 'kind' / 'kind:beta'."""
    if value is None:
        return default
    path = Path(value)
    if path.is_file():
        return io.read_model_spec(path)
    kind, _, beta = value.partition(":")
    try:
        return ModelSpec(kind=kind, beta=float(beta) if beta else None)
    except ValueError as exc:
        raise InputError(f"bad model argument {value!r}: {exc}") from exc


def _parse_thresholds(value: str) -> tuple[float, ...]:
    try:
        percents = [float(v) for v in value.split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"bad threshold list {value!r}") from exc
    if not percents or any(p <= 0 for p in percents):
        raise InputError(f"thresholds must be positive percentages, got {value!r}")
    return tuple(p / 100.0 for p in percents)


def _model_echo(spec: ModelSpec) -> dict:
    return {"kind": spec.kind, "beta": spec.beta,
            "neural": spec.weights is not None}


def _manifest(command: str, args, inputs: dict, config: dict, elapsed: float) -> dict:
    return {
        "engine": {"name": "slrmig", "version": __version__},
        "command": command,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "seed": getattr(args, "seed", None),
        "threads": getattr(args, "threads", 1),
        "inputs": {name: {"path": str(p), "sha256": io.sha256_of_file(p)}
                   for name, p in inputs.items()},
        "config": config,
        "timing_seconds": elapsed,
        "notes": METADATA_NOTES,
    }


def _load_world(args) -> tuple[ZoneGraph, list]:
    graph = io.read_zones_csv(args.zones)
    block_groups = io.read_block_groups_csv(args.blockgroups, graph)
    return graph, block_groups


def _run_config(args, scenario: FloodScenario) -> JointRunConfig:
    return JointRunConfig(
        scenario=scenario, year=args.year,
        climate_model=_parse_model(getattr(args, "climate_model", None), default_climate_spec()),
        standard_model=_parse_model(getattr(args, "standard_model", None),
                                    default_standard_spec()),
        alpha_standard=args.alpha)


def _config_echo(cfg: JointRunConfig, depth_ft: int) -> dict:
    return {
        "scenario_name": cfg.scenario.name,
        "scenario_schedule": {str(y): d for y, d in sorted(cfg.scenario.depth_schedule.items())},
        "year": cfg.year,
        "depth_ft": depth_ft,
        "alpha_standard": cfg.alpha_standard,
        "climate_model": _model_echo(cfg.climate_model),
        "standard_model": _model_echo(cfg.standard_model),
    }


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args) -> int:
    report = io.validate_inputs(args.zones, args.blockgroups, args.flows, args.scenario)
    for issue in report.issues:
        print(issue)
    print(f"{len(report.errors)} error(s), {len(report.warnings)} warning(s)")
    return 0 if report.ok else 1


def _simulate(args, scenario: FloodScenario, command: str) -> int:
    graph, block_groups = _load_world(args)
    cfg = _run_config(args, scenario)
    t0 = time.perf_counter()
    run = run_joint(graph, block_groups, cfg, threads=args.threads)
    elapsed = time.perf_counter() - t0
    inputs = {"zones": args.zones, "blockgroups": args.blockgroups}
    manifest = _manifest(command, args, inputs, _config_echo(cfg, run.split.depth_ft), elapsed)
    io.write_run_dir(args.out, run, manifest)
    print(f"scenario {cfg.scenario.name!r} at {cfg.year}: depth {run.split.depth_ft} ft, "
          f"{run.split.total_affected:.1f} people displaced, "
          f"{run.total.total():.1f} total migrants ({elapsed:.2f}s)")
    print(f"wrote {Path(args.out) / io.RUN_TOTAL}")
    return 0


def cmd_simulate(args) -> int:
    return _simulate(args, io.read_scenario(args.scenario), "simulate")


def cmd_baseline(args) -> int:
    return _simulate(args, FloodScenario.none(), "baseline")


def cmd_calibrate(args) -> int:
    graph = io.read_zones_csv(args.zones)
    flows = io.read_flows_csv(args.flows, graph)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    per_year = []
    if args.kind == KIND_NEURAL:
        weights = _calibrate_neural(flows, graph, args)
        spec = ModelSpec(kind=KIND_NEURAL, weights=weights)
        io.write_model_spec(spec, out / "model.json")
        alphas = [fit_alpha(m, graph) for m in per_year_matrices(flows, graph).values()]
        betas = []
    else:
        alphas, betas = [], []
        for year, matrix in per_year_matrices(flows, graph).items():
            alpha = fit_alpha(matrix, graph)
            beta = None
            if args.kind != KIND_RADIATION:
                beta = fit_beta(matrix, graph, args.kind)
            per_year.append({"year": year, "beta": beta, "alpha": alpha})
            alphas.append(alpha)
            if beta is not None:
                betas.append(beta)
        spec = ModelSpec(kind=args.kind,
                         beta=float(np.mean(betas)) if betas else None)
        io.write_model_spec(spec, out / "model.json")
    elapsed = time.perf_counter() - t0

    params = {
        "schema_version": 1,
        "kind": args.kind,
        "per_year": per_year,
        "beta": {"mean": float(np.mean(betas)), "std": float(np.std(betas, ddof=1)) if len(betas) > 1 else 0.0}
                if betas else None,
        "alpha": {"mean": float(np.mean(alphas)), "std": float(np.std(alphas, ddof=1)) if len(alphas) > 1 else 0.0},
    }
    (out / "params.json").write_text(json.dumps(params, indent=2) + "\n")
    manifest = _manifest("calibrate", args, {"zones": args.zones, "flows": args.flows},
                         {"kind": args.kind}, elapsed)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    beta_text = f"{params['beta']['mean']:.4f}" if params["beta"] else "n/a (parameter-free model)"
    print(f"kind = {args.kind}")
    print(f"beta = {beta_text}")
    print(f"alpha = {params['alpha']['mean']:.4f}")
    print(f"wrote {out / 'params.json'}")
    return 0


def _calibrate_neural(flows, graph, args):
    """One network over all years; proportion targets are per (origin, year)."""
    features, values, labels = [], [], []
    for year, matrix in per_year_matrices(flows, graph).items():
        outflows = matrix.row_sums()
        for i, origin_id in enumerate(matrix.origin_ids):
            if outflows[i] <= 0.0:
                continue
            zone = graph.zones[graph.index_of(origin_id)]
            d, s, self_pos = graph.origin_features(zone)
            eligible = np.ones(len(graph), dtype=bool)
            if self_pos is not None:
                eligible[self_pos] = False
            observed = np.asarray(matrix.sparse()[i, :].todense()).ravel()
            features.append(np.column_stack([
                np.full(int(eligible.sum()), zone.population),
                graph.populations[eligible], d[eligible], s[eligible]]))
            values.append(observed[eligible])
            labels.append(np.full(int(eligible.sum()), f"{year}:{origin_id}", dtype=object))
    config = NeuralConfig(epochs=args.epochs, seed=args.seed)
    return train_neural(np.vstack(features), np.concatenate(values),
                        np.concatenate(labels), config)


def cmd_crossval(args) -> int:
    graph = io.read_zones_csv(args.zones)
    flows = io.read_flows_csv(args.flows, graph)
    plan = CVPlan(mode=args.mode, k=args.folds, seed=args.seed)
    t0 = time.perf_counter()
    result = cross_validate(flows, graph, args.kind, plan,
                            neural_config=NeuralConfig(epochs=args.epochs, seed=args.seed)
                            if args.kind == KIND_NEURAL else None,
                            threads=args.threads)
    elapsed = time.perf_counter() - t0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_cv_report_json(result, out / "cv_report.json")
    manifest = _manifest("crossval", args, {"zones": args.zones, "flows": args.flows},
                         {"kind": args.kind, "mode": plan.mode, "k": plan.k}, elapsed)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    agg = result.aggregate_by_sample
    beta_text = ("n/a" if args.kind in (KIND_RADIATION, KIND_NEURAL)
                 else f"{agg['beta']['mean']:.4f} ({agg['beta']['std']:.4f})")
    print(f"kind = {args.kind}, mode = {plan.mode}, folds = {len(result.folds)}, "
          f"samples = {len(result.samples)}")
    print(f"beta = {beta_text}")
    print(f"alpha = {agg['alpha']['mean']:.4f} ({agg['alpha']['std']:.4f})")
    for metric in ("cpc", "cpc_d", "mae", "r2", "incoming_mae", "incoming_r2"):
        print(f"{metric} = {agg[metric]['mean']:.4f} ({agg[metric]['std']:.4f})")
    print(f"wrote {out / 'cv_report.json'}")
    return 0


def cmd_effects(args) -> int:
    scenario_run, scenario_manifest = io.read_run_dir(args.run)
    baseline_run, _ = io.read_run_dir(args.baseline)
    thresholds = _parse_thresholds(args.thresholds)
    try:
        report = compute_effects(scenario_run, baseline_run, thresholds,
                                 include_directly_affected=args.include_direct)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_effects_csv(report, out / "effects.csv")
    outputs = ["effects.csv"]
    if args.geojson:
        boundaries = json.loads(Path(args.geojson).read_text())
        joined, matched = io.export_effects_geojson(report, boundaries, args.geojson_id)
        (out / "effects.geojson").write_text(json.dumps(joined))
        outputs.append("effects.geojson")
        print(f"geojson: {matched} feature(s) matched")
    if not args.no_figures:
        from . import figures
        figures.plot_effects_summary(report, out / "effects_top_receivers.png")
        outputs.append("effects_top_receivers.png")
    manifest = _manifest("effects", args,
                         {"run_manifest": Path(args.run) / io.RUN_MANIFEST,
                          "baseline_manifest": Path(args.baseline) / io.RUN_MANIFEST},
                         {"thresholds_percent": [threshold_label(d) for d in thresholds],
                          "include_directly_affected": args.include_direct,
                          "scenario": scenario_manifest.get("config", {})},
                         0.0)
    manifest["outputs"] = {name: io.sha256_of_file(out / name) for name in outputs}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    print(f"direct: {report.direct_total:.1f} people")
    for d in thresholds:
        print(f"indirect at {threshold_label(d)}%: {report.flagged_population[d]:.1f} people "
              f"in {len(report.flagged_ids(d))} counties")
    print(f"wrote {out / 'effects.csv'}")
    return 0


def cmd_sweep(args) -> int:
    graph, block_groups = _load_world(args)
    cfg = _run_config(args, FloodScenario.none())
    depths = tuple(int(v) for v in args.depths.split(","))
    thresholds = _parse_thresholds(args.thresholds)
    t0 = time.perf_counter()
    rows = depth_sweep(graph, block_groups, cfg, depths=depths, thresholds=thresholds,
                       include_directly_affected=args.include_direct, threads=args.threads)
    elapsed = time.perf_counter() - t0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_sweep_csv(rows, out / "sweep.csv")
    outputs = ["sweep.csv"]
    if not args.no_figures:
        from . import figures
        figures.plot_depth_sweep(rows, out / "sweep_totals.png")
        outputs.append("sweep_totals.png")
    manifest = _manifest("sweep", args, {"zones": args.zones, "blockgroups": args.blockgroups},
                         {**_config_echo(cfg, 0), "depths_ft": list(depths),
                          "thresholds_percent": [threshold_label(d) for d in thresholds]},
                         elapsed)
    manifest["outputs"] = {name: io.sha256_of_file(out / name) for name in outputs}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    for row in rows:
        worst = row.indirect_people[max(thresholds)] if thresholds else 0.0
        print(f"{row.depth_ft} ft: direct {row.direct_people:.1f}, "
              f"indirect@{threshold_label(max(thresholds))}% {worst:.1f}")
    print(f"wrote {out / 'sweep.csv'}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="slrmig",
                     description="Coupled sea-level-rise and human-migration simulator")
    parser.add_argument("--version", action="version", version=f"slrmig {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check input files and exit")
    p.add_argument("--zones", required=True)
    p.add_argument("--blockgroups")
    p.add_argument("--flows")
    p.add_argument("--scenario")
    p.set_defaults(func=cmd_validate)

    def add_world_args(p):
        p.add_argument("--zones", required=True, help="county zone CSV")
        p.add_argument("--blockgroups", required=True, help="block-group CSV")
        p.add_argument("--year", type=int, required=True, help="simulation year")
        p.add_argument("--standard-model", help="model spec JSON or kind[:beta]")
        p.add_argument("--alpha", type=float, default=0.03,
                       help="standard-migration production fraction")

    p = sub.add_parser("simulate", help="run one scenario snapshot")
    add_world_args(p)
    p.add_argument("--scenario", required=True, help="none|medium|high or scenario JSON")
    p.add_argument("--climate-model", help="model spec JSON or kind[:beta]")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("baseline", help="run the no-SLR reference snapshot")
    add_world_args(p)
    _add_common(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("calibrate", help="fit model parameters to flow history")
    p.add_argument("--zones", required=True)
    p.add_argument("--flows", required=True, help="flow history CSV")
    p.add_argument("--kind", required=True,
                   choices=["radiation", "ext_radiation", "gravity_exp", "gravity_pow", "neural"])
    p.add_argument("--epochs", type=int, default=500, help="neural training epochs")
    _add_common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("crossval", help="origin-split cross-validation")
    p.add_argument("--zones", required=True)
    p.add_argument("--flows", required=True)
    p.add_argument("--kind", required=True,
                   choices=["radiation", "ext_radiation", "gravity_exp", "gravity_pow", "neural"])
    p.add_argument("--mode", choices=["kfold", "loo"], default="kfold")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--epochs", type=int, default=200, help="neural training epochs")
    _add_common(p)
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("effects", help="compare a scenario run against a baseline run")
    p.add_argument("--run", required=True, help="scenario run directory")
    p.add_argument("--baseline", required=True, help="baseline run directory")
    p.add_argument("--thresholds", default="0.5,1,3,6,9",
                   help="indirect thresholds as percentages")
    p.add_argument("--include-direct", action="store_true",
                   help="also classify directly affected counties")
    p.add_argument("--geojson", help="county boundary GeoJSON to join by id")
    p.add_argument("--geojson-id", default="id", help="feature property holding the county id")
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    _add_common(p)
    p.set_defaults(func=cmd_effects)

    p = sub.add_parser("sweep", help="direct/indirect totals across flood depths")
    add_world_args(p)
    p.add_argument("--depths", default="1,2,3,4,5,6", help="flood depths in feet")
    p.add_argument("--thresholds", default="0.5,1,3,6,9")
    p.add_argument("--include-direct", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except AssertionError as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
