"""File formats: input loaders with validation, and run-artifact writers.

Formats
-------
zones CSV          ``id,name,lat,lon,population,coastal`` (coastal 0/1)
block groups CSV   ``bg_id,county_id,hu_<year>...,ppu,gq,af_1ft..af_6ft``
                   plus optional ``area_km2_1ft..area_km2_6ft``
flows CSV          ``year,origin_id,dest_id,migrants``
scenario JSON      ``{"name": ..., "schedule": {"2055": 1, ...}}`` (feet)
model spec JSON    ``{"kind": ..., "beta": ..., "weights_path": ...}``
matrix CSV         ``origin_id,dest_id,migrants`` with values below 1e-6 omitted
run directory      ``T.csv  T_prime.csv  T_second.csv  split.csv  manifest.json``

Ids may not contain ``:`` (reserved for the flooded/unflooded part suffixes).
Unknown columns are ignored with a warning, never reinterpreted.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .calibration import CVResult
from .effects import EffectsReport, SweepRow, threshold_label
from .errors import InputError
from .joint import JointRunResult
from .matrix import MigrationMatrix
from .migration import ModelSpec
from .mlp import NeuralWeights
from .slr import (MAX_DEPTH_FT, BlockGroup, FloodScenario, SplitZones, affected_part_id,
                  unaffected_part_id)
from .zones import Zone, ZoneGraph

log = logging.getLogger(__name__)

MATRIX_MIN_VALUE = 1e-6  # flow entries below this are omitted from CSV output
_FLOAT_FORMAT = "%.12g"

ZONE_COLUMNS = ("id", "name", "lat", "lon", "population", "coastal")
FLOW_COLUMNS = ("year", "origin_id", "dest_id", "migrants")
_HU_PATTERN = re.compile(r"^hu_(\d{4})$")
_AF_COLUMNS = tuple(f"af_{ft}ft" for ft in range(1, MAX_DEPTH_FT + 1))
_AREA_COLUMNS = tuple(f"area_km2_{ft}ft" for ft in range(1, MAX_DEPTH_FT + 1))

RUN_TOTAL = "T.csv"
RUN_CLIMATE = "T_prime.csv"
RUN_STANDARD = "T_second.csv"
RUN_SPLIT = "split.csv"
RUN_MANIFEST = "manifest.json"


# ---------------------------------------------------------------------------
# validation plumbing


@dataclass
class ValidationIssue:
    severity: str  # "error" or "warning"
    file: str
    row: int | None  # 1-based data row, when attributable
    message: str

    def __str__(self) -> str:
        where = f"{self.file}:{self.row}" if self.row is not None else self.file
        return f"{self.severity}: {where}: {self.message}"


@dataclass
class ValidationReport:
    issues: list[ValidationIssue]

    @property
    def errors(self) -> list[ValidationIssue]:
        return [i for i in self.issues if i.severity == "error"]

    @property
    def warnings(self) -> list[ValidationIssue]:
        return [i for i in self.issues if i.severity == "warning"]

    @property
    def ok(self) -> bool:
        return not self.errors


def _raise_on_errors(issues: list[ValidationIssue]) -> None:
    errors = [i for i in issues if i.severity == "error"]
    if errors:
        head = "; ".join(str(e) for e in errors[:5])
        more = f" (+{len(errors) - 5} more)" if len(errors) > 5 else ""
        raise InputError(head + more)
    for issue in issues:
        log.warning(str(issue))


def _read_csv(path) -> pd.DataFrame:
    return pd.read_csv(path, dtype=str, keep_default_na=False)


def _numeric(df: pd.DataFrame, column: str) -> pd.Series:
    return pd.to_numeric(df[column], errors="coerce")


# ---------------------------------------------------------------------------
# zones


def _check_zones_frame(df: pd.DataFrame, source: str) -> list[ValidationIssue]:
    issues: list[ValidationIssue] = []
    err = lambda row, msg: issues.append(ValidationIssue("error", source, row, msg))
    warn = lambda row, msg: issues.append(ValidationIssue("warning", source, row, msg))

    missing = [c for c in ZONE_COLUMNS if c not in df.columns]
    if missing:
        err(None, f"missing required column(s): {missing}")
        return issues
    for extra in [c for c in df.columns if c not in ZONE_COLUMNS]:
        warn(None, f"ignoring unknown column {extra!r}")

    dup = df["id"][df["id"].duplicated()]
    for row in dup.index:
        err(row + 2, f"duplicate zone id {df['id'][row]!r}")
    lat = _numeric(df, "lat")
    lon = _numeric(df, "lon")
    pop = _numeric(df, "population")
    for row in range(len(df)):
        zid = df["id"].iat[row]
        line = row + 2  # header is line 1
        if not zid:
            err(line, "empty zone id")
        elif ":" in zid:
            err(line, f"zone id {zid!r} contains ':' (reserved for part suffixes)")
        if np.isnan(lat.iat[row]) or not -90 <= lat.iat[row] <= 90:
            err(line, f"latitude {df['lat'].iat[row]!r} invalid or outside [-90, 90]")
        if np.isnan(lon.iat[row]) or not -180 <= lon.iat[row] <= 180:
            err(line, f"longitude {df['lon'].iat[row]!r} invalid or outside [-180, 180]")
        if np.isnan(pop.iat[row]) or pop.iat[row] < 0:
            err(line, f"population {df['population'].iat[row]!r} invalid or negative")
        elif pop.iat[row] == 0:
            warn(line, f"zone {zid!r} has zero population")
        if df["coastal"].iat[row] not in ("0", "1"):
            err(line, f"coastal flag {df['coastal'].iat[row]!r} must be 0 or 1")
    return issues


def read_zones_csv(path) -> ZoneGraph:
    df = _read_csv(path)
    _raise_on_errors(_check_zones_frame(df, str(path)))
    zones = [Zone(id=r.id, name=r.name, centroid_lat=float(r.lat), centroid_lon=float(r.lon),
                  population=float(r.population), coastal=r.coastal == "1")
             for r in df.itertuples()]
    return ZoneGraph(zones)


def write_zones_csv(graph: ZoneGraph, path) -> None:
    pd.DataFrame({
        "id": graph.ids,
        "name": [z.name for z in graph.zones],
        "lat": graph.lats,
        "lon": graph.lons,
        "population": graph.populations,
        "coastal": [int(z.coastal) for z in graph.zones],
    }).to_csv(path, index=False, float_format=_FLOAT_FORMAT)


# ---------------------------------------------------------------------------
# block groups


def _check_block_groups_frame(df: pd.DataFrame, source: str,
                              graph: ZoneGraph | None) -> list[ValidationIssue]:
    issues: list[ValidationIssue] = []
    err = lambda row, msg: issues.append(ValidationIssue("error", source, row, msg))
    warn = lambda row, msg: issues.append(ValidationIssue("warning", source, row, msg))

    hu_cols = [c for c in df.columns if _HU_PATTERN.match(c)]
    required = ["bg_id", "county_id", "ppu", "gq", *_AF_COLUMNS]
    missing = [c for c in required if c not in df.columns]
    if missing:
        err(None, f"missing required column(s): {missing}")
        return issues
    if len(hu_cols) < 2:
        err(None, f"need >= 2 housing-unit history columns (hu_<year>), found {len(hu_cols)}")
        return issues
    area_cols = [c for c in df.columns if c in _AREA_COLUMNS]
    if area_cols and len(area_cols) != len(_AREA_COLUMNS):
        err(None, f"flooded-area columns must cover all depths 1-{MAX_DEPTH_FT} ft, "
                  f"found only {area_cols}")
    known = set(required) | set(hu_cols) | set(_AREA_COLUMNS)
    for extra in [c for c in df.columns if c not in known]:
        warn(None, f"ignoring unknown column {extra!r}")

    dup = df["bg_id"][df["bg_id"].duplicated()]
    for row in dup.index:
        err(row + 2, f"duplicate block group id {df['bg_id'][row]!r}")

    numeric_cols = {c: _numeric(df, c) for c in [*hu_cols, "ppu", "gq", *_AF_COLUMNS, *area_cols]}
    for row in range(len(df)):
        line = row + 2
        if graph is not None and df["county_id"].iat[row] not in graph:
            err(line, f"block group {df['bg_id'].iat[row]!r} references unknown county "
                      f"{df['county_id'].iat[row]!r}")
        for col in (*hu_cols, "ppu", "gq", *area_cols):
            v = numeric_cols[col].iat[row]
            if np.isnan(v) or v < 0:
                err(line, f"{col} value {df[col].iat[row]!r} invalid or negative")
        last = 0.0
        for col in _AF_COLUMNS:
            v = numeric_cols[col].iat[row]
            if np.isnan(v) or not 0 <= v <= 1:
                err(line, f"{col} value {df[col].iat[row]!r} outside [0, 1]")
            elif v < last:
                err(line, f"affected fraction decreases at {col}")
            else:
                last = v
    return issues


def read_block_groups_csv(path, graph: ZoneGraph | None = None) -> list[BlockGroup]:
    """Load block groups; referential checks against ``graph`` when provided."""
    df = _read_csv(path)
    _raise_on_errors(_check_block_groups_frame(df, str(path), graph))
    hu_cols = {int(_HU_PATTERN.match(c).group(1)): c for c in df.columns if _HU_PATTERN.match(c)}
    has_area = all(c in df.columns for c in _AREA_COLUMNS)
    out = []
    for r in range(len(df)):
        area = None
        if has_area:
            area = {ft: float(df[f"area_km2_{ft}ft"].iat[r]) for ft in range(1, MAX_DEPTH_FT + 1)}
        out.append(BlockGroup(
            id=df["bg_id"].iat[r],
            county_id=df["county_id"].iat[r],
            housing_units_history={y: float(df[c].iat[r]) for y, c in hu_cols.items()},
            persons_per_unit=float(df["ppu"].iat[r]),
            group_quarters_pop=float(df["gq"].iat[r]),
            affected_fraction={ft: float(df[f"af_{ft}ft"].iat[r])
                               for ft in range(1, MAX_DEPTH_FT + 1)},
            flooded_area_km2=area))
    return out


def write_block_groups_csv(block_groups, path) -> None:
    years = sorted({y for bg in block_groups for y in bg.housing_units_history})
    has_area = all(bg.flooded_area_km2 is not None for bg in block_groups)
    rows = {}
    rows["bg_id"] = [bg.id for bg in block_groups]
    rows["county_id"] = [bg.county_id for bg in block_groups]
    for y in years:
        rows[f"hu_{y}"] = [bg.housing_units_history.get(y, 0.0) for bg in block_groups]
    rows["ppu"] = [bg.persons_per_unit for bg in block_groups]
    rows["gq"] = [bg.group_quarters_pop for bg in block_groups]
    for ft in range(1, MAX_DEPTH_FT + 1):
        rows[f"af_{ft}ft"] = [bg.affected_fraction.get(ft, 0.0) for bg in block_groups]
    if has_area:
        for ft in range(1, MAX_DEPTH_FT + 1):
            rows[f"area_km2_{ft}ft"] = [bg.flooded_area_km2.get(ft, 0.0) for bg in block_groups]
    pd.DataFrame(rows).to_csv(path, index=False, float_format=_FLOAT_FORMAT)


# ---------------------------------------------------------------------------
# flows


def _check_flows_frame(df: pd.DataFrame, source: str,
                       graph: ZoneGraph | None) -> list[ValidationIssue]:
    issues: list[ValidationIssue] = []
    err = lambda row, msg: issues.append(ValidationIssue("error", source, row, msg))
    warn = lambda row, msg: issues.append(ValidationIssue("warning", source, row, msg))

    missing = [c for c in FLOW_COLUMNS if c not in df.columns]
    if missing:
        err(None, f"missing required column(s): {missing}")
        return issues
    for extra in [c for c in df.columns if c not in FLOW_COLUMNS]:
        warn(None, f"ignoring unknown column {extra!r}")
    year = _numeric(df, "year")
    migrants = _numeric(df, "migrants")
    for row in range(len(df)):
        line = row + 2
        if np.isnan(year.iat[row]) or year.iat[row] != int(year.iat[row]):
            err(line, f"year {df['year'].iat[row]!r} is not an integer")
        if np.isnan(migrants.iat[row]) or migrants.iat[row] < 0:
            err(line, f"migrants {df['migrants'].iat[row]!r} invalid or negative")
        if graph is not None:
            for col in ("origin_id", "dest_id"):
                if df[col].iat[row] not in graph:
                    err(line, f"{col} {df[col].iat[row]!r} not in zone table")
        if df["origin_id"].iat[row] == df["dest_id"].iat[row]:
            warn(line, "self flow (origin == destination) will be ignored")
    return issues


def read_flows_csv(path, graph: ZoneGraph | None = None) -> pd.DataFrame:
    df = _read_csv(path)
    _raise_on_errors(_check_flows_frame(df, str(path), graph))
    return pd.DataFrame({
        "year": _numeric(df, "year").astype(int),
        "origin_id": df["origin_id"],
        "dest_id": df["dest_id"],
        "migrants": _numeric(df, "migrants"),
    })


# ---------------------------------------------------------------------------
# scenarios and model specs


def read_scenario(path_or_name) -> FloodScenario:
    """A builtin scenario name (none / medium / high) or a scenario JSON path."""
    name = str(path_or_name)
    if name in ("none", "medium", "high"):
        return FloodScenario.builtin(name)
    path = Path(path_or_name)
    if not path.exists():
        raise InputError(f"scenario {name!r} is neither a builtin name nor an existing file")
    try:
        obj = json.loads(path.read_text())
        schedule = {int(y): int(d) for y, d in obj.get("schedule", {}).items()}
        return FloodScenario(name=str(obj["name"]), depth_schedule=schedule)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: invalid scenario JSON: {exc}") from exc


def write_scenario(scenario: FloodScenario, path) -> None:
    Path(path).write_text(json.dumps(
        {"name": scenario.name,
         "schedule": {str(y): d for y, d in sorted(scenario.depth_schedule.items())}},
        indent=2) + "\n")


def read_model_spec(path) -> ModelSpec:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
        kind = obj["kind"]
        beta = obj.get("beta")
        weights = None
        if obj.get("weights_path"):
            weights_path = path.parent / obj["weights_path"]
            weights = NeuralWeights.from_json_dict(json.loads(weights_path.read_text()))
        return ModelSpec(kind=kind, beta=beta, weights=weights)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: invalid model spec: {exc}") from exc


def write_model_spec(spec: ModelSpec, path, weights_filename: str | None = None) -> None:
    path = Path(path)
    obj = {"kind": spec.kind, "beta": spec.beta, "weights_path": None}
    if spec.weights is not None:
        weights_filename = weights_filename or (path.stem + "_weights.json")
        (path.parent / weights_filename).write_text(json.dumps(spec.weights.to_json_dict()))
        obj["weights_path"] = weights_filename
    path.write_text(json.dumps(obj, indent=2) + "\n")


# ---------------------------------------------------------------------------
# matrices and run directories


def write_matrix_csv(matrix: MigrationMatrix, path, min_value: float = MATRIX_MIN_VALUE) -> None:
    origins, dests, values = matrix.to_triplets(min_value=min_value)
    pd.DataFrame({"origin_id": origins, "dest_id": dests, "migrants": values}).to_csv(
        path, index=False, float_format=_FLOAT_FORMAT)


def read_matrix_csv(path, origin_ids, dest_ids) -> MigrationMatrix:
    df = pd.read_csv(path, dtype={"origin_id": str, "dest_id": str})
    if list(df.columns) != ["origin_id", "dest_id", "migrants"]:
        raise InputError(f"{path}: expected header origin_id,dest_id,migrants")
    return MigrationMatrix.from_entries(origin_ids, dest_ids, df["origin_id"].to_numpy(),
                                        df["dest_id"].to_numpy(),
                                        df["migrants"].to_numpy(dtype=float))


def write_split_csv(split: SplitZones, path) -> None:
    cols = {
        "county_id": split.county_ids,
        "projected_pop": split.projected_pop,
        "affected_pop": split.affected_pop,
        "unaffected_pop": split.unaffected_pop,
    }
    if split.flooded_area_km2 is not None:
        cols["flooded_area_km2"] = split.flooded_area_km2
    pd.DataFrame(cols).to_csv(path, index=False, float_format="%.17g")


def read_split_csv(path, year: int, depth_ft: int, scenario_name: str) -> SplitZones:
    df = pd.read_csv(path, dtype={"county_id": str})
    area = df["flooded_area_km2"].to_numpy(float) if "flooded_area_km2" in df.columns else None
    return SplitZones(
        county_ids=list(df["county_id"]),
        projected_pop=df["projected_pop"].to_numpy(float),
        affected_pop=df["affected_pop"].to_numpy(float),
        unaffected_pop=df["unaffected_pop"].to_numpy(float),
        year=year, depth_ft=depth_ft, scenario_name=scenario_name,
        flooded_area_km2=area)


def sha256_of_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_run_dir(out_dir, result: JointRunResult, manifest: dict) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(result.total, out / RUN_TOTAL)
    write_matrix_csv(result.climate, out / RUN_CLIMATE)
    write_matrix_csv(result.standard, out / RUN_STANDARD)
    write_split_csv(result.split, out / RUN_SPLIT)
    manifest = dict(manifest)
    manifest["totals"] = {
        "displaced": result.split.total_affected,
        "migrants": result.total.total(),
        "climate_migrants": result.climate.total(),
        "standard_migrants": result.standard.total(),
    }
    manifest["outputs"] = {name: sha256_of_file(out / name)
                           for name in (RUN_TOTAL, RUN_CLIMATE, RUN_STANDARD, RUN_SPLIT)}
    (out / RUN_MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n")


def read_run_dir(path) -> tuple[JointRunResult, dict]:
    run = Path(path)
    try:
        manifest = json.loads((run / RUN_MANIFEST).read_text())
        config = manifest["config"]
    except (OSError, KeyError, ValueError) as exc:
        raise InputError(f"{run}: not a readable run directory: {exc}") from exc
    split = read_split_csv(run / RUN_SPLIT, year=int(config["year"]),
                           depth_ft=int(config["depth_ft"]),
                           scenario_name=str(config["scenario_name"]))
    registry = ([affected_part_id(c) for c in split.county_ids]
                + [unaffected_part_id(c) for c in split.county_ids])
    total = read_matrix_csv(run / RUN_TOTAL, registry, registry)
    climate = read_matrix_csv(run / RUN_CLIMATE, registry, registry)
    standard = read_matrix_csv(run / RUN_STANDARD, registry, registry)
    return JointRunResult(total=total, climate=climate, standard=standard, split=split), manifest


# ---------------------------------------------------------------------------
# reports


def write_effects_csv(report: EffectsReport, path) -> None:
    cols = {
        "county_id": report.county_ids,
        "pop": report.projected_pop,
        "affected_pop": report.affected_pop,
        "in_scenario": report.incoming_scenario,
        "in_baseline": report.incoming_baseline,
        "extra": report.extra,
        "extra_flooded": report.extra_from_flooded,
        "extra_unflooded": report.extra_from_unflooded,
    }
    for k, d in enumerate(report.thresholds):
        cols[f"flag_d{threshold_label(d)}"] = report.flags[:, k].astype(int)
    pd.DataFrame(cols).to_csv(path, index=False, float_format=_FLOAT_FORMAT)


def write_sweep_csv(rows: list[SweepRow], path) -> None:
    thresholds = list(rows[0].indirect_people) if rows else []
    cols = {
        "depth_ft": [r.depth_ft for r in rows],
        "direct_people": [r.direct_people for r in rows],
    }
    if rows and rows[0].flooded_area_km2 is not None:
        cols["flooded_area_km2"] = [r.flooded_area_km2 for r in rows]
    for d in thresholds:
        cols[f"indirect_d{threshold_label(d)}"] = [r.indirect_people[d] for r in rows]
    pd.DataFrame(cols).to_csv(path, index=False, float_format=_FLOAT_FORMAT)


def write_cv_report_json(result: CVResult, path) -> None:
    Path(path).write_text(json.dumps(result.to_json_dict(), indent=2) + "\n")


def export_effects_geojson(report: EffectsReport, geojson: dict,
                           id_property: str = "id") -> tuple[dict, int]:
    """Join report quantities onto county boundary features by id.

    Features whose ``id_property`` matches a county gain ``pop``, ``extra``,
    decomposition and flag properties; others pass through untouched.
    Returns the joined GeoJSON and the number of matched features.
    """
    by_county = {cid: i for i, cid in enumerate(report.county_ids)}
    matched = 0
    out = {"type": "FeatureCollection", "features": []}
    for feature in geojson.get("features", []):
        feature = dict(feature)
        props = dict(feature.get("properties") or {})
        key = str(props.get(id_property, ""))
        i = by_county.get(key)
        if i is not None:
            matched += 1
            props.update({
                "pop": float(report.projected_pop[i]),
                "affected_pop": float(report.affected_pop[i]),
                "in_scenario": float(report.incoming_scenario[i]),
                "in_baseline": float(report.incoming_baseline[i]),
                "extra": float(report.extra[i]),
                "extra_flooded": float(report.extra_from_flooded[i]),
                "extra_unflooded": float(report.extra_from_unflooded[i]),
            })
            for k, d in enumerate(report.thresholds):
                props[f"flag_d{threshold_label(d)}"] = int(report.flags[i, k])
        feature["properties"] = props
        out["features"].append(feature)
    if matched < len(geojson.get("features", [])):
        log.warning("%d of %d GeoJSON features matched no county id",
                    len(geojson.get("features", [])) - matched,
                    len(geojson.get("features", [])))
    return out, matched


# ---------------------------------------------------------------------------
# whole-input validation


def validate_inputs(zones_path=None, blockgroups_path=None, flows_path=None,
                    scenario_path=None) -> ValidationReport:
    """Schema and referential checks across all provided input files."""
    issues: list[ValidationIssue] = []
    graph = None
    if zones_path is not None:
        df = _read_csv(zones_path)
        zone_issues = _check_zones_frame(df, str(zones_path))
        issues.extend(zone_issues)
        if not any(i.severity == "error" for i in zone_issues):
            graph = ZoneGraph([
                Zone(id=r.id, name=r.name, centroid_lat=float(r.lat), centroid_lon=float(r.lon),
                     population=float(r.population), coastal=r.coastal == "1")
                for r in df.itertuples()])
    if blockgroups_path is not None:
        issues.extend(_check_block_groups_frame(_read_csv(blockgroups_path),
                                                str(blockgroups_path), graph))
    if flows_path is not None:
        issues.extend(_check_flows_frame(_read_csv(flows_path), str(flows_path), graph))
    if scenario_path is not None:
        try:
            read_scenario(scenario_path)
        except InputError as exc:
            issues.append(ValidationIssue("error", str(scenario_path), None, str(exc)))
    return ValidationReport(issues=issues)
