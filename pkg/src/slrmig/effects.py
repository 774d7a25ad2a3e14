"""Headline analyses over simulated flow matrices.

Direct effects are people inundated at the scenario depth.  Indirect
effects compare incoming migrants per county against the no-SLR baseline:
a county is flagged at threshold ``d`` when its extra incoming migrants
exceed ``d`` times its projected population.  Extra migrants decompose
exactly into those arriving from flooded origins and the shift in flows
from unflooded origins.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .joint import JointRunConfig, JointRunResult, run_baseline, run_joint
from .matrix import MigrationMatrix
from .slr import FloodScenario, county_of_part
from .zones import ZoneGraph

log = logging.getLogger(__name__)

# classification thresholds as fractions of county population
DEFAULT_THRESHOLDS = (0.005, 0.01, 0.03, 0.06, 0.09)


def threshold_label(threshold: float) -> str:
    """"0.5", "1", "3" ... percent labels used in report columns."""
    return f"{threshold * 100:g}"


def incoming_by_county(t: MigrationMatrix) -> dict[str, float]:
    """Column sums folded back onto county ids.

    A county's flooded and unflooded parts merge into one entry (the flooded
    column is zero by construction); county-level registries pass through.
    """
    sums: dict[str, float] = {}
    cols = t.col_sums()
    for dest_id, value in zip(t.dest_ids, cols):
        county = county_of_part(dest_id)
        sums[county] = sums.get(county, 0.0) + float(value)
    return sums


def _county_vector(t: MigrationMatrix, county_ids: list[str]) -> np.ndarray:
    sums = incoming_by_county(t)
    return np.array([sums.get(c, 0.0) for c in county_ids])


def origin_decomposition(scenario_run: JointRunResult, baseline_run: JointRunResult,
                         county_ids: list[str]) -> tuple[np.ndarray, np.ndarray]:
    """Split each county's extra incoming migrants by origin type.

    Flows out of flooded parts are all new relative to the baseline; the
    unflooded-origin component is the change in standard flows.  The two
    components sum to the total extra per county.
    """
    from_flooded = _county_vector(scenario_run.climate, county_ids)
    from_unflooded = (_county_vector(scenario_run.standard, county_ids)
                      - _county_vector(baseline_run.total, county_ids))
    return from_flooded, from_unflooded


def indirect_classification(extra: np.ndarray, projected_pop: np.ndarray,
                            affected_pop: np.ndarray, thresholds=DEFAULT_THRESHOLDS, *,
                            include_directly_affected: bool = False,
                            county_ids: list[str] | None = None):
    """Flag counties whose extra incoming migrants exceed each threshold.

    Returns a (counties x thresholds) boolean array plus the total projected
    population flagged per threshold.  Directly affected counties (any
    flooding) are excluded unless requested; zero-population counties are
    never flagged.
    """
    thresholds = tuple(thresholds)
    n = len(extra)
    flags = np.zeros((n, len(thresholds)), dtype=bool)
    eligible = projected_pop > 0.0
    if county_ids is not None:
        for cid in np.asarray(county_ids, dtype=object)[~eligible]:
            log.info("county %s has zero projected population; never flagged", cid)
    if not include_directly_affected:
        eligible &= affected_pop == 0.0
    for k, d in enumerate(thresholds):
        flags[:, k] = eligible & (extra > d * projected_pop)
    totals = {d: float(projected_pop[flags[:, k]].sum()) for k, d in enumerate(thresholds)}
    return flags, totals


@dataclass
class EffectsReport:
    """Per-county direct and indirect impact tallies for one scenario run."""

    county_ids: list[str]
    projected_pop: np.ndarray
    affected_pop: np.ndarray
    incoming_scenario: np.ndarray
    incoming_baseline: np.ndarray
    extra: np.ndarray
    extra_from_flooded: np.ndarray
    extra_from_unflooded: np.ndarray
    thresholds: tuple[float, ...]
    flags: np.ndarray  # (counties x thresholds) bool
    flagged_population: dict[float, float]
    direct_total: float
    scenario_name: str
    year: int
    include_directly_affected: bool

    def flagged_ids(self, threshold: float) -> list[str]:
        k = self.thresholds.index(threshold)
        return [c for c, f in zip(self.county_ids, self.flags[:, k]) if f]


def compute_effects(scenario_run: JointRunResult, baseline_run: JointRunResult,
                    thresholds=DEFAULT_THRESHOLDS, *,
                    include_directly_affected: bool = False) -> EffectsReport:
    """Compare a scenario run against a baseline run county by county."""
    split = scenario_run.split
    if list(baseline_run.split.county_ids) != list(split.county_ids):
        raise ValueError("scenario and baseline runs cover different county sets")
    if baseline_run.split.year != split.year:
        raise ValueError(f"scenario year {split.year} does not match baseline year "
                         f"{baseline_run.split.year}")
    county_ids = list(split.county_ids)
    incoming_scenario = _county_vector(scenario_run.total, county_ids)
    incoming_baseline = _county_vector(baseline_run.total, county_ids)
    extra = incoming_scenario - incoming_baseline
    from_flooded, from_unflooded = origin_decomposition(scenario_run, baseline_run, county_ids)
    flags, totals = indirect_classification(
        extra, split.projected_pop, split.affected_pop, thresholds,
        include_directly_affected=include_directly_affected, county_ids=county_ids)
    return EffectsReport(
        county_ids=county_ids,
        projected_pop=split.projected_pop.copy(),
        affected_pop=split.affected_pop.copy(),
        incoming_scenario=incoming_scenario,
        incoming_baseline=incoming_baseline,
        extra=extra,
        extra_from_flooded=from_flooded,
        extra_from_unflooded=from_unflooded,
        thresholds=tuple(thresholds),
        flags=flags,
        flagged_population=totals,
        direct_total=float(split.affected_pop.sum()),
        scenario_name=split.scenario_name,
        year=split.year,
        include_directly_affected=include_directly_affected,
    )


@dataclass
class SweepRow:
    """Totals for one flood depth in a depth sweep."""

    depth_ft: int
    direct_people: float
    flooded_area_km2: float | None
    indirect_people: dict[float, float]  # threshold fraction -> flagged population


def depth_sweep(counties: ZoneGraph, block_groups, cfg: JointRunConfig,
                depths=(1, 2, 3, 4, 5, 6), thresholds=DEFAULT_THRESHOLDS, *,
                include_directly_affected: bool = False,
                threads: int = 1) -> list[SweepRow]:
    """Direct and indirect totals at a range of fixed flood depths.

    Each depth runs as its own snapshot scenario at the configured year
    against one shared no-SLR baseline.
    """
    baseline = run_baseline(counties, block_groups, cfg, threads=threads)
    rows = []
    for depth in depths:
        scenario = FloodScenario(name=f"sweep-{depth}ft", depth_schedule={cfg.year: int(depth)})
        run = run_joint(counties, block_groups, replace(cfg, scenario=scenario), threads=threads)
        report = compute_effects(run, baseline, thresholds,
                                 include_directly_affected=include_directly_affected)
        area = run.split.flooded_area_km2
        rows.append(SweepRow(
            depth_ft=int(depth),
            direct_people=report.direct_total,
            flooded_area_km2=float(area.sum()) if area is not None else None,
            indirect_people=dict(report.flagged_population)))
    return rows
