"""Coupled SLR/migration run: split zones, route two migrant streams, sum.

One run simulates a single (scenario, year) snapshot:

1. every county splits into a flooded part and an unflooded part;
2. a climate model moves the *entire* population of each flooded part into
   the unflooded parts (forced production);
3. a standard model moves a fixed share of each unflooded part's population
   among the other unflooded parts;
4. the two matrices add into the total flow table.

Flooded parts are present in the shared registry as origins but never
receive anyone: their destination columns are identically zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .matrix import MigrationMatrix
from .migration import (DEFAULT_ALPHA_STANDARD, ModelSpec, ProductionFunction,
                        default_climate_spec, default_standard_spec, produce_flows)
from .slr import FloodScenario, SplitZones, split_zones
from .zones import ZoneGraph

# A county's flooded part shares its centroid with its own unflooded part, so
# their nominal separation is zero; distance-using kernels see this floor instead.
SIBLING_DISTANCE_FLOOR_KM = 1.0


@dataclass(frozen=True)
class JointRunConfig:
    """Everything one simulation snapshot depends on."""

    scenario: FloodScenario
    year: int
    climate_model: ModelSpec = field(default_factory=default_climate_spec)
    standard_model: ModelSpec = field(default_factory=default_standard_spec)
    alpha_standard: float = DEFAULT_ALPHA_STANDARD

    def __post_init__(self):
        if not 0.0 < self.alpha_standard <= 1.0:
            raise ValueError(f"alpha_standard {self.alpha_standard} outside (0, 1]")


@dataclass
class JointRunResult:
    """Total, climate-driven and standard flow matrices plus the zone split.

    All three matrices share one registry: the flooded-part ids followed by
    the unflooded-part ids, in county order.
    """

    total: MigrationMatrix
    climate: MigrationMatrix
    standard: MigrationMatrix
    split: SplitZones

    @property
    def registry(self) -> tuple[str, ...]:
        return self.total.origin_ids


def run_joint(counties: ZoneGraph, block_groups, cfg: JointRunConfig, *,
              threads: int = 1) -> JointRunResult:
    """Run the coupled model for one scenario snapshot."""
    split = split_zones(counties, block_groups, cfg.scenario, cfg.year)
    dest_graph = ZoneGraph(split.unaffected_zones)

    climate_raw = produce_flows(
        split.affected_zones, dest_graph, cfg.climate_model, ProductionFunction.forced(),
        distance_floor_km=SIBLING_DISTANCE_FLOOR_KM, threads=threads)
    standard_raw = produce_flows(
        split.unaffected_zones, dest_graph, cfg.standard_model,
        ProductionFunction.standard(cfg.alpha_standard), threads=threads)

    registry = tuple(z.id for z in split.affected_zones) + tuple(z.id for z in split.unaffected_zones)
    climate = climate_raw.embedded(registry, registry)
    standard = standard_raw.embedded(registry, registry)
    assert climate.same_registries(standard)
    total = climate + standard

    n = len(counties)
    # flooded parts occupy the first n registry slots and must receive nobody
    assert total.sparse()[:, :n].nnz == 0, "migrants were routed into a flooded part"
    expected_rows = np.concatenate([split.affected_pop, cfg.alpha_standard * split.unaffected_pop])
    np.testing.assert_allclose(total.row_sums(), expected_rows, rtol=1e-9, atol=1e-12)
    assert abs(climate.total() - split.total_affected) <= 1e-9 * max(split.total_affected, 1.0)

    return JointRunResult(total=total, climate=climate, standard=standard, split=split)


def run_baseline(counties: ZoneGraph, block_groups, cfg: JointRunConfig, *,
                 threads: int = 1) -> JointRunResult:
    """The no-SLR reference: standard migration only among whole counties."""
    return run_joint(counties, block_groups, replace(cfg, scenario=FloodScenario.none()),
                     threads=threads)


def ablation_single_model(counties: ZoneGraph, block_groups, cfg: JointRunConfig, *,
                          threads: int = 1) -> JointRunResult:
    """Same pipeline with climate flows produced by the standard model spec.

    Measures how much results depend on modeling displaced migrants
    separately from routine migrants.
    """
    return run_joint(counties, block_groups, replace(cfg, climate_model=cfg.standard_model),
                     threads=threads)
