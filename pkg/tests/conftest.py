"""Shared builders for toy worlds used across the test suite."""

from __future__ import annotations

import numpy as np

from slrmig.slr import BlockGroup, FloodScenario
from slrmig.zones import Zone, ZoneGraph


def make_zone(zid, lat=0.0, lon=0.0, pop=100.0, coastal=False, name=None):
    return Zone(id=zid, name=name or zid, centroid_lat=lat, centroid_lon=lon,
                population=float(pop), coastal=coastal)


def make_random_world(n, seed=0, lat_range=(25.0, 49.0), lon_range=(-124.0, -67.0)):
    """Random zone graph with integer-valued populations (sums stay exact)."""
    rng = np.random.default_rng(seed)
    lats = rng.uniform(*lat_range, n)
    lons = rng.uniform(*lon_range, n)
    pops = rng.integers(100, 1_000_000, n).astype(float)
    coastal = rng.random(n) < 0.3
    zones = [make_zone(f"z{i:04d}", lats[i], lons[i], pops[i], bool(coastal[i]))
             for i in range(n)]
    return ZoneGraph(zones)


def make_collinear_world():
    """Three equatorial zones at 0, 1, 2 degrees longitude with pops 10/20/30."""
    return ZoneGraph([
        make_zone("A", 0.0, 0.0, 10.0),
        make_zone("B", 0.0, 1.0, 20.0),
        make_zone("C", 0.0, 2.0, 30.0),
    ])


def constant_bg(bg_id, county_id, pop, affected=0.0, area_km2=None):
    """Block group whose projection is exactly ``pop`` at any year.

    Uses a constant housing-unit history with one person per unit and no
    group quarters; ``affected`` is the flooded fraction at every depth 1-6 ft.
    """
    history = {year: float(pop) for year in range(1940, 2011, 10)}
    fractions = {ft: float(affected) for ft in range(1, 7)}
    areas = {ft: float(area_km2) for ft in range(1, 7)} if area_km2 is not None else None
    return BlockGroup(id=bg_id, county_id=county_id, housing_units_history=history,
                      persons_per_unit=1.0, group_quarters_pop=0.0,
                      affected_fraction=fractions, flooded_area_km2=areas)


def make_toy_strip():
    """Five counties along the equator; only the first (coastal) one floods.

    County c0 has projected population 1000 with a 25% flooded fraction at
    every depth, so any flooding scenario displaces exactly 250 people.
    """
    counties = ZoneGraph([
        make_zone("c0", 0.0, 0.0, 1000.0, coastal=True),
        make_zone("c1", 0.0, 1.0, 2000.0),
        make_zone("c2", 0.0, 2.0, 3000.0),
        make_zone("c3", 0.0, 3.0, 4000.0),
        make_zone("c4", 0.0, 4.0, 5000.0),
    ])
    bgs = [
        constant_bg("b0", "c0", 1000.0, affected=0.25, area_km2=2.0),
        constant_bg("b1", "c1", 2000.0),
        constant_bg("b2", "c2", 3000.0),
        constant_bg("b3", "c3", 4000.0),
        constant_bg("b4", "c4", 5000.0),
    ]
    return counties, bgs


def make_random_inputs(n_counties, seed=0, flooded_share=0.4):
    """Random counties plus 1-3 block groups each, some with flooding.

    Affected fractions step up with depth so direct exposure is strictly
    depth-sensitive; populations are integers for exact summation checks.
    """
    rng = np.random.default_rng(seed)
    graph = make_random_world(n_counties, seed=seed)
    bgs = []
    for i, zone in enumerate(graph.zones):
        n_bg = int(rng.integers(1, 4))
        share = rng.dirichlet(np.ones(n_bg))
        for k in range(n_bg):
            pop = float(np.round(zone.population * share[k]))
            if rng.random() < flooded_share:
                base = rng.uniform(0.02, 0.15)
                fractions = {ft: min(1.0, base * ft) for ft in range(1, 7)}
            else:
                fractions = {ft: 0.0 for ft in range(1, 7)}
            history = {year: pop for year in range(1940, 2011, 10)}
            bgs.append(BlockGroup(
                id=f"bg{i:04d}_{k}", county_id=zone.id,
                housing_units_history=history, persons_per_unit=1.0,
                group_quarters_pop=0.0, affected_fraction=fractions))
    return graph, bgs


def step_scenario(year, depth, name=None):
    """Scenario holding a single fixed depth from ``year`` on."""
    return FloodScenario(name=name or f"step-{depth}ft", depth_schedule={year: depth})


def write_world_csvs(tmp_path, graph, bgs, flows_df=None):
    """Materialize a toy world as the CSV inputs the CLI consumes."""
    from slrmig import io

    tmp_path.mkdir(parents=True, exist_ok=True)
    paths = {"zones": tmp_path / "zones.csv", "blockgroups": tmp_path / "bgs.csv"}
    io.write_zones_csv(graph, paths["zones"])
    io.write_block_groups_csv(bgs, paths["blockgroups"])
    if flows_df is not None:
        paths["flows"] = tmp_path / "flows.csv"
        flows_df.to_csv(paths["flows"], index=False)
    return paths


def synthesize_flows_df(graph, spec, alpha=0.03, years=(2005,)):
    """Flow history generated by a known model; the recovery ground truth."""
    import pandas as pd

    from slrmig.migration import ProductionFunction, produce_flows

    truth = produce_flows(graph.zones, graph, spec, ProductionFunction.standard(alpha))
    origins, dests, values = truth.to_triplets()
    frames = []
    for year in years:
        frames.append(pd.DataFrame({
            "year": year, "origin_id": origins, "dest_id": dests, "migrants": values}))
    return pd.concat(frames, ignore_index=True)
