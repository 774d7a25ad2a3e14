"""Sea-level-rise side of the engine.

Covers block-group population projection, flood scenario timelines, and the
partition of each county into a flooded part and an unflooded part at a
given scenario year.  Flood exposure arrives pre-tabulated per block group
as a fraction of population affected at each integer foot of inundation
(1-6 ft); no raster or polygon processing happens here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, ReferentialIntegrityError
from .zones import Zone, ZoneGraph

MAX_DEPTH_FT = 6

AFFECTED_SUFFIX = ":A"  # flooded part of a county
UNAFFECTED_SUFFIX = ":U"  # unflooded part of a county


def affected_part_id(county_id: str) -> str:
    return county_id + AFFECTED_SUFFIX

def unaffected_part_id(county_id: str) -> str:
    return county_id + UNAFFECTED_SUFFIX

def county_of_part(part_id: str) -> str:
    """County id for a part id; ids without a part suffix pass through."""
    if part_id.endswith(AFFECTED_SUFFIX) or part_id.endswith(UNAFFECTED_SUFFIX):
        return part_id.rsplit(":", 1)[0]
    return part_id


@dataclass(frozen=True)
class BlockGroup:
    """A census-block-group-sized unit inside one county.

    ``housing_units_history`` maps census years to housing-unit counts;
    ``persons_per_unit`` and ``group_quarters_pop`` are held constant when
    projecting.  ``affected_fraction`` maps flood depth in feet (1..6) to the
    fraction of the block group's population flooded at that depth and must
    be nondecreasing in depth.  ``flooded_area_km2`` optionally maps depth to
    inundated area.
    """

    id: str
    county_id: str
    housing_units_history: dict[int, float]
    persons_per_unit: float
    group_quarters_pop: float
    affected_fraction: dict[int, float]
    flooded_area_km2: dict[int, float] | None = None

    def __post_init__(self):
        if self.persons_per_unit < 0:
            raise ValueError(f"block group {self.id!r}: persons_per_unit must be >= 0")
        if self.group_quarters_pop < 0:
            raise ValueError(f"block group {self.id!r}: group_quarters_pop must be >= 0")
        last = 0.0
        for ft in range(1, MAX_DEPTH_FT + 1):
            f = self.affected_fraction.get(ft, last)
            if not 0.0 <= f <= 1.0:
                raise ValueError(f"block group {self.id!r}: affected fraction {f} at {ft} ft outside [0, 1]")
            if f < last:
                raise ValueError(f"block group {self.id!r}: affected fraction decreases at {ft} ft")
            last = f

    def fraction_at(self, depth_ft: int) -> float:
        if depth_ft <= 0:
            return 0.0
        return self.affected_fraction.get(min(depth_ft, MAX_DEPTH_FT), 0.0)

    def area_at(self, depth_ft: int) -> float:
        if depth_ft <= 0 or self.flooded_area_km2 is None:
            return 0.0
        return self.flooded_area_km2.get(min(depth_ft, MAX_DEPTH_FT), 0.0)


def project_population(bg: BlockGroup, year: int) -> float:
    """Projected block-group population at ``year``.

    Housing units are extrapolated with an ordinary least-squares line over
    the historical points and clamped at zero; persons-per-unit and group
    quarters stay at their recorded values, so the result is
    ``units * persons_per_unit + group_quarters``.
    """
    if len(bg.housing_units_history) < 2:
        raise InsufficientDataError(
            f"block group {bg.id!r}: need >= 2 housing-unit history points, "
            f"have {len(bg.housing_units_history)}")
    items = sorted(bg.housing_units_history.items())
    t = np.array([y for y, _ in items], dtype=float)
    h = np.array([u for _, u in items], dtype=float)
    t_mean = t.mean()
    h_mean = h.mean()
    slope = float(((t - t_mean) * (h - h_mean)).sum() / ((t - t_mean) ** 2).sum())
    units = h_mean + slope * (year - t_mean)
    units = max(units, 0.0)
    return units * bg.persons_per_unit + bg.group_quarters_pop


@dataclass(frozen=True)
class FloodScenario:
    """Named SLR trajectory: a step schedule mapping years to flood depth in feet."""

    name: str
    depth_schedule: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        last = 0
        for year in sorted(self.depth_schedule):
            depth = self.depth_schedule[year]
            if not isinstance(depth, int) or not 0 <= depth <= MAX_DEPTH_FT:
                raise ValueError(f"scenario {self.name!r}: depth {depth!r} at {year} outside 0..{MAX_DEPTH_FT} ft")
            if depth < last:
                raise ValueError(f"scenario {self.name!r}: depth decreases at year {year}")
            last = depth

    def depth_at(self, year: int) -> int:
        """Largest scheduled depth whose year is <= the query year; 0 before the schedule."""
        depth = 0
        for y in sorted(self.depth_schedule):
            if y <= year:
                depth = self.depth_schedule[y]
        return depth

    @classmethod
    def none(cls) -> "FloodScenario":
        return cls(name="none", depth_schedule={})

    @classmethod
    def medium(cls) -> "FloodScenario":
        """0.9 m by 2100: successive 1-ft steps in 2055, 2080 and 2100."""
        return cls(name="medium", depth_schedule={2055: 1, 2080: 2, 2100: 3})

    @classmethod
    def high(cls) -> "FloodScenario":
        """1.8 m by 2100: 1-ft steps in 2042, 2059, 2071, 2082, 2091 and 2100."""
        return cls(name="high", depth_schedule={2042: 1, 2059: 2, 2071: 3, 2082: 4, 2091: 5, 2100: 6})

    @classmethod
    def builtin(cls, name: str) -> "FloodScenario":
        try:
            return {"none": cls.none, "medium": cls.medium, "high": cls.high}[name]()
        except KeyError:
            raise ValueError(f"unknown builtin scenario {name!r}; choose none, medium or high") from None


@dataclass
class SplitZones:
    """Per-county partition into flooded and unflooded parts at one scenario year.

    ``affected_zones[i]`` / ``unaffected_zones[i]`` correspond to county i of
    the source graph; counties with no flooding get a zero-population
    placeholder on the affected side so the two sequences stay aligned.
    Zone lists are ``None`` when a split is reloaded from a run directory
    (the per-county arrays are all the reporting layer needs).
    """

    county_ids: list[str]
    projected_pop: np.ndarray
    affected_pop: np.ndarray
    unaffected_pop: np.ndarray
    year: int
    depth_ft: int
    scenario_name: str
    flooded_area_km2: np.ndarray | None = None
    affected_zones: list[Zone] | None = None
    unaffected_zones: list[Zone] | None = None

    @property
    def is_placeholder(self) -> np.ndarray:
        return self.affected_pop == 0.0

    @property
    def total_affected(self) -> float:
        return float(self.affected_pop.sum())


def split_zones(counties: ZoneGraph, block_groups, scenario: FloodScenario, year: int) -> SplitZones:
    """Partition every county into affected and unaffected parts.

    Each block group's projected population is split by its affected fraction
    at the scenario depth; county parts inherit the county centroid.  A county
    with no block groups falls back to its static zone population, entirely
    unaffected.  Block groups naming an unknown county are rejected.
    """
    orphans = [bg.id for bg in block_groups if bg.county_id not in counties]
    if orphans:
        raise ReferentialIntegrityError(
            f"{len(orphans)} block group(s) reference unknown counties: {orphans[:10]}",
            offenders=orphans)

    depth = scenario.depth_at(year)
    n = len(counties)
    projected = np.zeros(n)
    affected = np.zeros(n)
    has_bgs = np.zeros(n, dtype=bool)
    any_area = any(bg.flooded_area_km2 is not None for bg in block_groups)
    area = np.zeros(n) if any_area else None

    for bg in block_groups:
        i = counties.index_of(bg.county_id)
        has_bgs[i] = True
        p = project_population(bg, year)
        a = p * bg.fraction_at(depth)
        projected[i] += p
        affected[i] += a
        if area is not None:
            area[i] += bg.area_at(depth)

    # counties without block-group data keep their static population, unflooded
    projected[~has_bgs] = counties.populations[~has_bgs]
    unaffected = projected - affected

    affected_zones = []
    unaffected_zones = []
    for i, county in enumerate(counties.zones):
        affected_zones.append(Zone(
            id=affected_part_id(county.id), name=f"{county.name} (flooded part)",
            centroid_lat=county.centroid_lat, centroid_lon=county.centroid_lon,
            population=float(affected[i]), coastal=county.coastal))
        unaffected_zones.append(Zone(
            id=unaffected_part_id(county.id), name=f"{county.name} (unflooded part)",
            centroid_lat=county.centroid_lat, centroid_lon=county.centroid_lon,
            population=float(unaffected[i]), coastal=county.coastal))

    return SplitZones(
        county_ids=list(counties.ids), projected_pop=projected,
        affected_pop=affected, unaffected_pop=unaffected,
        year=year, depth_ft=depth, scenario_name=scenario.name,
        flooded_area_km2=area, affected_zones=affected_zones,
        unaffected_zones=unaffected_zones)


@dataclass
class DirectExposure:
    """People (and, when area data is present, land) directly inundated."""

    total_people: float
    per_county_people: dict[str, float]
    total_area_km2: float | None = None
    per_county_area_km2: dict[str, float] | None = None


def direct_exposure(split: SplitZones) -> DirectExposure:
    """Tally of directly affected population per county and overall."""
    per_county = dict(zip(split.county_ids, (float(v) for v in split.affected_pop)))
    total_area = per_area = None
    if split.flooded_area_km2 is not None:
        per_area = dict(zip(split.county_ids, (float(v) for v in split.flooded_area_km2)))
        total_area = float(split.flooded_area_km2.sum())
    return DirectExposure(
        total_people=float(split.affected_pop.sum()),
        per_county_people=per_county,
        total_area_km2=total_area,
        per_county_area_km2=per_area)
