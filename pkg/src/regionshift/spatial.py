"""Planar unit geometry, shared borders and region shape metrics.

Coordinates must already be in a projected CRS with a known length unit;
nothing here reprojects. Shared borders are found by hashing boundary
segments after snapping their endpoints to a grid of ``snap_tolerance``,
which works on topologically clean inputs where neighbouring polygons use
the same vertices along their common boundary (Census cartographic files,
for example). A segment that lands in exactly two units' rings adds its
length to that pair.

Region perimeters are never built by dissolving polygons: the perimeter
of a union is the sum of its unit perimeters minus twice the borders
shared inside it.
"""

from __future__ import annotations

import csv
import json
import math
import os
import statistics
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Sequence

from .community import Partition
from .graph import GraphError

__all__ = [
    "GeometryError",
    "GeometryWarning",
    "UnitGeometry",
    "SharedBorderTable",
    "RegionShape",
    "RegionShapeReport",
    "preprocess_geometry",
    "read_geojson",
    "avg_border_length",
    "compactness",
    "check_border_consistency",
    "polsby_popper",
    "partition_shape_report",
    "read_adjacency_csv",
    "write_adjacency_csv",
    "read_units_csv",
    "write_units_csv",
    "write_region_geojson",
]


Point = tuple[float, float]
Ring = tuple[Point, ...]

DEFAULT_SNAP = 1e-6
GEOJSON_SCHEMA_VERSION = 1


class GeometryError(GraphError):
    pass


class GeometryWarning(UserWarning):
    pass


def ring_signed_area(ring: Sequence[Point]) -> float:
    """Shoelace area; positive for counter-clockwise rings."""
    terms = [x0 * y1 - x1 * y0 for (x0, y0), (x1, y1) in zip(ring, ring[1:])]
    return 0.5 * math.fsum(terms)


def ring_length(ring: Sequence[Point]) -> float:
    return math.fsum(math.hypot(x1 - x0, y1 - y0) for (x0, y0), (x1, y1) in zip(ring, ring[1:]))


def _check_ring(unit: str, ring: Sequence[Point]) -> Ring:
    ring = tuple((float(p[0]), float(p[1])) for p in ring)
    if len(ring) < 4:
        raise GeometryError(f"unit {unit!r}: ring has {len(ring)} points, need at least 4")
    if ring[0] != ring[-1]:
        raise GeometryError(f"unit {unit!r}: unclosed ring starting at {ring[0]}")
    return ring


@dataclass(frozen=True)
class UnitGeometry:
    """Area and perimeter of one unit, with its polygons when known.

    ``polygons`` is a tuple of polygons, each a tuple of rings whose first
    ring is the exterior and the rest holes. It is empty for units loaded
    from a precomputed area/perimeter table.
    """

    unit: str
    area: float
    perimeter: float
    polygons: tuple[tuple[Ring, ...], ...] = ()

    @classmethod
    def from_polygons(cls, unit: str, polygons: Iterable[Iterable[Sequence[Point]]]) -> "UnitGeometry":
        polys = tuple(tuple(_check_ring(unit, r) for r in rings) for rings in polygons)
        if not polys or any(not p for p in polys):
            raise GeometryError(f"unit {unit!r}: empty geometry")
        area_terms, length_terms = [], []
        for rings in polys:
            area_terms.append(abs(ring_signed_area(rings[0])))
            area_terms.extend(-abs(ring_signed_area(h)) for h in rings[1:])
            length_terms.extend(ring_length(r) for r in rings)
        area = math.fsum(area_terms)
        if not area > 0:
            raise GeometryError(f"unit {unit!r}: non-positive area {area}")
        return cls(unit, area, math.fsum(length_terms), polys)

    @property
    def rings(self) -> list[Ring]:
        return [r for rings in self.polygons for r in rings]

    def geojson(self) -> dict:
        coords = [[[list(p) for p in r] for r in rings] for rings in self.polygons]
        if len(coords) == 1:
            return {"type": "Polygon", "coordinates": coords[0]}
        return {"type": "MultiPolygon", "coordinates": coords}


@dataclass(frozen=True)
class SharedBorderTable:
    """Shared boundary length per unordered unit pair (``a < b``)."""

    entries: Mapping[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self):
        clean: dict[tuple[str, str], float] = {}
        for (a, b), length in self.entries.items():
            if a == b:
                raise GeometryError(f"border of unit {a!r} with itself")
            key = (a, b) if a < b else (b, a)
            if key in clean:
                raise GeometryError(f"border pair {key} listed twice")
            if not length > 0:
                raise GeometryError(f"border {key} has non-positive length {length}")
            clean[key] = float(length)
        object.__setattr__(self, "entries", dict(sorted(clean.items())))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[tuple[str, str]]:
        return iter(self.entries)

    def length(self, a: str, b: str) -> float:
        return self.entries.get((a, b) if a < b else (b, a), 0.0)

    @cached_property
    def units(self) -> frozenset[str]:
        return frozenset(u for pair in self.entries for u in pair)

    @cached_property
    def neighbours(self) -> dict[str, dict[str, float]]:
        adj: dict[str, dict[str, float]] = defaultdict(dict)
        for (a, b), length in self.entries.items():
            adj[a][b] = length
            adj[b][a] = length
        return dict(adj)

    def restrict(self, keep: Iterable[str]) -> "SharedBorderTable":
        keep = set(keep)
        return SharedBorderTable({k: w for k, w in self.entries.items() if k[0] in keep and k[1] in keep})


# -- preprocessing -------------------------------------------------------------


def _snap(p: Point, snap: float) -> tuple[int, int]:
    return (round(p[0] / snap), round(p[1] / snap))


def preprocess_geometry(
    features: Iterable[tuple[str, Iterable[Iterable[Sequence[Point]]]]],
    snap_tolerance: float = DEFAULT_SNAP,
) -> tuple[list[UnitGeometry], SharedBorderTable]:
    """Measure unit polygons and find the borders they share.

    ``features`` yields ``(unit_id, polygons)`` with polygons as lists of
    rings (exterior first). Returns the unit geometries in input order and
    the shared-border table.
    """
    if not snap_tolerance > 0:
        raise GeometryError("snap_tolerance must be positive")
    geoms: list[UnitGeometry] = []
    seen: set[str] = set()
    # segment key -> {unit: length}
    segments: dict[tuple[tuple[int, int], tuple[int, int]], dict[str, float]] = {}
    for unit, polygons in features:
        unit = str(unit)
        if not unit:
            raise GeometryError("feature with empty unit id")
        if unit in seen:
            raise GeometryError(f"duplicate unit id {unit!r}")
        seen.add(unit)
        geom = UnitGeometry.from_polygons(unit, polygons)
        geoms.append(geom)
        for ring in geom.rings:
            for p, q in zip(ring, ring[1:]):
                sp, sq = _snap(p, snap_tolerance), _snap(q, snap_tolerance)
                if sp == sq:
                    continue
                key = (sp, sq) if sp < sq else (sq, sp)
                owners = segments.setdefault(key, {})
                if unit not in owners:
                    if len(owners) == 2:
                        raise GeometryError(
                            f"segment {p} -> {q} is shared by more than two units: "
                            f"{sorted(owners)} and {unit!r}"
                        )
                    owners[unit] = math.hypot(q[0] - p[0], q[1] - p[1])

    pieces: dict[tuple[str, str], list[float]] = defaultdict(list)
    for owners in segments.values():
        if len(owners) == 2:
            (a, la), (b, lb) = sorted(owners.items())
            pieces[(a, b)].append((la + lb) / 2.0)
    borders = SharedBorderTable({k: math.fsum(v) for k, v in pieces.items()})

    if len(geoms) > 1:
        lonely = sorted(g.unit for g in geoms if g.unit not in borders.units)
        if lonely:
            warnings.warn(
                f"{len(lonely)} unit(s) share no border with any other unit at snap tolerance "
                f"{snap_tolerance:g}: {lonely[:10]}",
                GeometryWarning,
                stacklevel=2,
            )
    return geoms, borders


def _geojson_polygons(geometry: Mapping, unit: str) -> list[list[list[Point]]]:
    kind = geometry.get("type") if geometry else None
    if kind == "Polygon":
        return [geometry["coordinates"]]
    if kind == "MultiPolygon":
        return list(geometry["coordinates"])
    raise GeometryError(f"unit {unit!r}: unsupported geometry type {kind!r}")


def read_geojson(path: str | os.PathLike, id_property: str = "GEOID") -> Iterator[tuple[str, list]]:
    """Yield ``(unit_id, polygons)`` from a GeoJSON FeatureCollection."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("type") != "FeatureCollection":
        raise GeometryError(f"{path}: expected a FeatureCollection")
    for i, feature in enumerate(doc.get("features", [])):
        props = feature.get("properties") or {}
        if id_property not in props:
            raise GeometryError(f"{path}: feature {i} lacks id property {id_property!r}")
        unit = str(props[id_property])
        yield unit, _geojson_polygons(feature.get("geometry"), unit)


# -- metrics -------------------------------------------------------------------


def polsby_popper(area: float, perimeter: float) -> float:
    return 4.0 * math.pi * area / (perimeter * perimeter)


def avg_border_length(partition: Partition, borders: SharedBorderTable) -> tuple[float, float]:
    """Total border length between different regions, and that total per region."""
    assignment = partition.as_dict()
    missing = sorted(borders.units - assignment.keys())
    if missing:
        raise GeometryError(f"{len(missing)} unit(s) in the border table are not in the partition: {missing[:5]}")
    total = math.fsum(length for (a, b), length in borders.entries.items() if assignment[a] != assignment[b])
    regions = partition.n_communities
    return total, (total / regions if regions else 0.0)


def _region_area_perimeter(units: Sequence[str], geoms: Mapping[str, UnitGeometry], borders: SharedBorderTable):
    members = set(units)
    missing = sorted(u for u in members if u not in geoms)
    if missing:
        raise GeometryError(f"no geometry for unit(s) {missing[:5]}")
    area = math.fsum(geoms[u].area for u in members)
    outer = math.fsum(geoms[u].perimeter for u in members)
    nbrs = borders.neighbours
    inner = math.fsum(
        length for u in members for v, length in nbrs.get(u, {}).items() if u < v and v in members
    )
    return area, outer - 2.0 * inner


def check_border_consistency(
    geoms: Mapping[str, UnitGeometry], borders: SharedBorderTable, rel_tol: float = 1e-9
) -> None:
    """Each unit's shared borders must fit inside its perimeter."""
    for unit, nbrs in borders.neighbours.items():
        geom = geoms.get(unit)
        if geom is None:
            continue
        shared = math.fsum(nbrs.values())
        if shared > geom.perimeter * (1 + rel_tol):
            raise GeometryError(
                f"unit {unit!r}: shared borders total {shared:.6g} exceed its perimeter {geom.perimeter:.6g}"
            )


def compactness(
    region_units: Iterable[str],
    geoms: Mapping[str, UnitGeometry] | Iterable[UnitGeometry],
    borders: SharedBorderTable,
) -> float:
    """Polsby-Popper compactness ``4 pi A / P**2`` of a union of units."""
    units = list(region_units)
    if not units:
        raise GeometryError("empty region")
    area, perimeter = _region_area_perimeter(units, _geom_map(geoms), borders)
    return _checked_pp(area, perimeter, units)


def _checked_pp(area: float, perimeter: float, units) -> float:
    if not perimeter > 0:
        raise GeometryError(f"region {sorted(units)[:3]}: non-positive perimeter {perimeter}")
    pp = polsby_popper(area, perimeter)
    if pp > 1.0 + 1e-9:
        raise GeometryError(
            f"region {sorted(units)[:3]}: compactness {pp:.6f} exceeds 1; shared borders are inconsistent "
            "with unit perimeters"
        )
    return pp


def _geom_map(geoms) -> dict[str, UnitGeometry]:
    if isinstance(geoms, Mapping):
        return dict(geoms)
    return {g.unit: g for g in geoms}


@dataclass(frozen=True)
class RegionShape:
    community: int
    n_units: int
    area: float
    perimeter: float
    compactness: float


@dataclass
class RegionShapeReport:
    regions: list[RegionShape]
    region_count: int
    mean_compactness: float
    median_compactness: float
    total_border: float
    avg_border_per_region: float
    length_unit: str = "m"
    excluded_units: list[str] = field(default_factory=list)

    def as_dict(self, include_regions: bool = True) -> dict:
        out = {
            "region_count": self.region_count,
            "mean_compactness": self.mean_compactness,
            "median_compactness": self.median_compactness,
            "total_border": self.total_border,
            "avg_border_per_region": self.avg_border_per_region,
            "length_unit": self.length_unit,
            "excluded_units": list(self.excluded_units),
        }
        if include_regions:
            out["regions"] = [
                {
                    "community_id": r.community,
                    "n_units": r.n_units,
                    "area": r.area,
                    "perimeter": r.perimeter,
                    "compactness": r.compactness,
                }
                for r in self.regions
            ]
        return out


def partition_shape_report(
    partition: Partition,
    geoms: Mapping[str, UnitGeometry] | Iterable[UnitGeometry],
    borders: SharedBorderTable,
    length_unit: str = "m",
) -> RegionShapeReport:
    """Per-region compactness and partition-level border/compactness summaries.

    Units of the partition without geometry are left out with a warning;
    geometry for units outside the partition is ignored.
    """
    geoms = _geom_map(geoms)
    excluded = [u for u in partition.nodes if u not in geoms]
    if excluded:
        warnings.warn(
            f"{len(excluded)} unit(s) have no geometry and are excluded from spatial metrics: {excluded[:10]}",
            GeometryWarning,
            stacklevel=2,
        )
        if len(excluded) == partition.n_nodes:
            raise GeometryError("no unit of the partition has geometry")
        partition = partition.restrict(u for u in partition.nodes if u in geoms)
    borders = borders.restrict(partition.nodes)

    regions = []
    for c, units in enumerate(partition.groups()):
        area, perimeter = _region_area_perimeter(units, geoms, borders)
        regions.append(RegionShape(c, len(units), area, perimeter, _checked_pp(area, perimeter, units)))
    total, per_region = avg_border_length(partition, borders)
    scores = [r.compactness for r in regions]
    return RegionShapeReport(
        regions=regions,
        region_count=len(regions),
        mean_compactness=math.fsum(scores) / len(scores),
        median_compactness=statistics.median(scores),
        total_border=total,
        avg_border_per_region=per_region,
        length_unit=length_unit,
        excluded_units=excluded,
    )


# -- tables and export ---------------------------------------------------------


def write_adjacency_csv(borders: SharedBorderTable, path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["unit_a", "unit_b", "shared_length"])
        for (a, b), length in borders.entries.items():
            writer.writerow([a, b, repr(length)])


def read_adjacency_csv(path: str | os.PathLike) -> SharedBorderTable:
    entries: dict[tuple[str, str], float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _require(reader, path, ("unit_a", "unit_b", "shared_length"))
        for lineno, row in enumerate(reader, start=2):
            a, b = row["unit_a"].strip(), row["unit_b"].strip()
            key = (a, b) if a < b else (b, a)
            if key in entries:
                raise GeometryError(f"{path} line {lineno}: pair {key} listed twice")
            entries[key] = _number(row["shared_length"], path, lineno)
    return SharedBorderTable(entries)


def write_units_csv(geoms: Iterable[UnitGeometry], path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["unit_id", "area", "perimeter"])
        for g in sorted(geoms, key=lambda g: g.unit):
            writer.writerow([g.unit, repr(g.area), repr(g.perimeter)])


def read_units_csv(path: str | os.PathLike) -> dict[str, UnitGeometry]:
    out: dict[str, UnitGeometry] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _require(reader, path, ("unit_id", "area", "perimeter"))
        for lineno, row in enumerate(reader, start=2):
            unit = row["unit_id"].strip()
            if unit in out:
                raise GeometryError(f"{path} line {lineno}: duplicate unit {unit!r}")
            area = _number(row["area"], path, lineno)
            perimeter = _number(row["perimeter"], path, lineno)
            if not (area > 0 and perimeter > 0):
                raise GeometryError(f"{path} line {lineno}: area and perimeter must be positive")
            out[unit] = UnitGeometry(unit, area, perimeter)
    return out


def _require(reader: csv.DictReader, path, columns) -> None:
    missing = [c for c in columns if c not in (reader.fieldnames or [])]
    if missing:
        raise GeometryError(f"{path}: missing column(s) {missing}")


def _number(raw: str, path, lineno: int) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise GeometryError(f"{path} line {lineno}: not a number: {raw!r}") from None
    if not math.isfinite(value):
        raise GeometryError(f"{path} line {lineno}: not finite: {raw!r}")
    return value


def write_region_geojson(
    partition: Partition,
    geoms: Mapping[str, UnitGeometry] | Iterable[UnitGeometry],
    path: str | os.PathLike,
    length_unit: str = "m",
) -> int:
    """Write unit polygons tagged with their community id; returns the feature count."""
    geoms = _geom_map(geoms)
    features = []
    for unit, community in zip(partition.nodes, partition.labels):
        geom = geoms.get(unit)
        if geom is None or not geom.polygons:
            continue
        features.append(
            {
                "type": "Feature",
                "properties": {"unit_id": unit, "community_id": community},
                "geometry": geom.geojson(),
            }
        )
    doc = {
        "type": "FeatureCollection",
        "schema_version": GEOJSON_SCHEMA_VERSION,
        "length_unit": length_unit,
        "features": features,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")
    return len(features)
