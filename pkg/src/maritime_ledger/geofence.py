"""Emission Control Area containment.

Planar even-odd ray casting on (lat, lon) vertices; a point on an edge or a
vertex counts as inside, so the stricter limit applies at the boundary.

The default atlas is four coarse rectangles standing in for the Baltic Sea,
North Sea, North American and US Caribbean ECAs. They are simulation
stand-ins, not regulatory boundaries. Polygons crossing the antimeridian
must be split by the atlas author.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .model import GeoPosition


class AtlasError(ValueError):
    """An ECA atlas or region definition is malformed."""


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(p, a, b) -> bool:
    return (
        _orient(a, b, p) == 0
        and min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
        and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])
    )


def _segments_intersect(p1, p2, q1, q2) -> bool:
    d1, d2 = _orient(q1, q2, p1), _orient(q1, q2, p2)
    d3, d4 = _orient(p1, p2, q1), _orient(p1, p2, q2)
    if d1 * d2 < 0 and d3 * d4 < 0:
        return True
    return (
        _on_segment(p1, q1, q2)
        or _on_segment(p2, q1, q2)
        or _on_segment(q1, p1, p2)
        or _on_segment(q2, p1, p2)
    )


def _is_simple(pts: Sequence[tuple[float, float]]) -> bool:
    n = len(pts)
    if len(set(pts)) != n:
        return False
    edges = [(pts[i], pts[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            # adjacent edges share exactly one vertex by construction
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_intersect(*edges[i], *edges[j]):
                return False
    # degenerate: every vertex collinear
    return any(_orient(pts[0], pts[1], pts[k]) != 0 for k in range(2, n))


def point_in_polygon(lat: float, lon: float, vertices: Sequence[tuple[float, float]]) -> bool:
    p = (lat, lon)
    n = len(vertices)
    inside = False
    for i in range(n):
        a, b = vertices[i], vertices[(i + 1) % n]
        if _on_segment(p, a, b):
            return True
        # ray towards +lon; half-open rule on lat avoids double counting vertices
        if (a[0] > lat) != (b[0] > lat):
            cross_lon = a[1] + (lat - a[0]) * (b[1] - a[1]) / (b[0] - a[0])
            if lon < cross_lon:
                inside = not inside
    return inside


@dataclass(frozen=True)
class EcaRegion:
    name: str
    polygon: tuple[GeoPosition, ...]

    def __post_init__(self):
        if not self.name:
            raise AtlasError("region name must be non-empty")
        poly = tuple(self.polygon)
        if len(poly) < 3:
            raise AtlasError(f"region {self.name!r}: polygon needs at least 3 vertices")
        object.__setattr__(self, "polygon", poly)
        if not _is_simple(self.vertices):
            raise AtlasError(f"region {self.name!r}: polygon is not simple")

    @property
    def vertices(self) -> list[tuple[float, float]]:
        return [(v.latitude, v.longitude) for v in self.polygon]

    def contains(self, p: GeoPosition) -> bool:
        return point_in_polygon(p.latitude, p.longitude, self.vertices)

    @classmethod
    def from_pairs(cls, name: str, pairs) -> "EcaRegion":
        try:
            poly = tuple(GeoPosition(float(lat), float(lon)) for lat, lon in pairs)
        except (TypeError, ValueError) as exc:
            raise AtlasError(f"region {name!r}: bad vertex list: {exc}") from exc
        return cls(name, poly)


@dataclass(frozen=True)
class EcaAtlas:
    regions: tuple[EcaRegion, ...]

    def __post_init__(self):
        regions = tuple(self.regions)
        names = [r.name for r in regions]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise AtlasError(f"duplicate region names: {dupes}")
        object.__setattr__(self, "regions", regions)

    def to_dict(self) -> dict:
        return {"regions": [{"name": r.name, "vertices": [v.as_pair() for v in r.polygon]} for r in self.regions]}

    @classmethod
    def from_dict(cls, doc) -> "EcaAtlas":
        if not isinstance(doc, dict) or not isinstance(doc.get("regions"), list):
            raise AtlasError("atlas document must be an object with a 'regions' list")
        regions = []
        for i, item in enumerate(doc["regions"]):
            if not isinstance(item, dict) or "name" not in item or "vertices" not in item:
                raise AtlasError(f"regions[{i}] needs 'name' and 'vertices'")
            regions.append(EcaRegion.from_pairs(item["name"], item["vertices"]))
        return cls(tuple(regions))


def load_atlas(path) -> EcaAtlas:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise AtlasError(f"{path}: invalid JSON: {exc}") from exc
    return EcaAtlas.from_dict(doc)


def is_in_eca(p: GeoPosition, atlas: EcaAtlas) -> tuple[bool, str | None]:
    for region in atlas.regions:
        if region.contains(p):
            return True, region.name
    return False, None


def _box(name, lat_lo, lat_hi, lon_lo, lon_hi) -> EcaRegion:
    return EcaRegion.from_pairs(
        name, [(lat_lo, lon_lo), (lat_lo, lon_hi), (lat_hi, lon_hi), (lat_hi, lon_lo)]
    )


DEFAULT_ATLAS = EcaAtlas(
    (
        _box("Baltic Sea", 53.5, 66.0, 9.5, 30.5),
        _box("North Sea", 50.0, 62.0, -4.0, 9.0),
        _box("North American", 24.0, 48.0, -82.0, -60.0),
        _box("US Caribbean", 16.5, 19.5, -68.5, -63.5),
    )
)
