import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maritime_ledger.geofence import (
    DEFAULT_ATLAS,
    AtlasError,
    EcaAtlas,
    EcaRegion,
    is_in_eca,
    load_atlas,
    point_in_polygon,
)
from maritime_ledger.model import GeoPosition


def winding_oracle(lat, lon, verts):
    """Winding number with an explicit boundary test; independent of ray casting."""
    n = len(verts)
    for i in range(n):
        (ax, ay), (bx, by) = verts[i], verts[(i + 1) % n]
        cross = (bx - ax) * (lon - ay) - (by - ay) * (lat - ax)
        if abs(cross) < 1e-12 and min(ax, bx) <= lat <= max(ax, bx) and min(ay, by) <= lon <= max(ay, by):
            return True
    wn = 0
    for i in range(n):
        (ax, ay), (bx, by) = verts[i], verts[(i + 1) % n]
        side = (bx - ax) * (lon - ay) - (by - ay) * (lat - ax)
        if ax <= lat < bx and side > 0:
            wn += 1
        elif bx <= lat < ax and side < 0:
            wn -= 1
    return wn != 0


def baltic():
    return next(r for r in DEFAULT_ATLAS.regions if r.name == "Baltic Sea")


def test_baltic_interior_point():
    p = GeoPosition(56.0, 19.0)
    assert winding_oracle(56.0, 19.0, baltic().vertices)
    assert is_in_eca(p, DEFAULT_ATLAS) == (True, "Baltic Sea")


def test_mid_pacific_outside():
    assert not any(winding_oracle(0.0, -150.0, r.vertices) for r in DEFAULT_ATLAS.regions)
    assert is_in_eca(GeoPosition(0.0, -150.0), DEFAULT_ATLAS) == (False, None)


def test_vertex_and_edge_count_as_inside():
    for lat, lon in baltic().vertices:
        assert baltic().contains(GeoPosition(lat, lon))
    (a_lat, a_lon), (b_lat, b_lon) = baltic().vertices[:2]
    assert point_in_polygon((a_lat + b_lat) / 2, (a_lon + b_lon) / 2, baltic().vertices)


def test_agrees_with_oracle_on_random_points():
    rng = np.random.default_rng(11)
    concave = [(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (5.0, 4.0), (0.0, 10.0)]
    polys = [r.vertices for r in DEFAULT_ATLAS.regions] + [concave]
    for verts in polys:
        lats = [v[0] for v in verts]
        lons = [v[1] for v in verts]
        for lat, lon in zip(
            rng.uniform(min(lats) - 5, max(lats) + 5, 2000), rng.uniform(min(lons) - 5, max(lons) + 5, 2000)
        ):
            assert point_in_polygon(lat, lon, verts) == winding_oracle(lat, lon, verts)


@given(st.integers(0, 4), st.floats(-1, 11, allow_nan=False), st.floats(-1, 11, allow_nan=False))
def test_rotation_invariance(shift, lat, lon):
    verts = [(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (5.0, 4.0), (0.0, 10.0)]
    rotated = verts[shift:] + verts[:shift]
    assert point_in_polygon(lat, lon, verts) == point_in_polygon(lat, lon, rotated)


@given(st.lists(st.tuples(st.floats(-60, 60), st.floats(-170, 170)), min_size=3, max_size=12, unique=True))
def test_centroid_of_convex_hull_is_inside(points):
    hull = _convex_hull(points)
    if len(hull) < 3:
        return
    clat = sum(p[0] for p in hull) / len(hull)
    clon = sum(p[1] for p in hull) / len(hull)
    assert point_in_polygon(clat, clon, hull)


def _convex_hull(points):
    pts = sorted(set(points))

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 1e-9:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 1e-9:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def test_malformed_regions_fail_at_construction():
    with pytest.raises(AtlasError):
        EcaRegion.from_pairs("two", [(0, 0), (1, 1)])
    with pytest.raises(AtlasError):
        EcaRegion.from_pairs("bowtie", [(0, 0), (10, 10), (10, 0), (0, 10)])
    with pytest.raises(AtlasError):
        EcaRegion.from_pairs("line", [(0, 0), (1, 1), (2, 2)])
    sq = EcaRegion.from_pairs("sq", [(0, 0), (0, 1), (1, 1), (1, 0)])
    with pytest.raises(AtlasError):
        EcaAtlas((sq, sq))


def test_atlas_file_round_trip(tmp_path):
    path = tmp_path / "atlas.json"
    path.write_text(json.dumps(DEFAULT_ATLAS.to_dict()))
    assert load_atlas(path) == DEFAULT_ATLAS
    path.write_text(json.dumps({"regions": [{"name": "x", "vertices": [[0, 0], [1, 1]]}]}))
    with pytest.raises(AtlasError):
        load_atlas(path)
