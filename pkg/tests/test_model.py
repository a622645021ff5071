import hashlib
import shutil
import subprocess

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maritime_ledger.model import (
    SULFUR_REGULATION,
    DataPoint,
    Digest,
    EncodingError,
    GeoPosition,
    SensorReading,
    VesselIdentity,
    canonical_encode,
    decode_data_point,
    hash_data_point,
)

# Rendered by hand: imo, regulation, quantity-tagged value, time index, lat, lon.
EXPECTED_BYTES = (
    b"9074729" + b"\x1f" + b"MARPOL-VI-R14" + b"\x1f" + b"sulfur_pct:0.450000" + b"\x1f"
    + b"12" + b"\x1f" + b"57.000000" + b"\x1f" + b"20.000000"
)


def example_point(**kw):
    base = dict(vessel=9074729, regulation=SULFUR_REGULATION, value=0.45, timestamp=12,
                position=GeoPosition(57.0, 20.0))
    base.update(kw)
    return DataPoint(**base)


def test_example_bytes_match_hand_concatenation():
    assert canonical_encode(example_point()) == EXPECTED_BYTES


def test_digest_matches_external_sha256(tmp_path):
    digest = hash_data_point(example_point())
    assert digest.hex == hashlib.sha256(EXPECTED_BYTES).hexdigest()
    tool = shutil.which("sha256sum")
    if tool is None:
        pytest.skip("sha256sum not installed")
    blob = tmp_path / "point.bin"
    blob.write_bytes(EXPECTED_BYTES)
    out = subprocess.run([tool, str(blob)], capture_output=True, text=True, check=True).stdout
    assert out.split()[0] == digest.hex


def test_equal_points_encode_identically():
    assert canonical_encode(example_point()) == canonical_encode(example_point())
    assert hash_data_point(example_point()) == hash_data_point(example_point())


def test_timestamp_difference_changes_bytes():
    assert canonical_encode(example_point()) != canonical_encode(example_point(timestamp=13))


def test_regulation_change_changes_digest():
    assert hash_data_point(example_point()) != hash_data_point(example_point(regulation="MARPOL-VI-R15"))


@pytest.mark.parametrize(
    "kw",
    [
        {"regulation": "MARPOL\x1fVI"},
        {"timestamp": -1},
        {"value": float("nan")},
        {"value": float("inf")},
    ],
)
def test_encoding_errors(kw):
    with pytest.raises(EncodingError):
        canonical_encode(example_point(**kw))


def test_identity_rejects_separator_and_bad_imo():
    with pytest.raises(ValueError):
        VesselIdentity(9074729, "Acme\x1fShipping", "Panama")
    with pytest.raises(ValueError):
        VesselIdentity(123, "Acme", "Panama")


def test_position_range_checked():
    with pytest.raises(ValueError):
        GeoPosition(91.0, 0.0)
    with pytest.raises(ValueError):
        GeoPosition(0.0, 180.5)


def test_sensor_reading_is_plain_record():
    r = SensorReading("s1", 0.1, 3, 10800.0, float("inf"))
    assert r.time_index == 3


def test_random_distinct_points_never_collide():
    rng = np.random.default_rng(99)
    n = 100_000
    imos = rng.integers(1_000_000, 10_000_000, size=(n, 2))
    vals = np.round(rng.uniform(0, 5, size=(n, 2)), 6)
    ts = rng.integers(0, 1000, size=(n, 2))
    lats = np.round(rng.uniform(-90, 90, size=(n, 2)), 6)
    lons = np.round(rng.uniform(-180, 180, size=(n, 2)), 6)
    # force near-collisions: half the pairs share everything but one field
    same = rng.random(n) < 0.5
    field = rng.integers(0, 5, size=n)
    checked = 0
    for i in range(n):
        a, b = ([int(imos[i, j]), float(vals[i, j]), int(ts[i, j]), float(lats[i, j]), float(lons[i, j])] for j in (0, 1))
        if same[i]:
            a, b = a, a[: field[i]] + [b[field[i]]] + a[field[i] + 1:]
        if a == b:
            continue
        da = DataPoint(a[0], SULFUR_REGULATION, a[1], a[2], GeoPosition(a[3], a[4]))
        db = DataPoint(b[0], SULFUR_REGULATION, b[1], b[2], GeoPosition(b[3], b[4]))
        assert canonical_encode(da) != canonical_encode(db)
        checked += 1
    assert checked > 90_000


@given(st.binary(min_size=32, max_size=32))
def test_digest_hex_round_trip(raw):
    d = Digest(raw)
    assert Digest.from_hex(d.hex).raw == raw
    assert d.hex == d.hex.lower()


def test_digest_rejects_uppercase_hex():
    with pytest.raises(ValueError):
        Digest.from_hex("AB" * 32)


@given(
    st.integers(1_000_000, 9_999_999),
    st.floats(0, 5, allow_nan=False),
    st.integers(0, 10**9),
    st.floats(-90, 90, allow_nan=False),
    st.floats(-180, 180, allow_nan=False),
)
def test_encode_decode_round_trip(imo, value, t, lat, lon):
    d = DataPoint(imo, SULFUR_REGULATION, value, t, GeoPosition(lat, lon))
    assert canonical_encode(decode_data_point(canonical_encode(d))) == canonical_encode(d)
    back = decode_data_point(canonical_encode(d))
    assert back.value == round(value, 6)
    assert back.position.as_pair() == [round(lat, 6) + 0.0, round(lon, 6) + 0.0]
