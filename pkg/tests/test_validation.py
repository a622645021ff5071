import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maritime_ledger.model import SULFUR_REGULATION, DataPoint, GeoPosition, SensorReading
from maritime_ledger.validation import (
    ConsistencyConfig,
    ConsistencyTracker,
    Reason,
    ValidationRules,
    mark_suspect,
    pair_consistency,
    validate,
    window_score,
)

RULES = ValidationRules()
NOW = 12 * 3600.0


def reading(value=0.45, k=12, wall=NOW, expiry=math.inf, sid="s1"):
    point = DataPoint(9074729, SULFUR_REGULATION, value if math.isfinite(value) else 0.0, k, GeoPosition(57.0, 20.0))
    return point, SensorReading(sid, value, k, wall, expiry)


def test_in_range_reading_is_valid():
    v = validate(*reading(0.45), RULES, NOW)
    assert v.valid and v.reason is Reason.OK


def test_physically_impossible_value_is_out_of_range():
    v = validate(*reading(7.0), RULES, NOW)
    assert not v.valid and v.reason is Reason.OUT_OF_RANGE


def test_expired_calibration():
    v = validate(*reading(expiry=NOW - 1), RULES, NOW)
    assert v.reason is Reason.CALIBRATION_EXPIRED
    relaxed = ValidationRules(calibration_required=False)
    assert validate(*reading(expiry=NOW - 1), relaxed, NOW).valid


def test_stale_clock():
    assert validate(*reading(wall=NOW + 301), RULES, NOW).reason is Reason.STALE_CLOCK
    assert validate(*reading(wall=NOW + 300), RULES, NOW).valid


def test_malformed_cases():
    assert validate(*reading(float("nan")), RULES, NOW).reason is Reason.MALFORMED
    point, r = reading()
    mismatched = SensorReading(r.sensor_id, r.value, 13, r.wall_time, r.calibration_expiry)
    assert validate(point, mismatched, RULES, NOW).reason is Reason.MALFORMED
    assert validate(point, r, RULES, NOW, last_time_index=13).reason is Reason.MALFORMED
    assert validate(point, r, RULES, NOW, last_time_index=12).valid


def test_reason_priority_order():
    # every rule broken at once: malformed wins, then out_of_range, then calibration
    assert validate(*reading(float("inf"), wall=0, expiry=0), RULES, NOW).reason is Reason.MALFORMED
    assert validate(*reading(7.0, wall=0, expiry=0), RULES, NOW).reason is Reason.OUT_OF_RANGE
    assert validate(*reading(0.1, wall=0, expiry=0), RULES, NOW).reason is Reason.CALIBRATION_EXPIRED


def test_rules_invariants():
    with pytest.raises(ValueError):
        ValidationRules(value_min=2, value_max=1)
    with pytest.raises(ValueError):
        ValidationRules(max_clock_skew=-1)
    with pytest.raises(ValueError):
        ConsistencyConfig(gamma=1.5)
    with pytest.raises(ValueError):
        ConsistencyConfig(window_length=0)


def test_pair_consistency_examples():
    assert pair_consistency(0.3, 0.3, 0.0) == 1
    assert pair_consistency(0.25, 0.5, 0.25) == 1
    assert pair_consistency(0.10, 0.30, 0.05) == 0
    assert pair_consistency(0.10, 0.08, 0.02) == 1  # 0.020000000000000004 in binary
    assert pair_consistency(0.10, 0.079999, 0.02) == 0


def test_window_score_examples():
    assert window_score([1] * 10) == 1.0
    assert window_score((1, 0, 1, 0)) == 0.5
    with pytest.raises(ValueError):
        window_score([])


def test_window_score_matches_brute_force_mean():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        bits = rng.integers(0, 2, size=int(rng.integers(1, 50))).tolist()
        total = 0
        for b in bits:
            total += b
        assert window_score(bits) == pytest.approx(total / len(bits), abs=1e-12)


def test_mark_suspect_threshold_is_strict():
    assert not mark_suspect(1.0, 0.8)
    assert mark_suspect(0.5, 0.8)
    assert not mark_suspect(0.8, 0.8)


@given(st.lists(st.integers(0, 1), min_size=1, max_size=40), st.randoms())
def test_window_score_permutation_invariant(bits, rnd):
    shuffled = list(bits)
    rnd.shuffle(shuffled)
    assert window_score(shuffled) == pytest.approx(window_score(bits), abs=1e-12)


@given(
    st.floats(0, 5, allow_nan=False),
    st.floats(0, 5, allow_nan=False),
    st.floats(0, 1, allow_nan=False),
    st.floats(0, 1, allow_nan=False),
)
def test_pair_consistency_monotone_in_epsilon(a, b, e1, e2):
    lo, hi = sorted((e1, e2))
    assert pair_consistency(a, b, hi) >= pair_consistency(a, b, lo)


def test_tracker_flags_only_the_disagreeing_pair():
    tracker = ConsistencyTracker(ConsistencyConfig(epsilon=0.02, gamma=0.8, window_length=4))
    assert tracker.excluded({"a": 0.08, "b": 0.08}) == set()
    # b drifts away from a: single window of length 2 has score 0.5 < 0.8
    assert tracker.excluded({"a": 0.08, "b": 0.30}) == {"a", "b"}
    assert tracker.window("b", "a") == (1, 0)


def test_third_concordant_sensor_rehabilitates_in_later_windows():
    tracker = ConsistencyTracker(ConsistencyConfig(epsilon=0.02, gamma=0.8, window_length=4))
    tracker.excluded({"a": 0.08, "b": 0.08, "c": 0.08})
    # c goes bad: (a,c) and (b,c) are freshly flagged, so all their members go
    assert tracker.excluded({"a": 0.08, "b": 0.08, "c": 0.5}) == {"a", "b", "c"}
    # still flagged next window, but a and b agree with each other
    assert tracker.excluded({"a": 0.08, "b": 0.08, "c": 0.5}) == {"c"}


@given(
    st.dictionaries(
        st.sampled_from(["s1", "s2", "s3", "s4"]),
        st.lists(st.floats(0, 1, allow_nan=False), min_size=6, max_size=6),
        min_size=2,
    )
)
def test_exclusion_never_touches_unflagged_sensors(series):
    cfg = ConsistencyConfig(epsilon=0.05, gamma=0.8, window_length=3)
    tracker = ConsistencyTracker(cfg)
    for k in range(6):
        readings = {sid: vals[k] for sid, vals in series.items()}
        scores = _clone(tracker).observe(readings)
        flagged_members = {sid for pair, s in scores.items() if s < cfg.gamma for sid in pair}
        assert tracker.excluded(readings) <= flagged_members


def _clone(tracker):
    twin = ConsistencyTracker(tracker.config)
    twin._windows = {k: type(v)(v, maxlen=v.maxlen) for k, v in tracker._windows.items()}
    return twin
