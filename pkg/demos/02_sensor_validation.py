"""
Range checks and cross-sensor consistency
=========================================

Readings outside physical bounds are dropped. Redundant sensors are compared
pairwise over a trailing window, and a pair that agrees too rarely is set
aside.
"""

import math

from maritime_ledger import (
    SULFUR_REGULATION,
    ConsistencyConfig,
    ConsistencyTracker,
    DataPoint,
    GeoPosition,
    SensorReading,
    ValidationRules,
    validate,
)

rules = ValidationRules(value_min=0.0, value_max=5.0)
pos = GeoPosition(56.0, 19.0)

for value in (0.08, 7.0):
    d = DataPoint(9074729, SULFUR_REGULATION, value, 0, pos)
    r = SensorReading("s1", value, 0, 0.0, math.inf)
    print(value, validate(d, r, rules, now=0.0))

# three sensors; s3 sticks at 0.30 from hour 4 to hour 7
tracker = ConsistencyTracker(ConsistencyConfig(epsilon=0.02, gamma=0.8, window_length=4))
for k in range(10):
    s3 = 0.30 if 4 <= k < 7 else 0.08
    dropped = tracker.excluded({"s1": 0.08, "s2": 0.08, "s3": s3})
    print(f"hour {k}: s3={s3:.2f} window(s1,s3)={tracker.window('s1', 's3')} dropped={sorted(dropped)}")
