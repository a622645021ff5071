"""Domain values shared across the package, plus canonical encoding and hashing.

Everything here is an immutable value. Numeric fields are quantized to six
decimals when constructed so that equality of values and equality of their
canonical byte encodings coincide.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field

SEPARATOR = b"\x1f"
DECIMALS = 6

SULFUR_REGULATION = "MARPOL-VI-R14"


class EncodingError(ValueError):
    """A data point cannot be rendered into its canonical byte form."""


class Quantity(str, enum.Enum):
    SULFUR_PERCENT = "sulfur_pct"


def quantize(x: float) -> float:
    # `+ 0.0` folds -0.0 into 0.0 so both render identically
    return round(float(x), DECIMALS) + 0.0


@dataclass(frozen=True)
class GeoPosition:
    latitude: float
    longitude: float

    def __post_init__(self):
        lat, lon = float(self.latitude), float(self.longitude)
        if not (math.isfinite(lat) and -90.0 <= lat <= 90.0):
            raise ValueError(f"latitude out of range: {self.latitude!r}")
        if not (math.isfinite(lon) and -180.0 <= lon <= 180.0):
            raise ValueError(f"longitude out of range: {self.longitude!r}")
        object.__setattr__(self, "latitude", quantize(lat))
        object.__setattr__(self, "longitude", quantize(lon))

    def as_pair(self) -> list[float]:
        return [self.latitude, self.longitude]


@dataclass(frozen=True)
class VesselIdentity:
    imo_number: int
    owner: str
    flag_state: str

    def __post_init__(self):
        if not is_imo_number(self.imo_number):
            raise ValueError(f"not a 7-digit IMO number: {self.imo_number!r}")
        for name in ("owner", "flag_state"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value:
                raise ValueError(f"{name} must be a non-empty string")
            if "\x1f" in value:
                raise ValueError(f"{name} contains the reserved separator byte")


def is_imo_number(n) -> bool:
    return isinstance(n, int) and not isinstance(n, bool) and 1_000_000 <= n <= 9_999_999


@dataclass(frozen=True)
class SensorReading:
    """One raw sample as delivered by a shipboard sensor.

    Readings are raw input, so nothing is rejected here; a non-finite value or
    an expired calibration is reported later by `validation.validate`.
    """

    sensor_id: str
    value: float
    time_index: int
    wall_time: float
    calibration_expiry: float
    quantity: Quantity = Quantity.SULFUR_PERCENT


@dataclass(frozen=True)
class DataPoint:
    vessel: int
    regulation: str
    value: float
    timestamp: int
    position: GeoPosition
    quantity: Quantity = Quantity.SULFUR_PERCENT

    def __post_init__(self):
        v = float(self.value)
        if math.isfinite(v):
            object.__setattr__(self, "value", quantize(v))


@dataclass(frozen=True)
class Digest:
    raw: bytes = field(repr=False)

    def __post_init__(self):
        if not isinstance(self.raw, bytes) or len(self.raw) != 32:
            raise ValueError("digest must be exactly 32 bytes")

    @property
    def hex(self) -> str:
        return self.raw.hex()

    @classmethod
    def from_hex(cls, text: str) -> "Digest":
        # only the lowercase rendering is canonical
        if len(text) != 64 or any(c not in "0123456789abcdef" for c in text):
            raise ValueError(f"not a lowercase 64-char hex digest: {text!r}")
        return cls(bytes.fromhex(text))

    @classmethod
    def of(cls, data: bytes) -> "Digest":
        return cls(hashlib.sha256(data).digest())

    def __str__(self) -> str:
        return self.hex

    def __repr__(self) -> str:
        return f"Digest({self.hex[:12]}...)"


ZERO_DIGEST = Digest(bytes(32))


def _fixed(x: float) -> str:
    return f"{x:.{DECIMALS}f}"


def _text_field(name: str, value: str) -> bytes:
    raw = value.encode("utf-8")
    if SEPARATOR in raw:
        raise EncodingError(f"{name} contains the reserved separator byte 0x1f")
    return raw


def canonical_encode(d: DataPoint) -> bytes:
    """Render `d` as ``vessel | regulation | status | timestamp | lat | lon``.

    Fields are joined by 0x1F. Status is ``<quantity>:<value>`` and every real
    number uses six fixed decimals.
    """
    if not is_imo_number(d.vessel):
        raise EncodingError(f"vessel is not a 7-digit IMO number: {d.vessel!r}")
    if isinstance(d.timestamp, bool) or not isinstance(d.timestamp, int) or d.timestamp < 0:
        raise EncodingError(f"timestamp must be a non-negative integer: {d.timestamp!r}")
    if not math.isfinite(d.value):
        raise EncodingError(f"status value is not finite: {d.value!r}")
    if not d.regulation:
        raise EncodingError("regulation is empty")
    quantity = Quantity(d.quantity).value
    parts = [
        str(d.vessel).encode("ascii"),
        _text_field("regulation", d.regulation),
        f"{quantity}:{_fixed(d.value)}".encode("ascii"),
        str(d.timestamp).encode("ascii"),
        _fixed(d.position.latitude).encode("ascii"),
        _fixed(d.position.longitude).encode("ascii"),
    ]
    return SEPARATOR.join(parts)


def decode_data_point(data: bytes) -> DataPoint:
    """Inverse of `canonical_encode`."""
    try:
        vessel, regulation, status, timestamp, lat, lon = data.split(SEPARATOR)
        quantity, value = status.decode("ascii").split(":")
        return DataPoint(
            vessel=int(vessel),
            regulation=regulation.decode("utf-8"),
            value=float(value),
            timestamp=int(timestamp),
            position=GeoPosition(float(lat), float(lon)),
            quantity=Quantity(quantity),
        )
    except ValueError as exc:
        raise EncodingError(f"cannot decode data point: {exc}") from exc


def hash_data_point(d: DataPoint) -> Digest:
    return Digest.of(canonical_encode(d))
