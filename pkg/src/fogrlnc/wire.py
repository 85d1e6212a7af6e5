"""Binary codec for RLNC-CAM frames.

Layout (all integers big-endian)::

    offset  size  field
    0       1     protocol_version
    1       4     cam_id
    5       8     generation_timestamp   (ms since Unix epoch)
    13      4     station_id
    17      1     station_type
    18      4     latitude               (signed, 0.1 microdegree)
    22      4     longitude              (signed, 0.1 microdegree)
    26      4     elevation              (signed, cm)
    30      2     heading                (0.1 degree, 0..3599)
    32      1     tlv_count
    33      var   tlv_count x (type:1, length:2, value:length)
    +0      4     source_message_id
    +4      1     field_size_code        (log2(q) - 1, 0..7)
    +5      4     coding_seed
    +9      2     payload_length
    +11     var   coded_payload

A frame without TLVs and with an empty payload is 44 bytes long.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

MAX_FRAME = 2048

_HEAD = struct.Struct(">BIQIBiiiHB")
_RLNC = struct.Struct(">IBIH")
_TLV = struct.Struct(">BH")

#: Size of every fixed-width field, i.e. a frame with no TLVs and no payload.
FIXED_OVERHEAD = _HEAD.size + _RLNC.size

MAX_LATITUDE = 900_000_000
MAX_LONGITUDE = 1_800_000_000
MAX_HEADING = 3599


class StationType(IntEnum):
    OTHER = 0
    MOBILE = 1
    PUBLIC_AUTHORITY = 2
    PRIVATE = 3
    RSU = 4


class WireError(ValueError):
    """Base class for every encode/decode failure."""


class TruncationError(WireError):
    def __init__(self, offset: int, needed: int, available: int):
        super().__init__(f"truncated at byte {offset}: need {needed} bytes, {available} available")
        self.offset = offset


class FieldRangeError(WireError):
    def __init__(self, name: str, value, detail: str = ""):
        super().__init__(f"{name}={value!r} out of range{': ' + detail if detail else ''}")
        self.field = name


class TrailingBytesError(WireError):
    def __init__(self, offset: int, extra: int):
        super().__init__(f"{extra} trailing bytes after frame end at byte {offset}")
        self.offset = offset


class FrameTooLongError(WireError):
    pass


@dataclass(frozen=True)
class Tlv:
    type: int
    value: bytes


@dataclass(frozen=True)
class RlncCam:
    protocol_version: int
    cam_id: int
    generation_timestamp: int
    station_id: int
    station_type: StationType
    latitude: int
    longitude: int
    elevation: int
    heading: int
    source_message_id: int
    field_size_code: int
    coding_seed: int
    coded_payload: bytes = b""
    optional_attributes: tuple[Tlv, ...] = ()

    @property
    def q(self) -> int:
        return 2 ** (self.field_size_code + 1)

    @property
    def dedup_key(self) -> tuple[int, int, int]:
        return (self.station_id, self.source_message_id, self.coding_seed)

    def serialized_length(self) -> int:
        return frame_length(len(self.coded_payload), self.optional_attributes)


def field_size_code(q: int) -> int:
    """``log2(q) - 1`` for q in {2, 4, ..., 256}."""
    if q < 2 or q & (q - 1) or q > 256:
        raise FieldRangeError("q", q, "must be a power of two in 2..256")
    return q.bit_length() - 2


def frame_length(payload_len: int, attributes=()) -> int:
    return FIXED_OVERHEAD + sum(_TLV.size + len(t.value) for t in attributes) + payload_len


def _unsigned(name: str, value, bits: int) -> None:
    if not isinstance(value, int) or not 0 <= value < 1 << bits:
        raise FieldRangeError(name, value, f"must be a {bits}-bit unsigned integer")


def _bounded(name: str, value, limit: int) -> None:
    if not isinstance(value, int) or not -limit <= value <= limit:
        raise FieldRangeError(name, value, f"must lie in [-{limit}, {limit}]")


def validate(msg: RlncCam) -> None:
    _unsigned("protocol_version", msg.protocol_version, 8)
    _unsigned("cam_id", msg.cam_id, 32)
    _unsigned("generation_timestamp", msg.generation_timestamp, 64)
    _unsigned("station_id", msg.station_id, 32)
    if msg.station_type not in StationType.__members__.values():
        raise FieldRangeError("station_type", msg.station_type)
    _bounded("latitude", msg.latitude, MAX_LATITUDE)
    _bounded("longitude", msg.longitude, MAX_LONGITUDE)
    _bounded("elevation", msg.elevation, 2**31 - 1)
    if not isinstance(msg.heading, int) or not 0 <= msg.heading <= MAX_HEADING:
        raise FieldRangeError("heading", msg.heading, f"must lie in [0, {MAX_HEADING}]")
    if len(msg.optional_attributes) > 255:
        raise FieldRangeError("optional_attributes", len(msg.optional_attributes), "at most 255 TLVs")
    for tlv in msg.optional_attributes:
        _unsigned("optional_attributes.type", tlv.type, 8)
        if len(tlv.value) > 0xFFFF:
            raise FieldRangeError("optional_attributes.length", len(tlv.value))
    _unsigned("source_message_id", msg.source_message_id, 32)
    if not isinstance(msg.field_size_code, int) or not 0 <= msg.field_size_code <= 7:
        raise FieldRangeError("field_size_code", msg.field_size_code, "must lie in [0, 7]")
    _unsigned("coding_seed", msg.coding_seed, 32)
    if len(msg.coded_payload) > 0xFFFF:
        raise FieldRangeError("coded_payload", len(msg.coded_payload))
    total = msg.serialized_length()
    if total > MAX_FRAME:
        raise FrameTooLongError(f"frame is {total} bytes, limit is {MAX_FRAME}")


def serialize(msg: RlncCam) -> bytes:
    validate(msg)
    parts = [
        _HEAD.pack(
            msg.protocol_version,
            msg.cam_id,
            msg.generation_timestamp,
            msg.station_id,
            int(msg.station_type),
            msg.latitude,
            msg.longitude,
            msg.elevation,
            msg.heading,
            len(msg.optional_attributes),
        )
    ]
    for tlv in msg.optional_attributes:
        parts.append(_TLV.pack(tlv.type, len(tlv.value)))
        parts.append(bytes(tlv.value))
    parts.append(_RLNC.pack(msg.source_message_id, msg.field_size_code, msg.coding_seed, len(msg.coded_payload)))
    parts.append(bytes(msg.coded_payload))
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        available = len(self.buf) - self.pos
        if n > available:
            raise TruncationError(self.pos, n, available)
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, st: struct.Struct) -> tuple:
        return st.unpack(self.take(st.size))


def parse(data: bytes) -> RlncCam:
    """Decode one frame. Raises :class:`WireError` on any malformed input."""
    try:
        buf = bytes(data)
    except TypeError as exc:
        raise WireError(f"cannot read frame bytes: {exc}") from None
    if len(buf) > MAX_FRAME:
        raise FrameTooLongError(f"frame is {len(buf)} bytes, limit is {MAX_FRAME}")
    r = _Reader(buf)
    (version, cam_id, ts, station_id, station_type, lat, lon, elev, heading, n_tlv) = r.unpack(_HEAD)
    try:
        station_type = StationType(station_type)
    except ValueError:
        raise FieldRangeError("station_type", station_type) from None
    tlvs = []
    for _ in range(n_tlv):
        t, length = r.unpack(_TLV)
        tlvs.append(Tlv(t, r.take(length)))
    msg_id, code, seed, plen = r.unpack(_RLNC)
    payload = r.take(plen)
    if r.pos != len(buf):
        raise TrailingBytesError(r.pos, len(buf) - r.pos)
    msg = RlncCam(
        protocol_version=version,
        cam_id=cam_id,
        generation_timestamp=ts,
        station_id=station_id,
        station_type=station_type,
        latitude=lat,
        longitude=lon,
        elevation=elev,
        heading=heading,
        source_message_id=msg_id,
        field_size_code=code,
        coding_seed=seed,
        coded_payload=payload,
        optional_attributes=tuple(tlvs),
    )
    validate(msg)
    return msg
