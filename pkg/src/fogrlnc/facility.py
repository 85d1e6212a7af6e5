"""RLNC facility sublayer: sensor byte stream in, RLNC-CAM schedule out.

The stream is cut into generations of ``K`` source packets. Each generation
is announced with ``N`` coded packets, one per :meth:`RlncStream.tick`, with
no feedback from receivers. Emission is driven by the host clock so the
module stays deterministic.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

from . import wire
from .gf import FieldSpec
from .rlnc import MASK32, ZERO_SEED_REMAP, Generation, encode, generation_capacity, pack_symbols, segment

DEFAULT_CAM_INTERVAL_MS = 10
DEFAULT_FRAME_BUDGET = wire.MAX_FRAME
PROTOCOL_VERSION = 1


@dataclass(frozen=True)
class Position:
    """Kinematic fields of a CAM, already in wire units."""

    latitude: int = 0
    longitude: int = 0
    elevation: int = 0
    heading: int = 0


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FacilityConfig:
    K: int
    N: int
    field: FieldSpec
    station_id: int = 0
    station_type: wire.StationType = wire.StationType.MOBILE
    cam_interval_ms: int = DEFAULT_CAM_INTERVAL_MS
    frame_budget: int = DEFAULT_FRAME_BUDGET
    attributes: tuple = ()
    position_source: Optional[Callable[[int], Position]] = dc_field(default=None, compare=False)
    # added to every derived seed; lets Monte Carlo trials draw fresh coding vectors
    seed_salt: int = 0

    def __post_init__(self):
        if not 1 <= self.K <= self.N:
            raise ConfigError(f"need N >= K >= 1, got K={self.K} N={self.N}")
        if self.cam_interval_ms <= 0:
            raise ConfigError("cam_interval_ms must be positive")
        if not 0 <= self.station_id <= MASK32:
            raise ConfigError("station_id must fit in 32 bits")
        if self.frame_budget > wire.MAX_FRAME:
            raise ConfigError(f"frame_budget exceeds the {wire.MAX_FRAME}-byte frame limit")
        derive_payload_length(self)

    @property
    def L(self) -> int:
        return derive_payload_length(self)

    @property
    def generation_bytes(self) -> int:
        return generation_capacity(self.K, self.L, self.field)


def derive_payload_length(config: FacilityConfig) -> int:
    """Largest symbol count whose frame still fits in ``frame_budget``."""
    room = config.frame_budget - wire.frame_length(0, config.attributes)
    room = min(room, 0xFFFF)
    L = room * 8 // config.field.m if room > 0 else 0
    if L < 1:
        raise ConfigError(
            f"frame_budget {config.frame_budget} leaves no room for a payload "
            f"(fixed overhead {wire.frame_length(0, config.attributes)} bytes)"
        )
    return L


def derive_seed(station_id: int, message_id: int, j: int, salt: int = 0) -> int:
    """Coding seed of the ``j``-th (1-based) coded packet of a message."""
    seed = (station_id * 0x9E3779B1 + message_id * 0x85EBCA6B + j * 0xC2B2AE35 + salt) & MASK32
    return seed or ZERO_SEED_REMAP


class RlncStream:
    """Per-vehicle encoder state. Single writer: serialise push/tick calls."""

    def __init__(self, config: FacilityConfig):
        self.config = config
        self.pending = bytearray()
        self.ready: deque[Generation] = deque()
        self.next_message_id = 0
        self.current: Generation | None = None
        self.j = 1
        self.cam_count = 0
        #: 1-based index within its message of the frame most recently emitted
        self.last_index = 0

    def _enqueue(self, chunk: bytes) -> None:
        c = self.config
        gen = segment(chunk, c.K, c.L, c.field, message_id=self.next_message_id)
        self.ready.append(gen)
        self.next_message_id = (self.next_message_id + 1) & MASK32

    def push(self, data: bytes) -> None:
        """Buffer sensor bytes; every full generation's worth is queued."""
        self.pending += data
        size = self.config.generation_bytes
        while len(self.pending) >= size:
            self._enqueue(bytes(self.pending[:size]))
            del self.pending[:size]

    def flush(self) -> None:
        """Queue any buffered remainder as a zero-padded generation."""
        if self.pending:
            self._enqueue(bytes(self.pending))
            self.pending.clear()

    @property
    def idle(self) -> bool:
        return self.current is None and not self.ready

    def tick(self, now_ms: int, position: Position | None = None) -> wire.RlncCam | None:
        """Emit the next coded packet, or None when nothing is queued."""
        if self.current is None:
            if not self.ready:
                return None
            self.current = self.ready.popleft()
            self.j = 1
        c = self.config
        gen = self.current
        if position is None:
            position = c.position_source(now_ms) if c.position_source else Position()
        seed = derive_seed(c.station_id, gen.message_id, self.j, c.seed_salt)
        pkt = encode(gen, seed)
        frame = wire.RlncCam(
            protocol_version=PROTOCOL_VERSION,
            cam_id=self.cam_count & MASK32,
            generation_timestamp=int(now_ms),
            station_id=c.station_id,
            station_type=c.station_type,
            latitude=position.latitude,
            longitude=position.longitude,
            elevation=position.elevation,
            heading=position.heading,
            source_message_id=gen.message_id,
            field_size_code=c.field.m - 1,
            coding_seed=seed,
            coded_payload=pack_symbols(pkt.payload, c.field.m),
            optional_attributes=tuple(c.attributes),
        )
        self.cam_count += 1
        self.last_index = self.j
        self.j += 1
        if self.j > c.N:
            self.current = None
            self.j = 1
        return frame
