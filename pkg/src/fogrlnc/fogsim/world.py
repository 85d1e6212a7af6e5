"""Fixed-step world: vehicles, RSUs, fog orchestrators and the cloud sink."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Mapping

import numpy as np

from .. import wire
from ..channel import draw_erasure, per_array
from ..facility import FacilityConfig, Position, RlncStream
from ..gf import FieldSpec
from ..rlnc import Decoder, coding_vector_from_seed, desegment, unpack_symbols
from .scenario import Scenario


@dataclass(frozen=True)
class RecoveryEvent:
    station_id: int
    message_id: int
    time_ms: int
    #: 1-based transmission index of the frame that completed the rank, when known
    tx_index: int | None


@dataclass
class FogOrchestrator:
    """Collects frames from the RSUs of one fog area, drops duplicates and
    decodes each (station, message) pair.

    ``k_for_station`` supplies the generation size of each sender, which is
    registered out of band (the frame does not carry ``K``). With
    ``keep_payloads=False`` only coding vectors are tracked, which is enough
    for rank statistics.
    """

    k_for_station: Mapping[int, int] | Callable[[int], int]
    keep_payloads: bool = True
    record_ranks: bool = False
    on_recover: Callable[[RecoveryEvent, np.ndarray | None], None] | None = None
    seen: set = dc_field(default_factory=set)
    decoders: dict = dc_field(default_factory=dict)
    recovered: list = dc_field(default_factory=list)
    rank_history: dict = dc_field(default_factory=dict)
    delivered: int = 0
    duplicates: int = 0
    malformed: int = 0
    _done: set = dc_field(default_factory=set)
    _fields: dict = dc_field(default_factory=dict)

    def _k(self, station_id: int) -> int:
        src = self.k_for_station
        return src(station_id) if callable(src) else src[station_id]

    def _field(self, code: int) -> FieldSpec:
        f = self._fields.get(code)
        if f is None:
            f = self._fields[code] = FieldSpec(code + 1)
        return f

    def ingest(self, frame, arrival_ms: int, tx_index: int | None = None) -> bool:
        """Process one delivered frame (bytes or :class:`~fogrlnc.wire.RlncCam`).

        Returns True when the frame was forwarded to a decoder.
        """
        self.delivered += 1
        if not isinstance(frame, wire.RlncCam):
            try:
                frame = wire.parse(frame)
            except wire.WireError:
                self.malformed += 1
                return False
        key = frame.dedup_key
        if key in self.seen:
            self.duplicates += 1
            return False
        self.seen.add(key)
        msg_key = (frame.station_id, frame.source_message_id)
        if msg_key in self._done:
            return True
        try:
            K = self._k(frame.station_id)
        except (KeyError, LookupError):
            self.malformed += 1
            return False
        field = self._field(frame.field_size_code)
        dec = self.decoders.get(msg_key)
        if dec is None:
            L = len(frame.coded_payload) * 8 // field.m if self.keep_payloads else 0
            dec = self.decoders[msg_key] = Decoder(K, L, field, frame.source_message_id)
        if dec.field != field or (self.keep_payloads and len(frame.coded_payload) * 8 // field.m != dec.L):
            self.malformed += 1
            return False
        vec = coding_vector_from_seed(frame.coding_seed, K, field)
        payload = unpack_symbols(frame.coded_payload, field.m, dec.L) if dec.L else None
        dec.ingest_row(vec, payload)
        if self.record_ranks:
            self.rank_history.setdefault(msg_key, []).append(dec.rank)
        if dec.complete:
            event = RecoveryEvent(frame.station_id, frame.source_message_id, int(arrival_ms), tx_index)
            self.recovered.append(event)
            packets = dec.recover() if self.keep_payloads else None
            self._done.add(msg_key)
            del self.decoders[msg_key]
            if self.on_recover is not None:
                self.on_recover(event, packets)
        return True

    def rank(self, station_id: int, message_id: int) -> int:
        key = (station_id, message_id)
        if key in self._done:
            return self._k(station_id)
        dec = self.decoders.get(key)
        return dec.rank if dec else 0


def fo_ingest(fo: FogOrchestrator, frame, arrival_ms: int, tx_index: int | None = None) -> bool:
    return fo.ingest(frame, arrival_ms, tx_index)


@dataclass
class CloudSink:
    """Receives recovered source messages from every fog orchestrator."""

    messages: dict = dc_field(default_factory=dict)
    events: list = dc_field(default_factory=list)

    def __call__(self, event: RecoveryEvent, packets: np.ndarray | None) -> None:
        key = (event.station_id, event.message_id)
        if key in self.messages:
            return
        self.events.append(event)
        self.messages[key] = packets


def erasure_rng(rng_seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(rng_seed, spawn_key=(trial, 0)))


def trial_salt(rng_seed: int, trial: int) -> int:
    """Per-trial offset added to every coding seed, so trials see fresh coding vectors."""
    return int(np.random.SeedSequence(rng_seed, spawn_key=(trial, 2)).generate_state(1, np.uint32)[0])


def trial_streams(rng_seed: int, trial: int) -> tuple[np.random.Generator, int, np.random.Generator]:
    """Independent per-trial randomness: erasure generator, coding-seed salt
    and a generator for synthetic sensor data."""
    data = np.random.default_rng(np.random.SeedSequence(rng_seed, spawn_key=(trial, 1)))
    return erasure_rng(rng_seed, trial), trial_salt(rng_seed, trial), data


class World:
    """One simulated realisation of a scenario.

    Every step, each vehicle emits one RLNC-CAM and every RSU independently
    draws one erasure for it (a uniform is consumed even when the PER is 0 or
    1, so runs stay aligned across parameter choices). Vehicles always have
    sensor data ready: a fresh random generation is pushed whenever the
    facility queue runs dry.

    ``K``, ``q`` and ``N`` override the per-vehicle settings when given.
    """

    def __init__(
        self,
        scenario: Scenario,
        *,
        K: int | None = None,
        q: int | None = None,
        N: int | None = None,
        trial: int = 0,
        rsu_views: bool = False,
        keep_payloads: bool = True,
        verify: bool = False,
        record_ranks: bool = False,
    ):
        self.scenario = scenario
        self.rng, salt, self.data_rng = trial_streams(scenario.rng_seed, trial)
        self.salt = salt
        self.tick_index = 0
        self.streams: list[RlncStream] = []
        self.vehicle_K: dict[int, int] = {}
        for v in scenario.vehicles:
            cfg = FacilityConfig(
                K=K or v.K,
                N=N or max(v.N, K or v.K),
                field=FieldSpec.from_order(q or v.q),
                station_id=v.station_id,
                station_type=v.station_type,
                cam_interval_ms=scenario.cam_interval_ms,
                frame_budget=v.frame_budget,
                seed_salt=salt,
            )
            self.streams.append(RlncStream(cfg))
            self.vehicle_K[v.station_id] = cfg.K
        self.cloud = CloudSink()
        self.sent: dict[tuple[int, int], bytes] = {}
        self.verify = verify
        self.fos = {
            area: FogOrchestrator(self.vehicle_K, keep_payloads=keep_payloads, record_ranks=record_ranks,
                                  on_recover=self._on_recover)
            for area in scenario.fog_areas
        }
        self.rsu_views = (
            {r.rsu_id: FogOrchestrator(self.vehicle_K, keep_payloads=False) for r in scenario.rsus}
            if rsu_views else {}
        )
        # (station, message) -> frames emitted so far
        self.transmitted: dict[tuple[int, int], int] = {}
        self.rsu_transmitted = {r.rsu_id: 0 for r in scenario.rsus}
        self.rsu_received = {r.rsu_id: 0 for r in scenario.rsus}
        self.frames_emitted = 0
        self.frames_delivered = 0
        self.log: list[tuple[int, str, int, int, float, bool]] = []
        self.keep_log = False

    def _on_recover(self, event: RecoveryEvent, packets) -> None:
        self.cloud(event, packets)

    @property
    def now_ms(self) -> int:
        return self.tick_index * self.scenario.cam_interval_ms

    def _refill(self, stream: RlncStream) -> None:
        if stream.idle:
            size = stream.config.generation_bytes
            data = self.data_rng.integers(0, 256, size=size, dtype=np.uint8).tobytes()
            if self.verify:
                self.sent[(stream.config.station_id, stream.next_message_id)] = data
            stream.push(data)

    def step(self) -> None:
        """Advance the world by one CAM interval."""
        sc = self.scenario
        now = self.now_ms
        t = now / 1000.0
        for v, stream in zip(sc.vehicles, self.streams):
            x, y, heading = v.trajectory.positions(t)
            self._refill(stream)
            lat, lon = sc.to_geo(x, y)
            pos = Position(int(lat), int(lon), int(round(v.antenna_height * 100)), int(round(float(heading) * 10)) % 3600)
            frame = stream.tick(now, pos)
            j = stream.last_index
            msg_key = (frame.station_id, frame.source_message_id)
            self.transmitted[msg_key] = self.transmitted.get(msg_key, 0) + 1
            self.frames_emitted += 1
            data = wire.serialize(frame)
            for rsu in sc.rsus:
                per = float(per_array(rsu, x, y, v.antenna_height))
                lost = draw_erasure(per, self.rng)
                self.rsu_transmitted[rsu.rsu_id] += 1
                if self.keep_log:
                    self.log.append((now, rsu.rsu_id, frame.station_id, frame.source_message_id,
                                     float(rsu.distance(x, y, v.antenna_height)), lost))
                if lost:
                    continue
                self.rsu_received[rsu.rsu_id] += 1
                self.frames_delivered += 1
                self.fos[rsu.fog_area].ingest(data, now, tx_index=j)
                if self.rsu_views:
                    self.rsu_views[rsu.rsu_id].ingest(frame, now, tx_index=j)
        self.tick_index += 1

    def run(self, n_ticks: int | None = None) -> "World":
        for _ in range(self.scenario.n_ticks if n_ticks is None else n_ticks):
            self.step()
        return self

    def recovered_data(self, station_id: int, message_id: int) -> bytes | None:
        packets = self.cloud.messages.get((station_id, message_id))
        if packets is None:
            return None
        stream = next(s for s in self.streams if s.config.station_id == station_id)
        return desegment(packets, stream.config.field, stream.config.generation_bytes)


def step(world: World) -> None:
    world.step()
