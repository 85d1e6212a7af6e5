"""Scenario description and its YAML file format.

A scenario file is a YAML mapping::

    duration_s: 60            # simulated time per trial
    cam_interval_ms: 10
    rng_seed: 7
    trials: 1000
    epsilon: 0.01             # threshold for the minimum-N statistic
    n_max: 100                # largest N in the sweep
    sweep: {K: [5, 10, 15], q: [2, 256]}
    distance_bin_m: 10
    origin: {lat: 51.4545, lon: -2.5879}
    rsus:
      - id: RSU1
        x: 0
        y: 0
        height: 8
        fog_area: fo1
        per_scale: 1.0
        profile: default      # or a mapping, see below
    vehicles:
      - station_id: 1
        waypoints: [[-300, 10], [300, 10]]
        speeds: [13.9]        # m/s, one per segment
        loop: false
        K: 5
        N: 20
        q: 256
        frame_budget: 2048

``profile`` mappings take one of three forms::

    {type: distance, bands: [[35, 0.2], [160, 0.4]], ramp: [0.75, 0.9], cutoff: 300}
    {type: constant, per: 0.4}
    {type: grid, path: rsu1.csv, cell_size: 2, origin: [0, 0]}

Grid paths are resolved relative to the scenario file. RSUs named
``RSU1``..``RSU4`` default to the height and ``per_scale`` calibrated for the
Bristol testbed; any other id defaults to 8 m and 1.0.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
import yaml

from ..channel import BRISTOL_HEIGHTS, BRISTOL_SCALES, ChannelError, DistanceProfile, RsuProfile, load_grid
from ..facility import DEFAULT_CAM_INTERVAL_MS, DEFAULT_FRAME_BUDGET
from ..wire import FIXED_OVERHEAD, MAX_FRAME, StationType

EARTH_RADIUS_M = 6_371_000.0
BRISTOL_ORIGIN = (51.4545, -2.5879)


class ScenarioError(ValueError):
    """Validation failure; ``errors`` holds one ``line N: message`` per problem."""

    def __init__(self, errors: list[str], source: str = "<scenario>"):
        self.errors = list(errors)
        self.source = source
        super().__init__(f"{source}: " + "; ".join(self.errors))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Constant-speed motion along a 2-D polyline.

    ``speeds[i]`` applies to the segment leaving ``waypoints[i]``. A looped
    trajectory also drives the closing segment back to the first waypoint;
    otherwise the vehicle parks at the final waypoint.
    """

    waypoints: tuple
    speeds: tuple = ()
    loop: bool = False

    def __post_init__(self):
        pts = np.asarray(self.waypoints, dtype=float).reshape(-1, 2)
        if len(pts) == 0:
            raise ValueError("trajectory needs at least one waypoint")
        nseg = len(pts) if self.loop and len(pts) > 1 else len(pts) - 1
        if len(self.speeds) != nseg:
            raise ValueError(f"expected {nseg} segment speeds, got {len(self.speeds)}")
        if any(not s > 0 for s in self.speeds):
            raise ValueError("segment speeds must be positive")
        ends = np.roll(pts, -1, axis=0)[:nseg]
        starts = pts[:nseg]
        lengths = np.hypot(*(ends - starts).T) if nseg else np.zeros(0)
        durations = lengths / np.asarray(self.speeds, dtype=float) if nseg else np.zeros(0)
        object.__setattr__(self, "_starts", starts)
        object.__setattr__(self, "_ends", ends)
        object.__setattr__(self, "_t0", np.concatenate([[0.0], np.cumsum(durations)]))
        object.__setattr__(self, "_pts", pts)

    @classmethod
    def stationary(cls, x: float, y: float) -> "Trajectory":
        return cls(((x, y),))

    @property
    def period(self) -> float:
        return float(self._t0[-1])

    def positions(self, times) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(x, y, heading_deg)`` at each time in seconds."""
        t = np.asarray(times, dtype=float)
        if len(self._starts) == 0 or self.period == 0:
            x = np.full(t.shape, self._pts[0, 0])
            y = np.full(t.shape, self._pts[0, 1])
            return x, y, np.zeros(t.shape)
        t = np.mod(t, self.period) if self.loop else np.clip(t, 0.0, self.period)
        seg = np.clip(np.searchsorted(self._t0, t, side="right") - 1, 0, len(self._starts) - 1)
        span = self._t0[seg + 1] - self._t0[seg]
        frac = np.where(span > 0, (t - self._t0[seg]) / np.where(span > 0, span, 1.0), 0.0)
        frac = np.clip(frac, 0.0, 1.0)
        a, b = self._starts[seg], self._ends[seg]
        x = a[..., 0] + (b[..., 0] - a[..., 0]) * frac
        y = a[..., 1] + (b[..., 1] - a[..., 1]) * frac
        heading = np.degrees(np.arctan2(b[..., 0] - a[..., 0], b[..., 1] - a[..., 1])) % 360.0
        return x, y, heading


@dataclass(frozen=True, eq=False)
class VehicleSpec:
    station_id: int
    trajectory: Trajectory
    K: int = 5
    N: int = 20
    q: int = 256
    frame_budget: int = DEFAULT_FRAME_BUDGET
    station_type: StationType = StationType.MOBILE
    antenna_height: float = 0.0


@dataclass(frozen=True, eq=False)
class Scenario:
    rsus: tuple
    vehicles: tuple
    duration_s: float
    cam_interval_ms: int = DEFAULT_CAM_INTERVAL_MS
    rng_seed: int = 0
    trials: int = 1
    epsilon: float = 0.01
    n_max: int = 100
    sweep_K: tuple = (5, 10, 15)
    sweep_q: tuple = (2, 256)
    distance_bin_m: float = 10.0
    origin: tuple = BRISTOL_ORIGIN
    name: str = dc_field(default="scenario", compare=False)

    def __post_init__(self):
        errors = _check_scenario(self)
        if errors:
            raise ScenarioError(errors, self.name)

    @property
    def n_ticks(self) -> int:
        return int(round(self.duration_s * 1000.0 / self.cam_interval_ms))

    @property
    def fog_areas(self) -> list[str]:
        return sorted({r.fog_area for r in self.rsus})

    def to_geo(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        """Local metres to (latitude, longitude) in 0.1 microdegree units."""
        lat0, lon0 = self.origin
        lat = lat0 + np.degrees(np.asarray(y) / EARTH_RADIUS_M)
        lon = lon0 + np.degrees(np.asarray(x) / (EARTH_RADIUS_M * math.cos(math.radians(lat0))))
        return np.rint(lat * 1e7).astype(np.int64), np.rint(lon * 1e7).astype(np.int64)

    def replace(self, **changes) -> "Scenario":
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return Scenario(**values)


def _check_scenario(s: Scenario) -> list[str]:
    errors = []
    if not s.rsus:
        errors.append("at least one RSU is required")
    if not s.vehicles:
        errors.append("at least one vehicle is required")
    if not s.duration_s > 0:
        errors.append("duration_s must be positive")
    if s.cam_interval_ms <= 0:
        errors.append("cam_interval_ms must be positive")
    if s.trials < 1:
        errors.append("trials must be >= 1")
    if not 0 < s.epsilon <= 1:
        errors.append("epsilon must lie in (0, 1]")
    if not s.distance_bin_m > 0:
        errors.append("distance_bin_m must be positive")
    ids = [r.rsu_id for r in s.rsus]
    if len(set(ids)) != len(ids):
        errors.append("RSU ids must be unique")
    stations = [v.station_id for v in s.vehicles]
    if len(set(stations)) != len(stations):
        errors.append("vehicle station_ids must be unique")
    if any(k < 1 for k in s.sweep_K):
        errors.append("sweep K values must be >= 1")
    if s.sweep_K and s.n_max < max(s.sweep_K):
        errors.append("n_max must be at least the largest swept K")
    for q in s.sweep_q:
        if q < 2 or q & (q - 1) or q > 256:
            errors.append(f"sweep q={q} is not a power of two in 2..256")
    return errors


# ---------------------------------------------------------------------------
# YAML loading with line-referenced diagnostics


class _Map(dict):
    line = 0
    key_lines: dict


class _Seq(list):
    line = 0
    item_lines: list


def _located(node, constructor):
    if isinstance(node, yaml.MappingNode):
        out = _Map()
        out.line = node.start_mark.line + 1
        out.key_lines = {}
        for knode, vnode in node.value:
            key = constructor.construct_object(knode, deep=True)
            out[key] = _located(vnode, constructor)
            out.key_lines[key] = knode.start_mark.line + 1
        return out
    if isinstance(node, yaml.SequenceNode):
        out = _Seq(_located(v, constructor) for v in node.value)
        out.line = node.start_mark.line + 1
        out.item_lines = [v.start_mark.line + 1 for v in node.value]
        return out
    return constructor.construct_object(node, deep=True)


class _Collector:
    def __init__(self):
        self.errors: list[str] = []

    def err(self, line: int, msg: str) -> None:
        self.errors.append(f"line {line}: {msg}")

    def get(self, mapping: _Map, key: str, kind, default=None, required=False, check=None, what=""):
        line = mapping.key_lines.get(key, mapping.line)
        if key not in mapping:
            if required:
                self.err(mapping.line, f"missing required key '{key}'")
            return default
        value = mapping[key]
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if kind is not None and (not isinstance(value, kind) or isinstance(value, bool) and kind is not bool):
            self.err(line, f"'{key}' must be {what or kind.__name__}, got {value!r}")
            return default
        if check is not None:
            problem = check(value)
            if problem:
                self.err(line, f"'{key}' {problem}")
                return default
        return value


def _positive(v):
    return None if v > 0 else "must be positive"


def _non_negative(v):
    return None if v >= 0 else "must be >= 0"


def _profile(c: _Collector, spec, line: int, base: Path):
    if spec is None or spec == "default":
        return DistanceProfile()
    if not isinstance(spec, _Map):
        c.err(line, f"profile must be 'default' or a mapping, got {spec!r}")
        return None
    kind = c.get(spec, "type", str, required=True)
    try:
        if kind == "distance":
            bands = c.get(spec, "bands", list, default=[[35, 0.2], [160, 0.4]])
            ramp = spec.get("ramp", [0.75, 0.90])
            cutoff = c.get(spec, "cutoff", float, default=300.0)
            return DistanceProfile(tuple(tuple(b) for b in bands), None if ramp is None else tuple(ramp), cutoff)
        if kind == "constant":
            per = c.get(spec, "per", float, required=True)
            return None if per is None else DistanceProfile.constant(per)
        if kind == "grid":
            path = c.get(spec, "path", str, required=True)
            cell = c.get(spec, "cell_size", float, default=2.0, check=_positive)
            origin = tuple(spec.get("origin", (0.0, 0.0)))
            if path is None:
                return None
            return load_grid(base / path, cell_size=cell or 2.0, origin=origin)
    except (ChannelError, TypeError, ValueError, OSError) as exc:
        c.err(spec.line, f"invalid profile: {exc}")
        return None
    if kind is not None:
        c.err(spec.key_lines.get("type", spec.line), f"unknown profile type {kind!r}")
    return None


def parse_scenario(text: str, base_dir: str | os.PathLike = ".", name: str = "<scenario>") -> Scenario:
    """Build a :class:`Scenario` from YAML text; raises :class:`ScenarioError`."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark else 0
        raise ScenarioError([f"line {line}: YAML syntax error: {getattr(exc, 'problem', exc)}"], name) from None
    if root is None:
        raise ScenarioError(["line 1: empty scenario file"], name)
    doc = _located(root, yaml.SafeLoader(""))
    if not isinstance(doc, _Map):
        raise ScenarioError([f"line {root.start_mark.line + 1}: top level must be a mapping"], name)
    c = _Collector()
    base = Path(base_dir)

    known = {
        "duration_s", "cam_interval_ms", "rng_seed", "trials", "epsilon", "n_max", "sweep",
        "distance_bin_m", "origin", "rsus", "vehicles",
    }
    for key in doc:
        if key not in known:
            c.err(doc.key_lines[key], f"unknown key '{key}'")

    duration = c.get(doc, "duration_s", float, required=True, check=_positive)
    interval = c.get(doc, "cam_interval_ms", int, default=DEFAULT_CAM_INTERVAL_MS, check=_positive)
    rng_seed = c.get(doc, "rng_seed", int, default=0, check=_non_negative)
    trials = c.get(doc, "trials", int, default=1, check=_positive)
    epsilon = c.get(doc, "epsilon", float, default=0.01,
                    check=lambda v: None if 0 < v <= 1 else "must lie in (0, 1]")
    n_max = c.get(doc, "n_max", int, default=100, check=_positive)
    bin_m = c.get(doc, "distance_bin_m", float, default=10.0, check=_positive)

    sweep_K, sweep_q = (5, 10, 15), (2, 256)
    sweep = c.get(doc, "sweep", _Map, default=None, what="a mapping")
    if sweep is not None:
        ks = c.get(sweep, "K", list, default=list(sweep_K), what="a list")
        qs = c.get(sweep, "q", list, default=list(sweep_q), what="a list")
        if not all(isinstance(k, int) and k >= 1 for k in ks):
            c.err(sweep.key_lines.get("K", sweep.line), f"sweep K values must be integers >= 1: {ks}")
        else:
            sweep_K = tuple(ks)
        if not all(isinstance(q, int) and q >= 2 and not q & (q - 1) and q <= 256 for q in qs):
            c.err(sweep.key_lines.get("q", sweep.line), f"sweep q values must be powers of two in 2..256: {qs}")
        else:
            sweep_q = tuple(qs)
    if n_max is not None and sweep_K and n_max < max(sweep_K):
        c.err(doc.key_lines.get("n_max", doc.line), f"n_max={n_max} is below the largest swept K")

    origin = BRISTOL_ORIGIN
    org = c.get(doc, "origin", _Map, default=None, what="a mapping")
    if org is not None:
        lat = c.get(org, "lat", float, required=True)
        lon = c.get(org, "lon", float, required=True)
        if lat is not None and lon is not None:
            origin = (lat, lon)

    rsus = []
    rsu_list = c.get(doc, "rsus", list, required=True, default=[], what="a list")
    if rsu_list == [] and "rsus" in doc:
        c.err(doc.key_lines["rsus"], "at least one RSU is required")
    seen_ids = set()
    for i, item in enumerate(rsu_list):
        line = rsu_list.item_lines[i]
        if not isinstance(item, _Map):
            c.err(line, "each RSU must be a mapping")
            continue
        rid = c.get(item, "id", (str, int), required=True, what="a string")
        if rid is not None:
            rid = str(rid)
            if rid in seen_ids:
                c.err(item.key_lines["id"], f"duplicate RSU id {rid!r}")
            seen_ids.add(rid)
        x = c.get(item, "x", float, required=True)
        y = c.get(item, "y", float, required=True)
        height = c.get(item, "height", float, default=BRISTOL_HEIGHTS.get(rid, 8.0), check=_non_negative)
        area = c.get(item, "fog_area", (str, int), default="fo1", what="a string")
        scale = c.get(item, "per_scale", float, default=BRISTOL_SCALES.get(rid, 1.0), check=_positive)
        model = _profile(c, item.get("profile"), item.key_lines.get("profile", item.line), base)
        if None not in (rid, x, y, height, area, scale, model):
            rsus.append(RsuProfile(rid, x, y, height, model, scale, str(area)))

    vehicles = []
    veh_list = c.get(doc, "vehicles", list, required=True, default=[], what="a list")
    if veh_list == [] and "vehicles" in doc:
        c.err(doc.key_lines["vehicles"], "at least one vehicle is required")
    seen_stations = set()
    for i, item in enumerate(veh_list):
        line = veh_list.item_lines[i]
        if not isinstance(item, _Map):
            c.err(line, "each vehicle must be a mapping")
            continue
        sid = c.get(item, "station_id", int, required=True,
                    check=lambda v: None if 0 <= v < 2**32 else "must fit in 32 bits")
        if sid is not None:
            if sid in seen_stations:
                c.err(item.key_lines["station_id"], f"duplicate station_id {sid}")
            seen_stations.add(sid)
        wps = c.get(item, "waypoints", list, required=True, what="a list of [x, y] pairs")
        speeds = c.get(item, "speeds", list, default=[], what="a list")
        loop = c.get(item, "loop", bool, default=False)
        K = c.get(item, "K", int, default=5, check=_positive)
        N = c.get(item, "N", int, default=20, check=_positive)
        q = c.get(item, "q", int, default=256,
                  check=lambda v: None if v >= 2 and not v & (v - 1) and v <= 256 else "must be a power of two in 2..256")
        budget = c.get(item, "frame_budget", int, default=DEFAULT_FRAME_BUDGET,
                       check=lambda v: None if FIXED_OVERHEAD < v <= MAX_FRAME
                       else f"must lie in [{FIXED_OVERHEAD + 1}, {MAX_FRAME}]")
        antenna = c.get(item, "antenna_height", float, default=0.0, check=_non_negative)
        if K is not None and N is not None and N < K:
            c.err(item.key_lines.get("N", item.line), f"N={N} must be >= K={K}")
        traj = None
        if wps is not None and speeds is not None:
            try:
                if not all(isinstance(p, list) and len(p) == 2 for p in wps):
                    raise ValueError("waypoints must be [x, y] pairs")
                traj = Trajectory(tuple(tuple(float(v) for v in p) for p in wps), tuple(float(s) for s in speeds), bool(loop))
            except (TypeError, ValueError) as exc:
                c.err(item.key_lines.get("waypoints", line), f"invalid trajectory: {exc}")
        if None not in (sid, traj, K, N, q, budget, antenna):
            vehicles.append(VehicleSpec(sid, traj, K, N, q, budget, antenna_height=antenna))

    if c.errors:
        raise ScenarioError(c.errors, name)
    try:
        return Scenario(
            rsus=tuple(rsus), vehicles=tuple(vehicles), duration_s=duration, cam_interval_ms=interval,
            rng_seed=rng_seed, trials=trials, epsilon=epsilon, n_max=n_max, sweep_K=sweep_K,
            sweep_q=sweep_q, distance_bin_m=bin_m, origin=origin, name=name,
        )
    except ScenarioError as exc:
        raise ScenarioError([f"line {doc.line}: {e}" for e in exc.errors], name) from None


def load_scenario(path: str | os.PathLike) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), path.parent, name=str(path))


def bundled_scenario_path(name: str) -> Path:
    """Path of a scenario shipped with the package, e.g. ``rsu1.scenario``."""
    here = Path(__file__).resolve().parent.parent / "scenarios"
    candidate = here / name
    if not candidate.suffix:
        candidate = candidate.with_suffix(".scenario")
    return candidate
