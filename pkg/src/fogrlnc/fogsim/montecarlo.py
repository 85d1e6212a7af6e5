"""Monte Carlo sweeps over (K, q, N) and the CSV report they produce.

Each trial replays the scenario with its own erasure stream and coding-seed
salt. Every message is sent with ``n_max`` coded packets; the transmission
index at which its decoder reaches full rank is recorded, so the empirical
``R(N)`` for every ``N <= n_max`` comes from the same realisations and is
non-decreasing in ``N`` by construction.

Two engines compute the same quantity:

``"batch"``
    vectorised over trials with numpy; the default.
``"world"``
    steps :class:`~fogrlnc.fogsim.world.World` frame by frame through the
    facility, wire codec and fog orchestrators. Slow, but exercises the full
    pipeline. Given the same scenario both engines return identical reports.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from ..channel import per_array
from ..gf import FieldSpec
from ..rlnc import MASK32, ZERO_SEED_REMAP, coding_vectors, delivery_curve, rank_trajectory
from .scenario import Scenario
from .world import World, erasure_rng, trial_salt

GLOBAL = "global"
CURVE_COLUMNS = ("rsu_or_global", "K", "q", "N", "empirical_R", "analytic_R", "trials")
PER_COLUMNS = ("rsu_id", "bin_lo_m", "bin_hi_m", "per")


class ReportError(OSError):
    pass


@dataclass
class MetricsReport:
    """Outcome of :func:`run_monte_carlo`.

    ``recovery_index[(view, K, q)]`` holds one entry per simulated message:
    the 1-based transmission index at which it became decodable in that view,
    or 0 if ``n_max`` transmissions were not enough. Views are the RSU ids
    (that RSU's receptions alone) and ``"global"`` (every fog orchestrator).
    """

    scenario_name: str
    trials: int
    n_max: int
    epsilon: float
    Ks: tuple
    qs: tuple
    views: list
    recovery_index: dict = dc_field(default_factory=dict)
    received: dict = dc_field(default_factory=dict)
    rsu_transmitted: dict = dc_field(default_factory=dict)
    rsu_received: dict = dc_field(default_factory=dict)
    per_bins: dict = dc_field(default_factory=dict)
    mean_per: dict = dc_field(default_factory=dict)
    bin_width: float = 10.0

    def empirical(self, view: str, K: int, q: int) -> np.ndarray:
        """Empirical R(N) for N = 0..n_max."""
        idx = self.recovery_index[(view, K, q)]
        hits = np.bincount(idx[idx > 0], minlength=self.n_max + 1)[: self.n_max + 1]
        return np.cumsum(hits) / max(len(idx), 1)

    def analytic(self, view: str, K: int, q: int) -> np.ndarray:
        p = self.mean_per[view]
        return np.array([delivery_curve(N, p, K, q) for N in range(self.n_max + 1)])

    def min_n(self, view: str, K: int, q: int, epsilon: float | None = None) -> int | None:
        """Smallest N whose empirical R(N) reaches ``epsilon``."""
        eps = self.epsilon if epsilon is None else epsilon
        hits = np.flatnonzero(self.empirical(view, K, q) >= eps)
        return int(hits[0]) if hits.size else None

    def messages(self, K: int, q: int) -> int:
        return len(self.recovery_index[(GLOBAL, K, q)])


# ---------------------------------------------------------------------------
# Shared geometry


@dataclass
class _Geometry:
    per: np.ndarray  # (T, V, R)
    dist: np.ndarray  # (T, V, R)
    stations: np.ndarray  # (V,)
    areas: dict  # area -> list of rsu column indices


def _geometry(sc: Scenario) -> _Geometry:
    T = sc.n_ticks
    times = np.arange(T) * sc.cam_interval_ms / 1000.0
    V, R = len(sc.vehicles), len(sc.rsus)
    per = np.empty((T, V, R))
    dist = np.empty((T, V, R))
    for vi, v in enumerate(sc.vehicles):
        x, y, _ = v.trajectory.positions(times)
        for ri, rsu in enumerate(sc.rsus):
            per[:, vi, ri] = per_array(rsu, x, y, v.antenna_height)
            dist[:, vi, ri] = rsu.distance(x, y, v.antenna_height)
    areas: dict[str, list[int]] = {}
    for ri, rsu in enumerate(sc.rsus):
        areas.setdefault(rsu.fog_area, []).append(ri)
    stations = np.array([v.station_id for v in sc.vehicles], dtype=np.uint64)
    return _Geometry(per, dist, stations, areas)


def _mean(a: np.ndarray) -> float:
    return math.fsum(a.ravel()) / a.size if a.size else 1.0


def _new_report(sc: Scenario, Ks, qs, n_max, geo: _Geometry) -> MetricsReport:
    views = [r.rsu_id for r in sc.rsus] + [GLOBAL]
    report = MetricsReport(sc.name, sc.trials, n_max, sc.epsilon, tuple(Ks), tuple(qs), views,
                           bin_width=sc.distance_bin_m)
    M = sc.n_ticks // n_max
    used = geo.per[: M * n_max]
    for ri, rsu in enumerate(sc.rsus):
        report.mean_per[rsu.rsu_id] = _mean(used[..., ri])
    report.mean_per[GLOBAL] = _mean(used.prod(axis=2))
    nbins = int(math.floor(geo.dist.max() / sc.distance_bin_m)) + 1 if geo.dist.size else 1
    for rsu in sc.rsus:
        report.rsu_transmitted[rsu.rsu_id] = 0
        report.rsu_received[rsu.rsu_id] = 0
        report.per_bins[rsu.rsu_id] = [np.zeros(nbins, dtype=np.int64), np.zeros(nbins, dtype=np.int64)]
    return report


def _bin_losses(report: MetricsReport, sc: Scenario, dist: np.ndarray, lost: np.ndarray) -> None:
    """Accumulate per-RSU transmissions/losses by distance; ``lost`` is (C, T, V, R)."""
    for ri, rsu in enumerate(sc.rsus):
        bins = (dist[..., ri] // sc.distance_bin_m).astype(np.int64).ravel()
        tx, lo = report.per_bins[rsu.rsu_id]
        n = len(tx)
        tx += np.bincount(bins, minlength=n)[:n] * lost.shape[0]
        lost_counts = lost[..., ri].sum(axis=0).ravel()
        lo += np.bincount(bins, weights=lost_counts, minlength=n)[:n].astype(np.int64)
        report.rsu_transmitted[rsu.rsu_id] += lost[..., ri].size
        report.rsu_received[rsu.rsu_id] += int((~lost[..., ri]).sum())


def _seeds(stations: np.ndarray, M: int, n_max: int, salts: np.ndarray) -> np.ndarray:
    """Coding seeds for (trial, vehicle, message, j); mirrors facility.derive_seed."""
    m = np.arange(M, dtype=np.uint64)[None, None, :, None]
    j = np.arange(1, n_max + 1, dtype=np.uint64)[None, None, None, :]
    st = stations[None, :, None, None]
    salt = salts.astype(np.uint64)[:, None, None, None]
    s = (st * np.uint64(0x9E3779B1) + m * np.uint64(0x85EBCA6B) + j * np.uint64(0xC2B2AE35) + salt) & np.uint64(MASK32)
    s = s.astype(np.uint32)
    s[s == 0] = ZERO_SEED_REMAP
    return s


def _first_full_rank(vectors: np.ndarray, mask: np.ndarray, K: int, field: FieldSpec) -> np.ndarray:
    """1-based index where rank reaches K, 0 if never. Inputs are (B, n, K) / (B, n)."""
    out = np.zeros(len(mask), dtype=np.int16)
    candidates = np.flatnonzero(mask.sum(axis=1) >= K)
    if candidates.size:
        ranks = rank_trajectory(vectors[candidates], field, mask[candidates])
        full = ranks >= K
        got = full.any(axis=1)
        out[candidates[got]] = full[got].argmax(axis=1) + 1
    return out


def _combine_global(per_area: list[np.ndarray]) -> np.ndarray:
    if len(per_area) == 1:
        return per_area[0]
    stacked = np.stack([np.where(a > 0, a, np.iinfo(np.int16).max) for a in per_area])
    best = stacked.min(axis=0)
    return np.where(best == np.iinfo(np.int16).max, 0, best).astype(np.int16)


# ---------------------------------------------------------------------------
# Engines


def _run_batch(sc: Scenario, Ks, qs, n_max: int, chunk: int | None) -> MetricsReport:
    geo = _geometry(sc)
    report = _new_report(sc, Ks, qs, n_max, geo)
    T, V, R = geo.per.shape
    M = T // n_max
    fields = {q: FieldSpec.from_order(q) for q in qs}
    results = {(view, K, q): [] for view in report.views for K in Ks for q in qs}
    received = {(K, q): [] for K in Ks for q in qs}
    if chunk is None:
        per_trial = max(T * V * R, V * M * n_max * max(Ks))
        chunk = max(1, min(sc.trials, 2_000_000 // max(per_trial, 1)))
    rsu_ids = [r.rsu_id for r in sc.rsus]
    for start in range(0, sc.trials, chunk):
        trials = range(start, min(start + chunk, sc.trials))
        C = len(trials)
        lost = np.empty((C, T, V, R), dtype=bool)
        for c, t in enumerate(trials):
            lost[c] = erasure_rng(sc.rng_seed, t).random((T, V, R)) < geo.per
        _bin_losses(report, sc, geo.dist, lost)
        salts = np.array([trial_salt(sc.rng_seed, t) for t in trials], dtype=np.uint64)
        seeds = _seeds(geo.stations, M, n_max, salts)  # (C, V, M, n_max)
        got = ~lost[:, : M * n_max].reshape(C, M, n_max, V, R).transpose(0, 3, 1, 2, 4)  # (C, V, M, n, R)
        view_masks = {rid: got[..., ri] for ri, rid in enumerate(rsu_ids)}
        area_masks = [got[..., cols].any(axis=-1) for cols in geo.areas.values()]
        union = got.any(axis=-1)
        for K in Ks:
            for q in qs:
                F = fields[q]
                vecs = coding_vectors(seeds, K, F).reshape(-1, n_max, K)
                cache: dict[int, np.ndarray] = {}

                def first(mask):
                    key = id(mask)
                    if key not in cache:
                        cache[key] = _first_full_rank(vecs, mask.reshape(-1, n_max), K, F)
                    return cache[key]

                for rid in rsu_ids:
                    results[(rid, K, q)].append(first(view_masks[rid]))
                if len(area_masks) == 1 and R == 1:
                    glob = first(view_masks[rsu_ids[0]])
                else:
                    glob = _combine_global([first(a) for a in area_masks])
                results[(GLOBAL, K, q)].append(glob)
                received[(K, q)].append(union.reshape(-1, n_max).sum(axis=1).astype(np.int16))
    for key, parts in results.items():
        report.recovery_index[key] = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int16)
    for key, parts in received.items():
        report.received[key] = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int16)
    return report


def _run_world(sc: Scenario, Ks, qs, n_max: int) -> MetricsReport:
    geo = _geometry(sc)
    report = _new_report(sc, Ks, qs, n_max, geo)
    T, V, R = geo.per.shape
    M = T // n_max
    rsu_ids = [r.rsu_id for r in sc.rsus]
    results = {(view, K, q): [] for view in report.views for K in Ks for q in qs}
    received = {(K, q): [] for K in Ks for q in qs}
    for t in range(sc.trials):
        first_combo = True
        for K in Ks:
            for q in qs:
                world = World(sc, K=K, q=q, N=n_max, trial=t, rsu_views=True, keep_payloads=False)
                world.keep_log = first_combo
                world.run(T)
                if first_combo:
                    lost = np.array([entry[5] for entry in world.log], dtype=bool).reshape(1, T, V, R)
                    _bin_losses(report, sc, geo.dist, lost)
                    first_combo = False
                shape = (V, M)
                glob = np.zeros(shape, dtype=np.int16)
                for fo in world.fos.values():
                    for ev in fo.recovered:
                        vi = _vehicle_index(sc, ev.station_id)
                        if ev.message_id < M and (glob[vi, ev.message_id] == 0 or ev.tx_index < glob[vi, ev.message_id]):
                            glob[vi, ev.message_id] = ev.tx_index
                results[(GLOBAL, K, q)].append(glob.ravel())
                for rid in rsu_ids:
                    arr = np.zeros(shape, dtype=np.int16)
                    for ev in world.rsu_views[rid].recovered:
                        if ev.message_id < M:
                            arr[_vehicle_index(sc, ev.station_id), ev.message_id] = ev.tx_index
                    results[(rid, K, q)].append(arr.ravel())
                counts = np.zeros(shape, dtype=np.int16)
                keys = set().union(*(fo.seen for fo in world.fos.values()))
                for station, msg, _seed in keys:
                    if msg < M:
                        counts[_vehicle_index(sc, station), msg] += 1
                received[(K, q)].append(counts.ravel())
    for key, parts in results.items():
        report.recovery_index[key] = np.concatenate(parts)
    for key, parts in received.items():
        report.received[key] = np.concatenate(parts)
    return report


def _vehicle_index(sc: Scenario, station_id: int) -> int:
    for i, v in enumerate(sc.vehicles):
        if v.station_id == station_id:
            return i
    raise KeyError(station_id)


def run_monte_carlo(
    scenario: Scenario,
    Ks=None,
    qs=None,
    n_max: int | None = None,
    *,
    trials: int | None = None,
    rng_seed: int | None = None,
    engine: str = "batch",
    chunk: int | None = None,
) -> MetricsReport:
    """Sweep ``K`` over ``Ks``, ``q`` over ``qs`` and ``N`` over ``K..n_max``.

    Defaults come from the scenario. Trial ``i`` uses random substreams
    derived from ``(rng_seed, i)``, so results do not depend on chunking or
    on which engine runs them.
    """
    sc = scenario
    changes = {}
    if trials is not None:
        changes["trials"] = trials
    if rng_seed is not None:
        changes["rng_seed"] = rng_seed
    if changes:
        sc = sc.replace(**changes)
    Ks = tuple(sc.sweep_K if Ks is None else Ks)
    qs = tuple(sc.sweep_q if qs is None else qs)
    n_max = sc.n_max if n_max is None else n_max
    if n_max < max(Ks):
        raise ValueError("n_max must be at least the largest K")
    if engine == "batch":
        return _run_batch(sc, Ks, qs, n_max, chunk)
    if engine == "world":
        return _run_world(sc, Ks, qs, n_max)
    raise ValueError(f"unknown engine {engine!r}")


# ---------------------------------------------------------------------------
# Output


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def curves_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    for view in report.views:
        for K in report.Ks:
            for q in report.qs:
                emp = report.empirical(view, K, q)
                ana = report.analytic(view, K, q)
                for N in range(K, report.n_max + 1):
                    w.writerow((view, K, q, N, _fmt(emp[N]), _fmt(ana[N]), report.trials))
    return buf.getvalue()


def per_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PER_COLUMNS)
    width = report.bin_width
    for rid, (tx, lost) in report.per_bins.items():
        for b in np.flatnonzero(tx):
            w.writerow((rid, _fmt(b * width), _fmt((b + 1) * width), _fmt(lost[b] / tx[b])))
    return buf.getvalue()


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_report(report: MetricsReport, destination) -> list[Path]:
    """Write ``recovery_curves.csv`` and ``per_by_distance.csv`` into ``destination``."""
    dest = Path(destination)
    try:
        dest.mkdir(parents=True, exist_ok=True)
        texts = {"recovery_curves.csv": curves_csv(report), "per_by_distance.csv": per_csv(report)}
        paths = []
        for name, text in texts.items():
            _atomic_write(dest / name, text)
            paths.append(dest / name)
        return paths
    except OSError as exc:
        raise ReportError(f"cannot write report to {dest}: {exc}") from exc


def summary_table(report: MetricsReport) -> str:
    """Plain-text minimum-N table, one row per (view, K, q)."""
    lines = [f"{'view':<10} {'K':>3} {'q':>4} {'N*':>5} {'R(n_max)':>9}"]
    for view in report.views:
        for K in report.Ks:
            for q in report.qs:
                n = report.min_n(view, K, q)
                r = report.empirical(view, K, q)[-1]
                lines.append(f"{view:<10} {K:>3} {q:>4} {('-' if n is None else n):>5} {r:>9.4f}")
    return "\n".join(lines)
