"""Packet-erasure models for CAV -> RSU links.

Two PER models are supported: a distance-banded profile (flat bands, then a
linear ramp up to a coverage cutoff) and a spatial grid of measured delivery
rates. Every loss is an independent Bernoulli draw per (frame, RSU).
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from typing import Union

import numpy as np

DEFAULT_CUTOFF_M = 300.0
DEFAULT_CELL_M = 2.0
GRID_HEADER = ("x_cell", "y_cell", "delivery_rate")


class ChannelError(ValueError):
    pass


@dataclass(frozen=True)
class DistanceProfile:
    """PER as a function of RSU-to-vehicle distance.

    ``bands`` is a sequence of ``(upper_bound_m, per)``: distances up to and
    including the bound get that PER. Past the last bound the PER ramps
    linearly from ``ramp[0]`` to ``ramp[1]`` until ``cutoff``; beyond the
    cutoff (or the last band, when there is no ramp) every frame is lost.
    """

    bands: tuple = ((35.0, 0.20), (160.0, 0.40))
    ramp: tuple | None = (0.75, 0.90)
    cutoff: float = DEFAULT_CUTOFF_M

    def __post_init__(self):
        bands = tuple((float(b), float(p)) for b, p in self.bands)
        object.__setattr__(self, "bands", bands)
        if not bands:
            raise ChannelError("a distance profile needs at least one band")
        bounds = [b for b, _ in bands]
        if any(b <= 0 for b in bounds) or any(hi <= lo for lo, hi in zip(bounds, bounds[1:])):
            raise ChannelError(f"band bounds must be positive and strictly increasing: {bounds}")
        pers = [p for _, p in bands] + list(self.ramp or ())
        if not all(0.0 <= p <= 1.0 for p in pers):
            raise ChannelError(f"PER values must lie in [0, 1]: {pers}")
        if self.ramp is not None:
            if len(self.ramp) != 2:
                raise ChannelError("ramp must be a (start_per, end_per) pair")
            if not self.cutoff > bounds[-1]:
                raise ChannelError("cutoff must lie beyond the last band")

    @classmethod
    def constant(cls, per: float) -> "DistanceProfile":
        """Same PER at every distance."""
        return cls(bands=((math.inf, per),), ramp=None, cutoff=math.inf)

    def per(self, distance) -> np.ndarray:
        d = np.asarray(distance, dtype=float)
        bounds = np.array([b for b, _ in self.bands])
        values = np.array([p for _, p in self.bands] + [1.0])
        out = values[np.searchsorted(bounds, d, side="left")]
        if self.ramp is not None:
            lo, hi = bounds[-1], self.cutoff
            in_ramp = (d > lo) & (d <= hi)
            frac = (d - lo) / (hi - lo)
            out = np.where(in_ramp, self.ramp[0] + (self.ramp[1] - self.ramp[0]) * frac, out)
        return out


@dataclass(frozen=True, eq=False)
class PerGrid:
    """Delivery rates on square cells; ``delivery[i, j]`` is cell
    ``(i + index_offset[0], j + index_offset[1])``."""

    delivery: np.ndarray
    index_offset: tuple = (0, 0)
    origin: tuple = (0.0, 0.0)
    cell_size: float = DEFAULT_CELL_M

    def __post_init__(self):
        arr = np.asarray(self.delivery, dtype=float)
        if arr.ndim != 2:
            raise ChannelError("grid must be two-dimensional")
        if not self.cell_size > 0:
            raise ChannelError("cell_size must be positive")
        if arr.size and not ((arr >= 0) & (arr <= 1)).all():
            raise ChannelError("delivery rates must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "delivery", arr)

    def per_xy(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ix = np.floor((x - self.origin[0]) / self.cell_size).astype(np.int64) - self.index_offset[0]
        iy = np.floor((y - self.origin[1]) / self.cell_size).astype(np.int64) - self.index_offset[1]
        nx, ny = self.delivery.shape
        inside = (ix >= 0) & (ix < nx) & (iy >= 0) & (iy < ny)
        out = np.ones(np.broadcast(ix, iy).shape)
        if inside.any():
            out[inside] = 1.0 - self.delivery[ix[inside], iy[inside]]
        return out


ChannelModel = Union[DistanceProfile, PerGrid]


@dataclass(frozen=True)
class RsuProfile:
    rsu_id: str
    x: float
    y: float
    height: float
    model: ChannelModel
    per_scale: float = 1.0
    fog_area: str = "fo1"

    def __post_init__(self):
        if not self.per_scale > 0:
            raise ChannelError(f"per_scale must be positive, got {self.per_scale}")

    def distance(self, x, y, z=0.0) -> np.ndarray:
        return np.sqrt((np.asarray(x) - self.x) ** 2 + (np.asarray(y) - self.y) ** 2 + (np.asarray(z) - self.height) ** 2)


def per_array(profile: RsuProfile, x, y, z=0.0) -> np.ndarray:
    """Vectorised :func:`per_at` over arrays of vehicle coordinates."""
    if isinstance(profile.model, DistanceProfile):
        raw = profile.model.per(profile.distance(x, y, z))
    else:
        raw = profile.model.per_xy(x, y)
    return np.clip(raw * profile.per_scale, 0.0, 1.0)


def per_at(profile: RsuProfile, position) -> float:
    """PER seen by ``profile`` for a vehicle at ``(x, y[, z])`` metres."""
    x, y, *rest = position
    z = rest[0] if rest else 0.0
    return float(per_array(profile, x, y, z))


def draw_erasure(per: float, rng: np.random.Generator) -> bool:
    """True (lost) with probability ``per``. Always consumes one uniform."""
    return bool(rng.random() < per)


def load_grid(source, cell_size: float = DEFAULT_CELL_M, origin=(0.0, 0.0)) -> PerGrid:
    """Read a PER-grid CSV from a path, text or binary stream.

    Rows are ``x_cell,y_cell,delivery_rate``; the header row is optional and
    ``#`` starts a comment line. Cells not listed get delivery rate 0.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8", newline="") as fh:
            text = fh.read()
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    cells: dict[tuple[int, int], float] = {}
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        fields = [f.strip() for f in row]
        if tuple(fields) == GRID_HEADER:
            continue
        if len(fields) != 3:
            raise ChannelError(f"line {lineno}: expected 3 columns, got {len(fields)}")
        try:
            key = (int(fields[0]), int(fields[1]))
            rate = float(fields[2])
        except ValueError:
            raise ChannelError(f"line {lineno}: malformed row {row!r}") from None
        if not 0.0 <= rate <= 1.0:
            raise ChannelError(f"line {lineno}: delivery_rate {rate} outside [0, 1]")
        if key in cells:
            raise ChannelError(f"line {lineno}: duplicate cell {key}")
        cells[key] = rate
    if not cells:
        return PerGrid(np.zeros((0, 0)), (0, 0), tuple(origin), cell_size)
    xs = [k[0] for k in cells]
    ys = [k[1] for k in cells]
    x0, y0 = min(xs), min(ys)
    grid = np.zeros((max(xs) - x0 + 1, max(ys) - y0 + 1))
    for (i, j), rate in cells.items():
        grid[i - x0, j - y0] = rate
    return PerGrid(grid, (x0, y0), tuple(origin), cell_size)


# Relative calibration of the four Bristol RSUs against RSU1.
BRISTOL_SCALES = {"RSU1": 1.0, "RSU2": 1.10, "RSU3": 1.0, "RSU4": 0.85}
BRISTOL_HEIGHTS = {"RSU1": 8.0, "RSU2": 5.0, "RSU3": 25.0, "RSU4": 12.0}


def default_rsu(rsu_id: str = "RSU1", x: float = 0.0, y: float = 0.0, fog_area: str = "fo1") -> RsuProfile:
    """One of the four Bristol RSUs with the default distance profile."""
    return RsuProfile(
        rsu_id=rsu_id,
        x=x,
        y=y,
        height=BRISTOL_HEIGHTS.get(rsu_id, 8.0),
        model=DistanceProfile(),
        per_scale=BRISTOL_SCALES.get(rsu_id, 1.0),
        fog_area=fog_area,
    )
