"""Per-cell PRB-utilization time series and their conversion to UE churn.

Traces either come from CSV files (`site,sector,band,timestamp,prb_util`)
or from a diurnal generator: a raised cosine over 24 h plus white noise,
scaled per band and clamped to [0, 1]. Offered load is quantized into UEs
of a fixed PRB demand; the per-interval difference between the current and
the target population becomes arrival/departure events.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .ran import CellId
from .topology import Topology

DAY_S = 86400
DEFAULT_GRANULARITY_S = 900


class TraceError(Exception):
    pass


class ParseError(TraceError):
    def __init__(self, line_no: int, message: str) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class RangeError(TraceError):
    def __init__(self, line_no: int, message: str) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class GridError(TraceError):
    pass


@dataclass
class TrafficTrace:
    """Utilization series per cell on one shared, evenly spaced timestamp grid."""

    granularity_s: int
    series: dict[CellId, list[tuple[int, float]]]

    @property
    def n_intervals(self) -> int:
        if not self.series:
            return 0
        return len(next(iter(self.series.values())))

    def timestamps(self) -> list[int]:
        if not self.series:
            return []
        return [t for t, _ in next(iter(self.series.values()))]

    def util(self, cell: CellId, interval_index: int) -> float:
        return self.series[cell][interval_index][1]

    def validate(self) -> None:
        grid: list[int] | None = None
        for cell, rows in self.series.items():
            ts = [t for t, _ in rows]
            if grid is None:
                grid = ts
                for a, b in zip(ts, ts[1:]):
                    if b - a != self.granularity_s:
                        raise GridError(
                            f"{cell.key()}: spacing {b - a} != {self.granularity_s}"
                        )
            elif ts != grid:
                raise GridError(f"{cell.key()} is not on the shared timestamp grid")
            for t, u in rows:
                if not (0.0 <= u <= 1.0):
                    raise TraceError(f"{cell.key()} at t={t}: utilization {u}")


@dataclass(frozen=True)
class DiurnalConfig:
    """Shape of the synthetic day: one cosine bump per 24 h plus noise.

    trough == peak is allowed and degenerates to a constant profile.
    """

    days: int = 14
    peak_utilization: float = 0.8
    trough_utilization: float = 0.3
    peak_hour: float = 15.0
    noise_std: float = 0.02
    seed: int = 0
    per_band_scale: tuple[float, ...] = ()
    granularity_s: int = DEFAULT_GRANULARITY_S

    def __post_init__(self) -> None:
        if not (0.0 <= self.trough_utilization <= self.peak_utilization <= 1.0):
            raise ValueError("need 0 <= trough <= peak <= 1")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.days < 1:
            raise ValueError("days must be >= 1")

    def band_scale(self, band: int) -> float:
        if band < len(self.per_band_scale):
            return self.per_band_scale[band]
        return 1.0

    def mean_utilization(self, band: int, timestamp_s: int) -> float:
        """Noise-free profile value; the ground truth for predictor checks."""
        hod = (timestamp_s % DAY_S) / 3600.0
        phase = 2.0 * math.pi * (hod - self.peak_hour) / 24.0
        base = self.trough_utilization + (
            self.peak_utilization - self.trough_utilization
        ) * (1.0 + math.cos(phase)) / 2.0
        return min(1.0, max(0.0, base * self.band_scale(band)))


def synth_diurnal(topology: Topology, cfg: DiurnalConfig) -> TrafficTrace:
    """Generate a trace for every cell of the topology.

    Deterministic for a fixed seed: cells are visited in id order and each
    draws one noise vector from the shared generator.
    """
    n = cfg.days * DAY_S // cfg.granularity_s
    timestamps = [k * cfg.granularity_s for k in range(n)]
    rng = np.random.default_rng(cfg.seed)
    series: dict[CellId, list[tuple[int, float]]] = {}
    for cid in topology.cell_ids():
        means = np.array([cfg.mean_utilization(cid.band, t) for t in timestamps])
        noise = rng.normal(0.0, cfg.noise_std, size=n) if cfg.noise_std > 0 else 0.0
        vals = np.clip(means + noise, 0.0, 1.0)
        series[cid] = list(zip(timestamps, (float(v) for v in vals)))
    return TrafficTrace(granularity_s=cfg.granularity_s, series=series)


CSV_HEADER = "site,sector,band,timestamp,prb_util"


def write_trace(trace: TrafficTrace, path: str | Path) -> None:
    lines = [CSV_HEADER]
    for cid in sorted(trace.series):
        for t, u in trace.series[cid]:
            lines.append(f"{cid.site},{cid.sector},{cid.band},{t},{u!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_trace(path: str | Path, topology: Topology) -> TrafficTrace:
    """Parse a trace CSV and check it against the topology and grid rules."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise TraceError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines or lines[0].strip() != CSV_HEADER:
        raise ParseError(1, f"expected header '{CSV_HEADER}'")
    known = set(topology.cell_ids())
    series: dict[CellId, list[tuple[int, float]]] = {}
    for no, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != 5:
            raise ParseError(no, f"expected 5 fields, got {len(parts)}")
        try:
            cid = CellId(int(parts[0]), int(parts[1]), int(parts[2]))
            t = int(parts[3])
            u = float(parts[4])
        except ValueError as exc:
            raise ParseError(no, str(exc)) from exc
        if cid not in known:
            raise ParseError(no, f"cell {cid.key()} not in topology")
        if not (0.0 <= u <= 1.0):
            raise RangeError(no, f"prb_util {u} outside [0, 1]")
        series.setdefault(cid, []).append((t, u))

    if not series:
        raise TraceError(f"{path} holds no samples")
    first = next(iter(series.values()))
    ts = [t for t, _ in first]
    if len(ts) >= 2:
        granularity = ts[1] - ts[0]
        if granularity <= 0:
            raise GridError("timestamps must be strictly increasing")
    else:
        granularity = DEFAULT_GRANULARITY_S
    trace = TrafficTrace(granularity_s=granularity, series=series)
    trace.validate()
    return trace


def target_ue_count(utilization: float, prb_capacity: int, ue_demand_prb: int) -> int:
    """Offered population implied by a utilization sample.

    round() is banker's rounding; exact halves are rare in practice and the
    choice only needs to be deterministic.
    """
    return round(utilization * prb_capacity / ue_demand_prb)


@dataclass(frozen=True)
class TrafficEvent:
    kind: str  # "arrival" | "departure"
    anchor: CellId


def ue_events(
    trace: TrafficTrace,
    interval_index: int,
    cell: CellId,
    prb_capacity: int,
    ue_demand_prb: int,
    current_count: int,
) -> list[TrafficEvent]:
    """Events that move the cell's offered population to this interval's target."""
    target = target_ue_count(trace.util(cell, interval_index), prb_capacity, ue_demand_prb)
    if target > current_count:
        return [TrafficEvent("arrival", cell)] * (target - current_count)
    if target < current_count:
        return [TrafficEvent("departure", cell)] * (current_count - target)
    return []


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def hash_floats(*keys: int, n: int = 1) -> list[float]:
    """Order-independent deterministic uniforms in [0, 1) from integer keys.

    Used for UE placement and QoS draws so that spawning order (which can
    differ between notification modes) never shifts the randomness.
    """
    state = 0
    for k in keys:
        state = _splitmix64(state ^ (k & 0xFFFFFFFFFFFFFFFF))
    out = []
    for _ in range(n):
        state = _splitmix64(state)
        out.append(state / 2**64)
    return out
