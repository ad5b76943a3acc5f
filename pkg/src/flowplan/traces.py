"""Demand traces: CSV ingestion and seeded synthetic diurnal generation.

CSV schema, one row per (bin, workflow, SLO label)::

    timestamp_s,workflow,slo_tier,count
    0,video_qa,accuracy-good,132.5

``timestamp_s`` is the bin start in seconds and ``count`` the number of
requests arriving in that bin (fractional counts are allowed; the simulator
treats demand as a fluid rate).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping

import numpy as np

COLUMNS = ("timestamp_s", "workflow", "slo_tier", "count")
DAY = 86400.0
DEFAULT_SLO_MIX = {"accuracy-good": 0.7, "latency-good": 0.3}

Pair = tuple[str, str]


class TraceError(ValueError):
    pass


@dataclass
class DemandTrace:
    resolution: float
    series: dict[Pair, np.ndarray] = field(default_factory=dict)
    start: float = 0.0

    def __post_init__(self):
        if not self.resolution > 0:
            raise TraceError("resolution must be positive")
        self.series = {p: np.asarray(v, dtype=float) for p, v in self.series.items()}
        lengths = {len(v) for v in self.series.values()}
        if len(lengths) > 1:
            raise TraceError("all series must have the same length")
        for p, v in self.series.items():
            if (v < 0).any() or not np.isfinite(v).all():
                raise TraceError(f"series {p} has negative or non-finite counts")

    @property
    def num_bins(self) -> int:
        return len(next(iter(self.series.values()))) if self.series else 0

    @property
    def duration(self) -> float:
        return self.num_bins * self.resolution

    @property
    def pairs(self) -> list[Pair]:
        return sorted(self.series)

    def rates(self, pair: Pair) -> np.ndarray:
        """Requests per second in each bin."""
        return self.series[pair] / self.resolution

    def total(self) -> float:
        return float(sum(v.sum() for v in self.series.values()))

    def peak_rates(self) -> dict[Pair, float]:
        return {p: float(self.rates(p).max(initial=0.0)) for p in self.pairs}


def _number(text: str, what: str, line: int) -> Fraction:
    try:
        value = Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise TraceError(f"line {line}: {what} {text!r} is not a number") from None
    return value


def load_trace_csv(path, resolution: float | None = None) -> DemandTrace:
    """Read a trace CSV; resolution defaults to the gcd of timestamp steps."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return DemandTrace(resolution or 60.0)
        if tuple(h.strip() for h in header) != COLUMNS:
            raise TraceError(f"line 1: expected header {','.join(COLUMNS)}, got {','.join(header)}")
        last = None
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise TraceError(f"line {line}: expected 4 fields, got {len(row)}")
            ts = _number(row[0], "timestamp_s", line)
            count = _number(row[3], "count", line)
            if count < 0:
                raise TraceError(f"line {line}: count must be >= 0")
            if last is not None and ts < last:
                raise TraceError(f"line {line}: timestamps must be non-decreasing ({float(ts)} after {float(last)})")
            last = ts
            workflow, tier = row[1].strip(), row[2].strip()
            if not workflow or not tier:
                raise TraceError(f"line {line}: workflow and slo_tier must be non-empty")
            rows.append((ts, (workflow, tier), float(row[3]), line))
    if not rows:
        return DemandTrace(resolution or 60.0)
    stamps = sorted({r[0] for r in rows})
    start = stamps[0]
    if resolution is None:
        step = Fraction(0)
        for a, b in zip(stamps, stamps[1:]):
            step = Fraction(math.gcd(step.numerator * (b - a).denominator, (b - a).numerator * step.denominator),
                            step.denominator * (b - a).denominator)
        res = step if step > 0 else Fraction(60)
    else:
        res = Fraction(resolution)
    n = int((stamps[-1] - start) / res) + 1
    series: dict[Pair, np.ndarray] = {}
    seen = set()
    for ts, pair, count, line in rows:
        idx = (ts - start) / res
        if idx.denominator != 1:
            raise TraceError(f"line {line}: timestamp {float(ts)} is off the {float(res)} s grid")
        if (idx, pair) in seen:
            raise TraceError(f"line {line}: duplicate row for {pair} at {float(ts)}")
        seen.add((idx, pair))
        series.setdefault(pair, np.zeros(n))[int(idx)] = count
    return DemandTrace(float(res), series, float(start))


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def write_trace_csv(trace: DemandTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for i in range(trace.num_bins):
            ts = trace.start + i * trace.resolution
            for pair in trace.pairs:
                w.writerow([_fmt(ts), pair[0], pair[1], _fmt(trace.series[pair][i])])


@dataclass(frozen=True)
class SynthParams:
    duration: float = DAY
    resolution: float = 60.0
    # requests/second per workflow, before the SLO split
    base_rate: Mapping[str, float] = field(default_factory=lambda: {"video_qa": 3.0, "code_gen": 1.0})
    diurnal_amplitude: float = 0.5
    noise_std: float = 0.05
    slo_mix: Mapping[str, Mapping[str, float]] | None = None
    seed: int = 0
    # hour of day (from trace start) at which demand peaks
    peak_hour: float = 12.0

    def __post_init__(self):
        if not 0 <= self.diurnal_amplitude < 1:
            raise TraceError("diurnal_amplitude must be in [0, 1)")
        if self.noise_std < 0:
            raise TraceError("noise_std must be >= 0")
        if not self.resolution > 0 or self.duration < 0:
            raise TraceError("resolution must be positive and duration non-negative")
        for w, mix in self.mix().items():
            if abs(sum(mix.values()) - 1.0) > 1e-9 or any(v < 0 for v in mix.values()):
                raise TraceError(f"slo_mix for {w!r} must be non-negative and sum to 1")
        for w, rate in self.base_rate.items():
            if rate < 0:
                raise TraceError(f"base_rate for {w!r} must be >= 0")

    def mix(self) -> dict[str, dict[str, float]]:
        if self.slo_mix is not None:
            return {w: dict(m) for w, m in self.slo_mix.items()}
        return {w: dict(DEFAULT_SLO_MIX) for w in self.base_rate}


def synth_trace(params: SynthParams) -> DemandTrace:
    """Sinusoidal daily demand plus seeded Gaussian noise, split across SLO labels."""
    n = int(round(params.duration / params.resolution))
    t = np.arange(n) * params.resolution
    rng = np.random.default_rng(params.seed)
    series = {}
    for workflow in sorted(params.base_rate):
        base = params.base_rate[workflow]
        rate = base * (1 + params.diurnal_amplitude * np.cos(2 * np.pi * (t - params.peak_hour * 3600.0) / DAY))
        noise = rng.standard_normal(n)
        if params.noise_std > 0:
            rate = rate + base * params.noise_std * noise
        counts = np.clip(rate, 0.0, None) * params.resolution
        for tier, frac in sorted(params.mix()[workflow].items()):
            series[(workflow, tier)] = counts * frac
    return DemandTrace(params.resolution, series)
