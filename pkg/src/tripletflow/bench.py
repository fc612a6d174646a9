"""Single-threaded throughput measurement of the incremental matcher."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from .events import EventBatch
from .matcher import MatcherParams, MatcherState
from .synthetic import SceneSpec, generate


@dataclass
class BenchReport:
    n_events: int
    total_s: float
    events_per_s: float
    mean_us: float
    p99_us: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        return "\n".join(f"{k}={v}" for k, v in self.to_dict().items())


def _replay(batch: EventBatch, params: MatcherParams, n: int | None = None) -> np.ndarray:
    state = MatcherState(params)
    rows = zip(batch.t.tolist(), batch.x.tolist(), batch.y.tolist(), batch.p.tolist())
    lat = np.empty(len(batch) if n is None else min(n, len(batch)), dtype=np.int64)
    clock = time.perf_counter_ns
    update = state.update
    for k, ev in enumerate(rows):
        if k >= len(lat):
            break
        start = clock()
        update(ev, k)
        lat[k] = clock() - start
    return lat


def bench_throughput(
    batch: EventBatch,
    params: MatcherParams | None = None,
    warmup: int = 10_000,
) -> BenchReport:
    """Time the incremental path event by event, state updates included.

    A warm-up replay of the first ``warmup`` events on a throw-away state
    precedes the timed run. File I/O is not part of the measurement.
    """
    params = params or MatcherParams()
    if warmup:
        _replay(batch, params, warmup)
    start = time.perf_counter()
    lat = _replay(batch, params)
    total = time.perf_counter() - start
    n = len(batch)
    if n == 0:
        return BenchReport(0, total, 0.0, 0.0, 0.0)
    return BenchReport(
        n_events=n,
        total_s=total,
        events_per_s=n / total,
        mean_us=float(lat.mean()) / 1e3,
        p99_us=float(np.percentile(lat, 99)) / 1e3,
    )


def benchmark_stream(n_events: int = 300_000, seed: int = 0) -> EventBatch:
    """Moving dot field on a 346 x 260 sensor, cut to ``n_events`` events."""
    duration = max(200_000, int(n_events / 100_000 * 1e6))
    spec = SceneSpec(
        pattern="dots",
        velocity=(150.0, -80.0),
        resolution=(346, 260),
        duration_us=duration,
        n_dots=max(60, duration // 20_000),
        dot_radius=6.0,
    )
    batch, _ = generate(spec, seed)
    while len(batch) < n_events:
        spec.duration_us *= 2
        spec.n_dots *= 2
        batch, _ = generate(spec, seed)
    return batch.select(slice(0, n_events))
