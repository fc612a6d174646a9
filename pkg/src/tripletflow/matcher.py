"""Incremental triplet-matching optical flow.

Each polarity stream is processed independently. For an incoming event k
the matcher collects its space-time neighbourhood ``H_k`` (events at most
``d_x`` pixels away whose timestamps lie in ``[t_k - tau - d_t, t_k - tau]``),
then, for every neighbour i, looks in the stored ``H_i`` for events j with
``x_i - x_j == x_k - x_i``. Each such (k, i, j) triplet votes for the
velocity ``(x_j - x_k) / (t_j - t_k)`` with a Gaussian weight on how far
``t_j`` is from the constant-velocity prediction ``t_i - (t_k - t_i)``.

Neighbour search uses per-pixel deques of recent event indices, so each
event touches only the (2*ceil(d_x)+1)^2 pixel block around it.
"""

from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .events import Event, EventBatch

SQRT_2PI = math.sqrt(2.0 * math.pi)
# Radius comparisons tolerate a rounded sqrt(2) such as 1.4142 on the CLI.
RADIUS_TOL = 1e-4


@dataclass(frozen=True)
class MatcherParams:
    """Matcher configuration. Times are integer microseconds."""

    d_x: float = math.sqrt(2.0)
    d_t: int = 100_000
    tau: int = 3_000
    retention: int = 20_000
    exclude_center: bool = False
    weighting: str = "gaussian"
    weight_unit_us: float = 1.0

    def __post_init__(self):
        if not self.d_x > 0:
            raise ValueError("d_x must be positive")
        if not self.d_t > 0 or not self.tau > 0:
            raise ValueError("d_t and tau must be positive")
        if int(self.d_t) != self.d_t or int(self.tau) != self.tau:
            raise ValueError("d_t and tau must be whole microseconds")
        if not self.retention > 0:
            raise ValueError("retention must be positive")
        if self.weighting not in ("gaussian", "uniform"):
            raise ValueError(f"unknown weighting {self.weighting!r}")
        if not self.weight_unit_us > 0:
            raise ValueError("weight_unit_us must be positive")
        object.__setattr__(self, "d_t", int(self.d_t))
        object.__setattr__(self, "tau", int(self.tau))
        object.__setattr__(self, "retention", int(self.retention))

    @classmethod
    def from_ms(cls, dx: float = math.sqrt(2.0), dt_ms: float = 100.0, tau_ms: float = 3.0, **kw):
        return cls(d_x=dx, d_t=round(dt_ms * 1000), tau=round(tau_ms * 1000), **kw)

    @property
    def max_speed(self) -> float:
        """Largest representable triplet speed in px/s."""
        return self.d_x / self.tau * 1e6

    def offsets(self) -> tuple[tuple[int, int], ...]:
        """Pixel offsets (dx, dy) within the search radius, row-major."""
        r = math.ceil(self.d_x)
        out = []
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                if dx == 0 and dy == 0 and self.exclude_center:
                    continue
                if math.hypot(dx, dy) <= self.d_x + RADIUS_TOL:
                    out.append((dx, dy))
        return tuple(out)


@dataclass(frozen=True, slots=True)
class IndexMap:
    owner: int
    neighbors: tuple[int, ...]
    # (local_i, t_i, global_i, x_i, y_i) per neighbour, for find_triplets
    detail: tuple = field(default=(), compare=False, repr=False)


@dataclass(frozen=True, slots=True)
class Triplet:
    k: int
    i: int
    j: int
    v: tuple[float, float]
    w: float


@dataclass(frozen=True, slots=True)
class FlowRecord:
    """Flow of event ``k`` in px/s; ``flow`` is None when no triplet matched."""

    k: int
    flow: tuple[float, float] | None
    n_triplets: int = 0

    @property
    def defined(self) -> bool:
        return self.flow is not None


def triplet_velocity(xk: int, yk: int, tk: int, xj: int, yj: int, tj: int) -> tuple[float, float]:
    """Velocity (x_j - x_k) / (t_j - t_k) in px/s for timestamps in µs."""
    dt = tj - tk
    return ((xj - xk) * 1e6 / dt, (yj - yk) * 1e6 / dt)


def triplet_weight(tk: int, ti: int, tj: int, unit_us: float = 1.0) -> float:
    """Gaussian density of t_j around t_i - delta with std delta = t_k - t_i.

    The density is evaluated with times expressed in ``unit_us``
    microseconds; changing the unit rescales every weight by the same
    factor.
    """
    delta = tk - ti
    r = (tj - ti + delta) / delta
    return math.exp(-0.5 * r * r) / ((delta / unit_us) * SQRT_2PI)


class PolarityState:
    """Retained index maps and per-pixel recency buffers of one polarity.

    Local indices count events of this polarity only. After event n is
    stored, index maps of local events ``n-R+1 .. n`` are retained and only
    those events are searchable through the pixel buffers. Entries of a stored
    index map carry the neighbour's coordinates, so a retained map stays
    usable after its neighbours left the search window.
    """

    def __init__(self, params: MatcherParams):
        self.params = params
        self.offsets = params.offsets()
        self.count = 0
        self.last_t: int | None = None
        r = params.retention
        # slot n % R -> tuple of (global_j, x_j, y_j, t_j) sorted by j
        self._maps: list[tuple | None] = [None] * r
        self._pixel_of: list[tuple[int, int] | None] = [None] * r
        # (x, y) -> deque of (t_i, local_i, global_i)
        self.buffers: dict[tuple[int, int], deque] = {}

    def __len__(self) -> int:
        return min(self.count, self.params.retention)

    def index_map(self, local: int) -> tuple | None:
        """Stored map entries of local event ``local``, or None if evicted."""
        if local < 0 or local >= self.count or local < self.count - self.params.retention:
            return None
        return self._maps[local % self.params.retention]

    def search(self, t: int, x: int, y: int) -> list[tuple[int, int, int, int, int]]:
        """Neighbours of (t, x, y) as (local_i, t_i, global_i, x_i, y_i), ascending."""
        lo = t - self.params.tau - self.params.d_t
        hi = t - self.params.tau
        bufs = self.buffers
        found = []
        for ox, oy in self.offsets:
            px, py = x + ox, y + oy
            buf = bufs.get((px, py))
            if not buf:
                continue
            # entries too old for this event are too old for every later one
            while buf and buf[0][0] < lo:
                buf.popleft()
            for ti, li, gi in buf:
                if ti > hi:
                    break
                found.append((li, ti, gi, px, py))
        found.sort()
        return found

    def store(self, t: int, x: int, y: int, gidx: int, entries: tuple) -> None:
        """Append this event's index map and evict beyond retention."""
        r = self.params.retention
        n = self.count
        slot = n % r
        if n >= r:
            # local n - r shares this slot and leaves the search window now
            obuf = self.buffers.get(self._pixel_of[slot])
            if obuf and obuf[0][1] == n - r:
                obuf.popleft()
        self._maps[slot] = entries
        self._pixel_of[slot] = (x, y)
        buf = self.buffers.get((x, y))
        if buf is None:
            buf = self.buffers[(x, y)] = deque()
        buf.append((t, n, gidx))
        self.count = n + 1
        self.last_t = t


def _estimate(state: PolarityState, t: int, x: int, y: int, gidx: int, sink: list | None) -> FlowRecord:
    if state.last_t is not None and t < state.last_t:
        raise ValueError(f"event at t={t} arrived after t={state.last_t}")
    params = state.params
    neighbors = state.search(t, x, y)
    gaussian = params.weighting == "gaussian"
    unit = params.weight_unit_us
    retention = params.retention
    maps = state._maps
    oldest = state.count - retention

    sw = swx = swy = 0.0
    n_trip = 0
    for li, ti, gi, xi, yi in neighbors:
        if li < oldest:
            continue
        hmap = maps[li % retention]
        if not hmap:
            continue
        ex = 2 * xi - x
        ey = 2 * yi - y
        delta = t - ti
        for gj, xj, yj, tj in hmap:
            if xj != ex or yj != ey:
                continue
            dtj = tj - t
            vx = (xj - x) * 1e6 / dtj
            vy = (yj - y) * 1e6 / dtj
            if gaussian:
                r = (tj - ti + delta) / delta
                w = math.exp(-0.5 * r * r) / ((delta / unit) * SQRT_2PI)
            else:
                w = 1.0
            sw += w
            swx += w * vx
            swy += w * vy
            n_trip += 1
            if sink is not None:
                assert ti <= t - params.tau and tj <= ti - params.tau
                assert (xi - xj, yi - yj) == (x - xi, y - yi)
                sink.append(Triplet(gidx, gi, gj, (vx, vy), w))

    entries = tuple((gi, xi, yi, ti) for _, ti, gi, xi, yi in neighbors)
    state.store(t, x, y, gidx, entries)
    if n_trip == 0 or sw <= 0.0:
        # all-underflowed weights carry no usable vote
        return FlowRecord(gidx, None, n_trip)
    return FlowRecord(gidx, (swx / sw, swy / sw), n_trip)


class MatcherState:
    """Incremental matcher over a mixed-polarity stream.

    ``update`` consumes one event and returns its flow; events must arrive
    in non-decreasing timestamp order within each polarity.
    """

    def __init__(self, params: MatcherParams | None = None, collect_triplets: bool = False):
        self.params = params or MatcherParams()
        self.streams = {1: PolarityState(self.params), -1: PolarityState(self.params)}
        self.n_seen = 0
        self.triplets: list[Triplet] | None = [] if collect_triplets else None

    def update(self, event: Event | tuple, k: int | None = None) -> FlowRecord:
        t, x, y, p = event
        if k is None:
            k = self.n_seen
        self.n_seen += 1
        state = self.streams[1 if p > 0 else -1]
        return _estimate(state, int(t), int(x), int(y), k, self.triplets)


def find_neighborhood(event: Event, state: MatcherState, k: int | None = None) -> IndexMap:
    """Neighbourhood of ``event`` among the retained events of its polarity.

    Stale entries of the scanned pixel buffers are pruned as a side effect;
    this never changes later results because timestamps only grow.
    """
    pstate = state.streams[1 if event.p > 0 else -1]
    found = pstate.search(event.t, event.x, event.y)
    owner = state.n_seen if k is None else k
    return IndexMap(owner, tuple(gi for _, _, gi, _, _ in found), tuple(found))


def find_triplets(event: Event, hmap: IndexMap, state: MatcherState) -> list[Triplet]:
    """Triplets (k, i, j) for ``event`` given its neighbourhood ``hmap``.

    Neighbours whose own index map was evicted contribute nothing.
    """
    pstate = state.streams[1 if event.p > 0 else -1]
    params = state.params
    out = []
    for li, ti, gi, xi, yi in hmap.detail:
        entries = pstate.index_map(li)
        if not entries:
            continue
        for gj, xj, yj, tj in entries:
            if (xi - xj, yi - yj) != (event.x - xi, event.y - yi):
                continue
            v = triplet_velocity(event.x, event.y, event.t, xj, yj, tj)
            if params.weighting == "gaussian":
                w = triplet_weight(event.t, ti, tj, params.weight_unit_us)
            else:
                w = 1.0
            out.append(Triplet(hmap.owner, gi, gj, v, w))
    return out


def estimate_flow_event(event: Event, state: MatcherState, k: int | None = None) -> FlowRecord:
    """Search, match, average and store one event (one step of the stream)."""
    return state.update(event, k)


def weighted_flow(triplets: Iterable[Triplet]) -> tuple[float, float] | None:
    """Weighted mean velocity of ``triplets`` or None if there are none."""
    sw = swx = swy = 0.0
    for tr in triplets:
        sw += tr.w
        swx += tr.w * tr.v[0]
        swy += tr.w * tr.v[1]
    if sw <= 0.0:
        return None
    return (swx / sw, swy / sw)


@dataclass
class FlowResult:
    """Per-event flows of a batch, in batch order."""

    records: list[FlowRecord]
    triplets: list[Triplet] | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def defined(self) -> np.ndarray:
        return np.fromiter((r.flow is not None for r in self.records), bool, len(self.records))

    @property
    def n_triplets(self) -> np.ndarray:
        return np.fromiter((r.n_triplets for r in self.records), np.int64, len(self.records))

    def flow_array(self) -> np.ndarray:
        """(N, 2) float64 flows in px/s; undefined rows are NaN."""
        out = np.full((len(self.records), 2), np.nan)
        for n, r in enumerate(self.records):
            if r.flow is not None:
                out[n] = r.flow
        return out

    def triplet_set(self) -> set[tuple[int, int, int]]:
        if self.triplets is None:
            raise ValueError("triplets were not collected")
        return {(tr.k, tr.i, tr.j) for tr in self.triplets}


def _run_stream(t, x, y, gidx, params: MatcherParams, collect: bool):
    state = PolarityState(params)
    sink = [] if collect else None
    records = [
        _estimate(state, ti, xi, yi, gi, sink)
        for ti, xi, yi, gi in zip(t.tolist(), x.tolist(), y.tolist(), gidx.tolist())
    ]
    return records, sink


def process_batch(
    batch: EventBatch,
    params: MatcherParams | None = None,
    collect_triplets: bool = False,
    workers: int = 1,
) -> FlowResult:
    """Run the incremental matcher over a sorted batch.

    The two polarity streams are independent; with ``workers > 1`` they run
    in separate processes. Output is identical for any ``workers``.
    """
    params = params or MatcherParams()
    n = len(batch)
    if n == 0:
        return FlowResult([], [] if collect_triplets else None)
    if not batch.is_sorted():
        raise ValueError("batch must be sorted by timestamp")

    gidx = np.arange(n, dtype=np.int64)
    jobs = []
    for sign in (1, -1):
        m = batch.p == sign
        jobs.append((batch.t[m], batch.x[m], batch.y[m], gidx[m], params, collect_triplets))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=min(workers, 2)) as pool:
            parts = list(pool.map(_run_stream, *zip(*jobs)))
    else:
        parts = [_run_stream(*job) for job in jobs]

    records: list[FlowRecord | None] = [None] * n
    triplets = [] if collect_triplets else None
    for recs, sink in parts:
        for r in recs:
            records[r.k] = r
        if triplets is not None:
            triplets.extend(sink)
    if triplets is not None:
        triplets.sort(key=lambda tr: (tr.k, tr.i, tr.j))
    return FlowResult(records, triplets)
