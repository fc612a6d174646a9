"""Event representation, stream normalization and polarity separation.

Timestamps are integer microseconds throughout the package. Pixel
coordinates are integer column ``x`` and row ``y``; polarity is +1 / -1.
"""

from __future__ import annotations

import logging
from typing import Iterable, NamedTuple, Sequence

import numpy as np

logger = logging.getLogger(__name__)

US_PER_S = 1_000_000


class EmptyStreamError(ValueError):
    """Raised when an operation receives (or would produce) no events."""


class Event(NamedTuple):
    t: int
    x: int
    y: int
    p: int


class EventBatch:
    """Time-sorted events of one sensor, stored column-wise.

    ``t`` is int64 microseconds, ``x``/``y`` int32 pixels, ``p`` int8 in
    {-1, +1}. ``dropped`` records how many raw events normalization
    discarded; it is bookkeeping only and does not take part in equality.
    """

    __slots__ = ("t", "x", "y", "p", "resolution", "dropped")

    def __init__(self, t, x, y, p, resolution: tuple[int, int], dropped: int = 0):
        self.t = np.asarray(t, dtype=np.int64)
        self.x = np.asarray(x, dtype=np.int32)
        self.y = np.asarray(y, dtype=np.int32)
        self.p = np.asarray(p, dtype=np.int8)
        self.resolution = (int(resolution[0]), int(resolution[1]))
        self.dropped = int(dropped)
        n = len(self.t)
        if not (len(self.x) == len(self.y) == len(self.p) == n):
            raise ValueError("event columns must have equal length")

    @classmethod
    def empty(cls, resolution: tuple[int, int]) -> "EventBatch":
        return cls([], [], [], [], resolution)

    @property
    def width(self) -> int:
        return self.resolution[0]

    @property
    def height(self) -> int:
        return self.resolution[1]

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, k: int) -> Event:
        return Event(int(self.t[k]), int(self.x[k]), int(self.y[k]), int(self.p[k]))

    def __iter__(self):
        for row in zip(self.t.tolist(), self.x.tolist(), self.y.tolist(), self.p.tolist()):
            yield Event(*row)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EventBatch):
            return NotImplemented
        return (
            self.resolution == other.resolution
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.p, other.p)
        )

    def __repr__(self) -> str:
        return f"EventBatch(n={len(self)}, resolution={self.resolution})"

    def select(self, mask_or_index) -> "EventBatch":
        return EventBatch(
            self.t[mask_or_index],
            self.x[mask_or_index],
            self.y[mask_or_index],
            self.p[mask_or_index],
            self.resolution,
        )

    def shifted(self, dt: int = 0, dx: int = 0, dy: int = 0) -> "EventBatch":
        return EventBatch(self.t + dt, self.x + dx, self.y + dy, self.p, self.resolution)

    def is_sorted(self) -> bool:
        return bool(np.all(np.diff(self.t) >= 0))


def _map_polarity(p: np.ndarray, encoding: str) -> np.ndarray:
    values = set(np.unique(p).tolist())
    if encoding == "auto":
        if values <= {0, 1}:
            encoding = "01"
        elif values <= {-1, 1}:
            encoding = "pm1"
        else:
            raise ValueError(f"polarity values {sorted(values)} are neither {{0,1}} nor {{-1,+1}}")
    if encoding == "01":
        if not values <= {0, 1}:
            raise ValueError(f"polarity values {sorted(values)} outside {{0,1}}")
        return np.where(p > 0, 1, -1).astype(np.int8)
    if encoding == "pm1":
        if not values <= {-1, 1}:
            raise ValueError(f"polarity values {sorted(values)} outside {{-1,+1}}")
        return p.astype(np.int8)
    raise ValueError(f"unknown polarity encoding {encoding!r}")


def normalize_stream(
    raw: Sequence[Event] | Iterable[tuple] | EventBatch,
    resolution: tuple[int, int],
    polarity_encoding: str = "auto",
) -> EventBatch:
    """Sort, map polarity to {-1, +1} and drop out-of-bounds events.

    Sorting is stable so events sharing a timestamp keep their input order.
    The number of dropped events is logged and stored on ``batch.dropped``.
    """
    if isinstance(raw, EventBatch):
        t, x, y, p = raw.t, raw.x, raw.y, raw.p
    else:
        rows = list(raw)
        if not rows:
            raise EmptyStreamError("no events to normalize")
        arr = np.asarray(rows, dtype=np.int64).reshape(-1, 4)
        t, x, y, p = arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]
    if len(t) == 0:
        raise EmptyStreamError("no events to normalize")

    width, height = resolution
    if width <= 0 or height <= 0:
        raise ValueError(f"invalid resolution {resolution}")
    if np.any(np.asarray(t) < 0):
        raise ValueError("negative timestamps are not allowed")

    p = _map_polarity(np.asarray(p), polarity_encoding)
    inside = (x >= 0) & (x < width) & (y >= 0) & (y < height)
    n_dropped = int(len(t) - np.count_nonzero(inside))
    if n_dropped:
        logger.warning("dropped %d out-of-bounds events", n_dropped)
    t, x, y, p = t[inside], x[inside], y[inside], p[inside]
    if len(t) == 0:
        raise EmptyStreamError("all events fell outside the sensor resolution")

    order = np.argsort(t, kind="stable")
    return EventBatch(t[order], x[order], y[order], p[order], resolution, dropped=n_dropped)


def split_by_polarity(batch: EventBatch) -> tuple[EventBatch, EventBatch]:
    """Return ``(positive, negative)`` sub-batches, each in input order."""
    pos = batch.p > 0
    return batch.select(pos), batch.select(~pos)
