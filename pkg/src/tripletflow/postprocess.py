"""Voxelization and smoothing of per-event flow."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .events import EventBatch
from .matcher import FlowResult


class InvalidBinCount(ValueError):
    pass


@dataclass
class DenseFlow:
    """H x W x 2 flow image with a validity mask; invalid cells hold NaN."""

    flow: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.flow = np.asarray(self.flow, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.flow.shape[:2] != self.valid.shape or self.flow.shape[2:] != (2,):
            raise ValueError(f"flow {self.flow.shape} and mask {self.valid.shape} disagree")
        self.flow = np.where(self.valid[..., None], self.flow, np.nan)

    @property
    def shape(self) -> tuple[int, int]:
        return self.valid.shape

    @property
    def resolution(self) -> tuple[int, int]:
        h, w = self.valid.shape
        return (w, h)


@dataclass
class VoxelFlow:
    """Space-time flow grid: ``flow`` is (B, H, W, 2), ``valid`` is (B, H, W)."""

    edges: np.ndarray
    flow: np.ndarray
    valid: np.ndarray

    @property
    def n_bins(self) -> int:
        return len(self.edges) - 1

    @property
    def resolution(self) -> tuple[int, int]:
        return (self.valid.shape[2], self.valid.shape[1])


def bin_edges(t0: int, t1: int, n_bins: int) -> np.ndarray:
    if n_bins < 1:
        raise InvalidBinCount(f"bin count must be >= 1, got {n_bins}")
    if t1 <= t0:
        t1 = t0 + 1
    return np.linspace(float(t0), float(t1), n_bins + 1)


def voxelize(
    batch: EventBatch,
    flows: FlowResult | np.ndarray,
    n_bins: int = 1,
    span: tuple[int, int] | None = None,
) -> VoxelFlow:
    """Average defined per-event flows into (time bin, pixel) cells.

    ``flows`` is a FlowResult or an (N, 2) array with NaN rows for
    undefined flow. The time span defaults to the batch's first and last
    timestamps; the last bin is closed on the right.
    """
    if n_bins < 1:
        raise InvalidBinCount(f"bin count must be >= 1, got {n_bins}")
    fa = flows.flow_array() if isinstance(flows, FlowResult) else np.asarray(flows, dtype=np.float64)
    if len(fa) != len(batch):
        raise ValueError("flows are not aligned with the batch")
    w, h = batch.resolution
    if span is None:
        span = (int(batch.t.min()), int(batch.t.max())) if len(batch) else (0, 1)
    edges = bin_edges(span[0], span[1], n_bins)

    sums = np.zeros((n_bins, h, w, 2))
    counts = np.zeros((n_bins, h, w), dtype=np.int64)
    ok = ~np.isnan(fa).any(axis=1)
    ok &= (batch.t >= edges[0]) & (batch.t <= edges[-1])
    if np.any(ok):
        b = np.searchsorted(edges, batch.t[ok], side="right") - 1
        b = np.clip(b, 0, n_bins - 1)
        ys, xs = batch.y[ok], batch.x[ok]
        np.add.at(sums, (b, ys, xs), fa[ok])
        np.add.at(counts, (b, ys, xs), 1)
    valid = counts > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        flow = sums / counts[..., None]
    flow[~valid] = np.nan
    return VoxelFlow(edges, flow, valid)


def _box3(a: np.ndarray) -> np.ndarray:
    """Sum over the 3x3 neighbourhood of the last two axes, zero-padded."""
    pad = [(0, 0)] * (a.ndim - 2) + [(1, 1), (1, 1)]
    p = np.pad(a, pad)
    h, w = a.shape[-2:]
    out = np.zeros_like(a)
    for dy in range(3):
        for dx in range(3):
            out += p[..., dy : dy + h, dx : dx + w]
    return out


def nonzero_average_filter(v: VoxelFlow) -> VoxelFlow:
    """3x3 mean over valid cells only, per time bin (single pass).

    Cells without any valid neighbour stay invalid, so the valid set can
    only grow.
    """
    vals = np.where(v.valid[..., None], v.flow, 0.0)
    n = _box3(v.valid.astype(np.int64))
    su = _box3(vals[..., 0])
    sv = _box3(vals[..., 1])
    valid = n > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        flow = np.stack([su / n, sv / n], axis=-1)
    flow[~valid] = np.nan
    return VoxelFlow(v.edges.copy(), flow, valid)


def collapse_to_image(v: VoxelFlow, bin_index: int = 0) -> DenseFlow:
    """One time slice of the voxel grid as a dense flow image."""
    if not 0 <= bin_index < v.n_bins:
        raise IndexError(f"bin {bin_index} out of range for {v.n_bins} bins")
    return DenseFlow(v.flow[bin_index].copy(), v.valid[bin_index].copy())
