"""Flow accuracy metrics, warped-event sharpness and triplet statistics."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .events import EventBatch
from .matcher import FlowResult, Triplet
from .postprocess import DenseFlow

# Δt=1 and Δt=4 grayscale-frame intervals of the MVSEC benchmark.
DT_ONE_FRAME_S = 0.0222
DT_FOUR_FRAMES_S = 0.089


class NoOverlapError(ValueError):
    """Prediction and ground truth share no valid pixel."""


class DegenerateBaselineError(ValueError):
    """The zero-flow IWE has zero variance, so FWL is undefined."""


@dataclass
class GroundTruthFlow:
    """Dense displacement (px) over ``[t0, t1]`` microseconds."""

    displacement: DenseFlow
    t0: int = 0
    t1: int = 0
    velocity: tuple[float, float] | None = None

    def __post_init__(self):
        finite = np.isfinite(self.displacement.flow).all(axis=-1)
        if np.any(self.displacement.valid & ~finite):
            self.displacement = DenseFlow(self.displacement.flow, self.displacement.valid & finite)


@dataclass
class MetricReport:
    aee: float
    outlier_pct: float
    n_evaluated: int
    coverage: float
    fwl: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        extra = d.pop("extra")
        d.update(extra)
        return d

    def to_text(self) -> str:
        return "\n".join(f"{k}={v}" for k, v in self.to_dict().items())

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def scale_flow_to_displacement(flow: DenseFlow, dt: float) -> DenseFlow:
    """Convert px/s to px over ``dt`` seconds (linear scaling)."""
    if not dt > 0:
        raise ValueError(f"interval must be positive, got {dt}")
    return DenseFlow(flow.flow * dt, flow.valid.copy())


def interior_mask(shape: tuple[int, int], margin: int) -> np.ndarray:
    h, w = shape
    m = np.zeros((h, w), dtype=bool)
    if margin * 2 < h and margin * 2 < w:
        m[margin : h - margin, margin : w - margin] = True
    return m


def aee(
    pred: DenseFlow,
    gt: GroundTruthFlow | DenseFlow,
    threshold: float = 3.0,
    mask: np.ndarray | None = None,
) -> MetricReport:
    """Average endpoint error and outlier percentage (error > ``threshold``).

    Pixels are evaluated where both ground truth and prediction are valid
    (and ``mask``, if given). ``coverage`` is the fraction of GT-valid
    pixels the prediction covers.
    """
    gflow = gt.displacement if isinstance(gt, GroundTruthFlow) else gt
    if pred.shape != gflow.shape:
        raise ValueError(f"resolution mismatch: pred {pred.shape} vs gt {gflow.shape}")
    gt_valid = gflow.valid if mask is None else gflow.valid & mask
    sel = gt_valid & pred.valid
    n = int(np.count_nonzero(sel))
    if n == 0:
        raise NoOverlapError("no pixel has both valid prediction and valid ground truth")
    err = np.linalg.norm(pred.flow[sel] - gflow.flow[sel], axis=-1)
    n_gt = int(np.count_nonzero(gt_valid))
    return MetricReport(
        aee=float(err.mean()),
        outlier_pct=float(100.0 * np.count_nonzero(err > threshold) / n),
        n_evaluated=n,
        coverage=n / n_gt,
    )


def _flow_rows(flows: FlowResult | np.ndarray, n: int) -> np.ndarray:
    fa = flows.flow_array() if isinstance(flows, FlowResult) else np.asarray(flows, dtype=np.float64)
    if len(fa) != n:
        raise ValueError("flows are not aligned with the batch")
    return np.nan_to_num(fa, nan=0.0)


def default_t_ref(batch: EventBatch) -> float:
    return (float(batch.t.min()) + float(batch.t.max())) / 2.0


def warp_events(batch: EventBatch, flows: FlowResult | np.ndarray, t_ref: float) -> np.ndarray:
    """Move each event along its flow to ``t_ref``; returns (N, 2) positions.

    Events with undefined flow stay in place.
    """
    f = _flow_rows(flows, len(batch))
    dt = (t_ref - batch.t.astype(np.float64)) * 1e-6
    return np.stack([batch.x + f[:, 0] * dt, batch.y + f[:, 1] * dt], axis=1)


def iwe(points: np.ndarray, resolution: tuple[int, int]) -> np.ndarray:
    """Bilinear accumulation of unit-mass points into an H x W image.

    Points outside ``[0, W-1] x [0, H-1]`` are discarded whole, so the image
    mass equals the number of kept points.
    """
    w, h = resolution
    img = np.zeros((h, w))
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    px, py = pts[:, 0], pts[:, 1]
    keep = (px >= 0) & (px <= w - 1) & (py >= 0) & (py <= h - 1)
    px, py = px[keep], py[keep]
    x0 = np.floor(px).astype(np.int64)
    y0 = np.floor(py).astype(np.int64)
    fx = px - x0
    fy = py - y0
    for ox, oy, wt in (
        (0, 0, (1 - fx) * (1 - fy)),
        (1, 0, fx * (1 - fy)),
        (0, 1, (1 - fx) * fy),
        (1, 1, fx * fy),
    ):
        xs = x0 + ox
        ys = y0 + oy
        ok = (wt > 0) & (xs < w) & (ys < h)
        np.add.at(img, (ys[ok], xs[ok]), wt[ok])
    return img


def fwl(batch: EventBatch, flows: FlowResult | np.ndarray, t_ref: float | None = None) -> float:
    """Flow warp loss: IWE variance under ``flows`` over that under zero flow."""
    if len(batch) == 0:
        raise ValueError("FWL needs a nonempty batch")
    if t_ref is None:
        t_ref = default_t_ref(batch)
    warped = iwe(warp_events(batch, flows, t_ref), batch.resolution)
    still = iwe(warp_events(batch, np.zeros((len(batch), 2)), t_ref), batch.resolution)
    base = float(np.var(still))
    if base == 0.0:
        raise DegenerateBaselineError("zero-flow IWE has zero variance")
    return float(np.var(warped)) / base


DIRECTION_LABELS = ("E", "SE", "S", "SW", "W", "NW", "N", "NE")


@dataclass
class VelocityHistogram:
    """Triplet velocities by direction and speed.

    Directions are the eight compass bins of image coordinates (x right,
    y down, so "S" is +y), plus ``zero`` for v = 0 and ``other`` for any
    direction that is not a multiple of 45 degrees.
    """

    direction_counts: dict[str, int]
    magnitude_edges: np.ndarray
    magnitude_counts: dict[str, np.ndarray]

    def rows(self):
        for label, counts in self.magnitude_counts.items():
            for b, c in enumerate(counts):
                yield label, b, int(c)

    def to_csv(self) -> str:
        lines = ["direction_bin,magnitude_bin,magnitude_lo,magnitude_hi,count"]
        e = self.magnitude_edges
        for label, b, c in self.rows():
            lines.append(f"{label},{b},{e[b]:.6g},{e[b + 1]:.6g},{c}")
        return "\n".join(lines) + "\n"


def velocity_histogram(
    velocities: np.ndarray | list[Triplet],
    magnitude_edges: np.ndarray | None = None,
    n_magnitude_bins: int = 20,
    max_speed: float | None = None,
    angle_tol_deg: float = 1e-6,
) -> VelocityHistogram:
    if isinstance(velocities, list) and velocities and isinstance(velocities[0], Triplet):
        v = np.array([tr.v for tr in velocities], dtype=np.float64)
    else:
        v = np.asarray(velocities, dtype=np.float64).reshape(-1, 2)
    mag = np.hypot(v[:, 0], v[:, 1])
    if magnitude_edges is None:
        top = max_speed if max_speed is not None else (float(mag.max()) if len(mag) else 0.0)
        if top <= 0:
            top = 1.0
        magnitude_edges = np.linspace(0.0, top * (1 + 1e-9), n_magnitude_bins + 1)
    magnitude_edges = np.asarray(magnitude_edges, dtype=np.float64)

    ang = np.degrees(np.arctan2(v[:, 1], v[:, 0])) % 360.0
    sector = np.round(ang / 45.0)
    off = np.abs(ang - sector * 45.0)
    labels = np.empty(len(v), dtype=object)
    labels[:] = "other"
    cardinal = off <= angle_tol_deg
    for s, name in enumerate(DIRECTION_LABELS):
        labels[cardinal & (sector % 8 == s)] = name
    labels[mag == 0] = "zero"

    names = DIRECTION_LABELS + ("zero", "other")
    nb = len(magnitude_edges) - 1
    dir_counts = {}
    mag_counts = {}
    for name in names:
        m = labels == name
        dir_counts[name] = int(np.count_nonzero(m))
        idx = np.clip(np.searchsorted(magnitude_edges, mag[m], side="right") - 1, 0, nb - 1)
        mag_counts[name] = np.bincount(idx, minlength=nb)[:nb]
    return VelocityHistogram(dir_counts, magnitude_edges, mag_counts)
