"""Synthetic event streams with analytic ground-truth flow.

An idealized sensor: a pixel fires once when a pattern boundary crosses
its centre, +1 for the leading (brightening) boundary and -1 for the
trailing one. Straight edges whose normal is axis-aligned or diagonal are
snapped so the crossing period between pixel levels is a whole number of
microseconds; the ground truth then reports the snapped velocity, which
keeps noiseless streams exactly periodic.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .events import EmptyStreamError, EventBatch
from .evaluation import GroundTruthFlow
from .postprocess import DenseFlow

PATTERNS = ("bar", "vbar", "hbar", "diagonal", "dots")


@dataclass
class SceneSpec:
    pattern: str = "bar"
    velocity: tuple[float, float] = (200.0, 0.0)
    duration_us: int = 200_000
    resolution: tuple[int, int] = (64, 48)
    bar_width: float = 4.0
    events_per_crossing: int = 1
    spacing_us: int = 0  # gap between repeated events of one crossing
    jitter_us: float = 0.0
    noise_rate: float = 0.0  # background events per second over the sensor
    n_dots: int = 20
    dot_radius: float = 3.0
    gt_interval_us: int = 22_200
    snap: bool = True

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ValueError(f"unknown pattern {self.pattern!r}; expected one of {PATTERNS}")
        self.velocity = (float(self.velocity[0]), float(self.velocity[1]))
        self.resolution = (int(self.resolution[0]), int(self.resolution[1]))
        if self.duration_us <= 0 or self.events_per_crossing < 1 or self.gt_interval_us <= 0:
            raise ValueError("duration, events_per_crossing and gt_interval must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        d = dict(d)
        d["velocity"] = tuple(d["velocity"])
        d["resolution"] = tuple(d["resolution"])
        return cls(**d)


def _sign(a: float) -> int:
    return -1 if a < 0 else 1


def _edge_normal(spec: SceneSpec) -> tuple[int, int] | np.ndarray:
    vx, vy = spec.velocity
    if spec.pattern == "vbar":
        return (_sign(vx), 0)
    if spec.pattern == "hbar":
        return (0, _sign(vy))
    if spec.pattern == "diagonal":
        return (_sign(vx), _sign(vy))
    speed = math.hypot(vx, vy)
    n = np.array([vx, vy]) / speed
    for a in (-1, 0, 1):
        for b in (-1, 0, 1):
            if (a, b) != (0, 0) and np.allclose(n, np.array([a, b]) / math.hypot(a, b), atol=1e-12):
                return (a, b)
    return n


def _edge_events(spec: SceneSpec):
    """Leading and trailing crossings of a straight bar; returns rows and v_eff."""
    w, h = spec.resolution
    v = np.array(spec.velocity)
    if not np.any(v):
        return [], (0.0, 0.0)
    normal = _edge_normal(spec)
    ys, xs = np.mgrid[0:h, 0:w]
    xs = xs.ravel()
    ys = ys.ravel()

    if isinstance(normal, tuple) and spec.snap:
        a, b = normal
        unit = np.array([a, b]) / math.hypot(a, b)
        speed_n = float(v @ unit)
        if speed_n <= 0:
            return [], (0.0, 0.0)
        spacing = 1.0 / math.hypot(a, b)
        period = max(1, round(spacing / speed_n * 1e6))
        level = a * xs + b * ys
        lead = (level - level.min() + 1) * period
        width_levels = max(1, round(spec.bar_width / spacing))
        trail = lead + width_levels * period
        speed_eff = spacing / (period * 1e-6)
        tangential = v - speed_n * unit
        v_eff = speed_eff * unit + tangential
    else:
        unit = np.asarray(normal, dtype=np.float64)
        unit = unit / np.linalg.norm(unit)
        speed_n = float(v @ unit)
        if speed_n <= 0:
            return [], (0.0, 0.0)
        s = xs * unit[0] + ys * unit[1]
        s0 = s.min() - 0.5
        lead = np.rint((s - s0) / speed_n * 1e6).astype(np.int64)
        trail = np.rint((s - s0 + spec.bar_width) / speed_n * 1e6).astype(np.int64)
        v_eff = v

    rows = [(lead, xs, ys, np.ones_like(xs)), (trail, xs, ys, -np.ones_like(xs))]
    return rows, (float(v_eff[0]), float(v_eff[1]))


def _dot_events(spec: SceneSpec, rng: np.random.Generator):
    w, h = spec.resolution
    v = np.array(spec.velocity)
    speed2 = float(v @ v)
    if speed2 == 0:
        return [], (0.0, 0.0)
    t_end = spec.duration_us * 1e-6
    r = spec.dot_radius
    travel = v * t_end
    lo = np.minimum([0.0, 0.0], -travel) - r
    hi = np.maximum([w - 1.0, h - 1.0], [w - 1.0, h - 1.0] - travel) + r
    centers = rng.uniform(lo, hi, size=(spec.n_dots, 2))

    ys, xs = np.mgrid[0:h, 0:w]
    pix = np.stack([xs.ravel(), ys.ravel()], axis=1).astype(np.float64)
    rows = []
    for c in centers:
        d = pix - c
        b = d @ v
        disc = b * b - speed2 * (np.einsum("ij,ij->i", d, d) - r * r)
        hit = disc > 0
        root = np.sqrt(np.where(hit, disc, 0.0))
        t_in = (b - root) / speed2
        t_out = (b + root) / speed2
        for tt, pol in ((t_in, 1), (t_out, -1)):
            m = hit & (tt > 0) & (tt <= t_end)
            if np.any(m):
                idx = np.flatnonzero(m)
                rows.append(
                    (
                        np.rint(tt[m] * 1e6).astype(np.int64),
                        idx % w,
                        idx // w,
                        np.full(len(idx), pol),
                    )
                )
    return rows, (float(v[0]), float(v[1]))


def generate(spec: SceneSpec, seed: int = 0) -> tuple[EventBatch, GroundTruthFlow]:
    """Render ``spec`` into events and the ground-truth displacement field.

    Ground truth covers the pixels that the pattern boundary crossed, with
    displacement ``velocity * gt_interval``. Deterministic for a seed.
    """
    rng = np.random.default_rng(seed)
    w, h = spec.resolution
    if spec.pattern == "dots":
        rows, v_eff = _dot_events(spec, rng)
    else:
        rows, v_eff = _edge_events(spec)

    cols = [[], [], [], []]
    for t, x, y, p in rows:
        keep = (t >= 0) & (t <= spec.duration_us)
        for q in range(spec.events_per_crossing):
            cols[0].append(t[keep] + q * spec.spacing_us)
            cols[1].append(x[keep])
            cols[2].append(y[keep])
            cols[3].append(p[keep])
    if cols[0]:
        t, x, y, p = (np.concatenate(c) for c in cols)
        keep = t <= spec.duration_us
        t, x, y, p = t[keep], x[keep], y[keep], p[keep]
    else:
        t = x = y = p = np.zeros(0, dtype=np.int64)

    crossed = np.zeros((h, w), dtype=bool)
    crossed[y, x] = True

    n_noise = rng.poisson(spec.noise_rate * spec.duration_us * 1e-6) if spec.noise_rate > 0 else 0
    if n_noise:
        t = np.concatenate([t, rng.integers(0, spec.duration_us + 1, n_noise)])
        x = np.concatenate([x, rng.integers(0, w, n_noise)])
        y = np.concatenate([y, rng.integers(0, h, n_noise)])
        p = np.concatenate([p, rng.choice([-1, 1], n_noise)])

    if len(t) == 0:
        raise EmptyStreamError("scene produced no events (zero velocity or too short a duration)")
    order = np.lexsort((x, y, t))
    batch = EventBatch(t[order], x[order], y[order], p[order], spec.resolution)
    if spec.jitter_us > 0:
        batch = perturb(batch, spec.jitter_us, 0.0, seed=int(rng.integers(2**63)))

    disp = np.zeros((h, w, 2))
    disp[crossed] = np.array(v_eff) * spec.gt_interval_us * 1e-6
    gt = GroundTruthFlow(DenseFlow(disp, crossed), 0, spec.gt_interval_us, velocity=v_eff)
    return batch, gt


def perturb(batch: EventBatch, jitter_us: float = 0.0, drop_prob: float = 0.0, seed: int = 0) -> EventBatch:
    """Gaussian timestamp jitter (re-sorted, clipped at 0) and i.i.d. drops."""
    rng = np.random.default_rng(seed)
    n = len(batch)
    t = batch.t.copy()
    if jitter_us > 0:
        t = np.maximum(t + np.rint(rng.normal(0.0, jitter_us, n)).astype(np.int64), 0)
    keep = rng.random(n) >= drop_prob if drop_prob > 0 else np.ones(n, dtype=bool)
    order = np.argsort(t[keep], kind="stable")
    sel = np.flatnonzero(keep)[order]
    return EventBatch(t[sel], batch.x[sel], batch.y[sel], batch.p[sel], batch.resolution)
