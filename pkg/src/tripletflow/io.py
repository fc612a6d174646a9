"""Readers and writers: event text files, Middlebury .flo, flow records, config."""

from __future__ import annotations

import json
import logging
from decimal import Decimal, InvalidOperation
from pathlib import Path

import numpy as np

from .events import US_PER_S, EmptyStreamError, EventBatch, normalize_stream
from .matcher import FlowResult
from .postprocess import DenseFlow

logger = logging.getLogger(__name__)

FLO_MAGIC = b"PIEH"
FLO_INVALID = 1e9


class EventParseError(ValueError):
    def __init__(self, path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.lineno = lineno


def _parse_seconds(token: str) -> int:
    return int((Decimal(token) * US_PER_S).to_integral_value())


def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".json")


def read_events(path: str | Path, resolution: tuple[int, int] | None = None) -> EventBatch:
    """Parse ``t x y p`` lines (t in seconds, p in {0,1}) into a normalized batch.

    Lines starting with ``#`` and blank lines are skipped. Without an
    explicit ``resolution`` the JSON sidecar next to the file is consulted,
    then the bounding box of the coordinates.
    """
    path = Path(path)
    ts, xs, ys, ps = [], [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 4:
                raise EventParseError(path, lineno, f"expected 4 fields 't x y p', got {len(parts)}")
            try:
                t = _parse_seconds(parts[0])
                x, y, p = int(parts[1]), int(parts[2]), int(parts[3])
            except (ValueError, InvalidOperation):
                raise EventParseError(path, lineno, f"malformed event {line!r}") from None
            if p not in (0, 1):
                raise EventParseError(path, lineno, f"polarity {p} outside the domain {{0, 1}}")
            if t < 0:
                raise EventParseError(path, lineno, "negative timestamp")
            ts.append(t)
            xs.append(x)
            ys.append(y)
            ps.append(p)
    if not ts:
        raise EmptyStreamError(f"{path} contains no events")

    if resolution is None:
        side = sidecar_path(path)
        if side.exists():
            resolution = tuple(json.loads(side.read_text())["resolution"])
        else:
            resolution = (max(xs) + 1, max(ys) + 1)
            logger.warning("no resolution given for %s; using bounding box %s", path, resolution)
    raw = np.column_stack([ts, xs, ys, ps]).astype(np.int64)
    return normalize_stream(EventBatch(raw[:, 0], raw[:, 1], raw[:, 2], raw[:, 3], resolution), resolution, "01")


def format_seconds(t_us: int) -> str:
    return f"{t_us // US_PER_S}.{t_us % US_PER_S:06d}"


def write_events(path: str | Path, batch: EventBatch, header: str | None = None) -> None:
    with open(path, "w") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for t, x, y, p in zip(batch.t.tolist(), batch.x.tolist(), batch.y.tolist(), batch.p.tolist()):
            fh.write(f"{format_seconds(t)} {x} {y} {1 if p > 0 else 0}\n")


def write_flo(path: str | Path, flow: DenseFlow) -> None:
    """Middlebury .flo; invalid cells are written as the 1e9 sentinel."""
    h, w = flow.shape
    data = np.where(flow.valid[..., None], flow.flow, FLO_INVALID).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(FLO_MAGIC)
        fh.write(np.array([w, h], dtype="<i4").tobytes())
        fh.write(data.tobytes())


def read_flo(path: str | Path) -> DenseFlow:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != FLO_MAGIC:
            raise ValueError(f"{path}: bad .flo magic {magic!r}")
        w, h = np.frombuffer(fh.read(8), dtype="<i4")
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != 2 * w * h:
        raise ValueError(f"{path}: expected {2 * w * h} floats, found {data.size}")
    flow = data.reshape(h, w, 2).astype(np.float64)
    valid = np.isfinite(flow).all(axis=-1) & (np.abs(flow) < FLO_INVALID / 2).all(axis=-1)
    return DenseFlow(flow, valid)


def write_flow_records(path: str | Path, batch: EventBatch, flows: FlowResult) -> None:
    """One line per event: ``k t x y p fx fy defined`` (t in µs, flow px/s)."""
    fa = flows.flow_array()
    with open(path, "w") as fh:
        fh.write("# k t x y p fx fy defined\n")
        for k in range(len(batch)):
            fx, fy = float(fa[k, 0]), float(fa[k, 1])
            defined = not np.isnan(fx)
            if not defined:
                fx = fy = 0.0
            fh.write(
                f"{k} {int(batch.t[k])} {int(batch.x[k])} {int(batch.y[k])} {int(batch.p[k])} "
                f"{fx!r} {fy!r} {int(defined)}\n"
            )


def read_flow_records(path: str | Path) -> np.ndarray:
    """Flows from a record file as (N, 2) with NaN for undefined rows."""
    rows = np.loadtxt(path, comments="#", ndmin=2)
    fa = rows[:, 5:7].copy()
    fa[rows[:, 7] == 0] = np.nan
    return fa


def read_config(path: str | Path) -> dict[str, str]:
    """``key = value`` lines; ``#`` comments allowed; keys use CLI spelling."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def write_manifest(out_dir: str | Path, artifacts: list[str], config: dict) -> Path:
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps({"artifacts": sorted(artifacts), "config": config}, indent=2, sort_keys=True))
    return path
