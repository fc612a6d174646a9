"""Evaluation over pre-converted dataset sequences (e.g. MVSEC).

Layout of one converted sequence directory::

    <seq>/events.txt          t x y p, t in seconds, p in {0,1}
    <seq>/events.json         {"resolution": [346, 260]}
    <seq>/gt_dt1/index.txt    one line per GT interval: "<file>.flo t0 t1" (seconds)
    <seq>/gt_dt1/*.flo        displacement in px over [t0, t1], 1e9 = invalid
    <seq>/gt_dt4/...          same for the four-frame interval

See docs/mvsec_conversion.md for producing this layout.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .evaluation import DegenerateBaselineError, NoOverlapError, aee, fwl, scale_flow_to_displacement
from .matcher import MatcherParams, process_batch
from .postprocess import collapse_to_image, nonzero_average_filter, voxelize


@dataclass
class GtInterval:
    path: Path
    t0: int
    t1: int


@dataclass
class SequenceResult:
    aee: float
    outlier_pct: float
    fwl: float | None
    n_intervals: int
    n_skipped: int


def read_index(gt_dir: str | Path) -> list[GtInterval]:
    gt_dir = Path(gt_dir)
    out = []
    for lineno, line in enumerate((gt_dir / "index.txt").read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"{gt_dir / 'index.txt'}:{lineno}: expected '<file> t0 t1'")
        t0, t1 = (io._parse_seconds(s) for s in parts[1:])
        out.append(GtInterval(gt_dir / parts[0], t0, t1))
    return out


def evaluate_sequence(
    seq_dir: str | Path,
    gt_name: str = "gt_dt1",
    params: MatcherParams | None = None,
    threshold: float = 3.0,
) -> SequenceResult:
    """Mean AEE / %Out over GT intervals, and mean FWL over the same intervals.

    Flow is estimated once over the whole stream, so matcher state carries
    across interval boundaries as it would online. Each interval is one
    voxel bin, smoothed, then scaled to displacement over the interval.
    """
    seq_dir = Path(seq_dir)
    batch = io.read_events(seq_dir / "events.txt")
    flows = process_batch(batch, params or MatcherParams()).flow_array()
    errs, outs, fwls, skipped = [], [], [], 0
    for iv in read_index(seq_dir / gt_name):
        lo, hi = np.searchsorted(batch.t, [iv.t0, iv.t1], side="left")
        sub = batch.select(slice(lo, hi))
        if len(sub) == 0:
            skipped += 1
            continue
        f = flows[lo:hi]
        vox = nonzero_average_filter(voxelize(sub, f, 1, span=(iv.t0, iv.t1)))
        gt = io.read_flo(iv.path)
        pred = scale_flow_to_displacement(collapse_to_image(vox, 0), (iv.t1 - iv.t0) * 1e-6)
        try:
            rep = aee(pred, gt, threshold)
        except NoOverlapError:
            skipped += 1
            continue
        errs.append(rep.aee)
        outs.append(rep.outlier_pct)
        try:
            fwls.append(fwl(sub, f))
        except DegenerateBaselineError:
            pass
    if not errs:
        raise NoOverlapError(f"{seq_dir}: no interval had overlapping prediction and ground truth")
    return SequenceResult(
        aee=float(np.mean(errs)),
        outlier_pct=float(np.mean(outs)),
        fwl=float(np.mean(fwls)) if fwls else None,
        n_intervals=len(errs),
        n_skipped=skipped,
    )


def sequence_dirs(root: str | Path) -> dict[str, Path]:
    root = Path(root)
    return {p.name: p for p in sorted(root.iterdir()) if (p / "events.txt").exists()}

