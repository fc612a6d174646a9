"""Command-line entry point: ``tripletflow <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .bench import bench_throughput, benchmark_stream
from .evaluation import (
    DegenerateBaselineError,
    NoOverlapError,
    aee,
    fwl,
    interior_mask,
    scale_flow_to_displacement,
    velocity_histogram,
)
from .events import EmptyStreamError
from .matcher import MatcherParams, process_batch
from .postprocess import collapse_to_image, nonzero_average_filter, voxelize
from .synthetic import PATTERNS, SceneSpec, generate
from .viz import render_flow, save_png

logger = logging.getLogger("tripletflow")

PARAM_DEFAULTS = {
    "dx": math.sqrt(2.0),
    "dt_ms": 100.0,
    "tau_ms": 3.0,
    "retention": 20_000,
    "exclude_center": False,
    "weighting": "gaussian",
}


def _resolution(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None


def _bool(text: str) -> bool:
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _add_matcher_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("matcher")
    g.add_argument("--config", type=Path, help="key = value file; flags override it")
    g.add_argument("--dx", type=float, help="spatial radius in px (default sqrt(2))")
    g.add_argument("--dt-ms", type=float, help="temporal window in ms (default 100)")
    g.add_argument("--tau-ms", type=float, help="refractory period in ms (default 3)")
    g.add_argument("--retention", type=int, help="index maps kept per polarity (default 20000)")
    g.add_argument("--exclude-center", action="store_const", const=True, default=None,
                   help="ignore same-pixel neighbours")
    g.add_argument("--weighting", choices=("gaussian", "uniform"))


def _settings(args) -> dict:
    """Defaults, then config file, then explicit flags."""
    cfg = dict(PARAM_DEFAULTS)
    if getattr(args, "config", None):
        for key, value in io.read_config(args.config).items():
            if key not in cfg:
                continue
            default = PARAM_DEFAULTS[key]
            if isinstance(default, bool):
                cfg[key] = _bool(value)
            elif isinstance(default, (int, float)):
                cfg[key] = type(default)(value)
            else:
                cfg[key] = value
    for key in PARAM_DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _params(cfg: dict) -> MatcherParams:
    return MatcherParams.from_ms(
        dx=cfg["dx"],
        dt_ms=cfg["dt_ms"],
        tau_ms=cfg["tau_ms"],
        retention=cfg["retention"],
        exclude_center=cfg["exclude_center"],
        weighting=cfg["weighting"],
    )


def cmd_estimate(args) -> int:
    cfg = _settings(args)
    params = _params(cfg)
    batch = io.read_events(args.input, args.resolution)
    flows = process_batch(batch, params, workers=args.workers)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    artifacts = ["flow_events.txt"]
    io.write_flow_records(out / "flow_events.txt", batch, flows)
    vox = voxelize(batch, flows, args.bins)
    if not args.no_smooth:
        vox = nonzero_average_filter(vox)
    for b in range(vox.n_bins):
        disp = scale_flow_to_displacement(collapse_to_image(vox, b), args.eval_dt_ms / 1000)
        name = f"flow_b{b:03d}.flo"
        io.write_flo(out / name, disp)
        artifacts.append(name)

    config = dict(cfg, input=str(args.input), resolution=list(batch.resolution), bins=args.bins,
                  eval_dt_ms=args.eval_dt_ms, smooth=not args.no_smooth, bin_edges_us=vox.edges.tolist())
    io.write_manifest(out, artifacts + ["manifest.json"], config)
    n_def = int(flows.defined.sum())
    print(f"events={len(batch)} defined={n_def} dropped={batch.dropped} bins={vox.n_bins} out_dir={out}")
    return 0


def cmd_evaluate(args) -> int:
    pred = io.read_flo(args.pred)
    gt = io.read_flo(args.gt)
    mask = interior_mask(gt.shape, args.margin) if args.margin else None
    report = aee(pred, gt, args.threshold, mask)
    if args.events and args.event_flow:
        batch = io.read_events(args.events, (gt.shape[1], gt.shape[0]))
        report.fwl = fwl(batch, io.read_flow_records(args.event_flow))
    print(report.to_text())
    if args.out:
        Path(args.out).write_text(report.to_json())
    return 0


def cmd_simulate(args) -> int:
    spec = SceneSpec(
        pattern=args.pattern,
        velocity=(args.vx, args.vy),
        duration_us=round(args.duration_ms * 1000),
        resolution=args.resolution,
        bar_width=args.bar_width,
        jitter_us=args.jitter_us,
        noise_rate=args.noise_rate,
        n_dots=args.n_dots,
        dot_radius=args.dot_radius,
        gt_interval_us=round(args.gt_dt_ms * 1000),
    )
    batch, gt = generate(spec, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_events(out / "events.txt", batch, header="t x y p  (t in s, p in {0,1})")
    io.write_flo(out / "gt.flo", gt.displacement)
    sidecar = {
        "spec": spec.to_dict(),
        "seed": args.seed,
        "resolution": list(spec.resolution),
        "velocity_px_s": list(gt.velocity),
        "gt_interval_us": spec.gt_interval_us,
        "n_events": len(batch),
    }
    (out / "events.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    io.write_manifest(out, ["events.txt", "events.json", "gt.flo", "manifest.json"], sidecar)
    print(f"events={len(batch)} velocity={gt.velocity[0]:.6g},{gt.velocity[1]:.6g} out_dir={out}")
    return 0


def cmd_bench(args) -> int:
    params = _params(_settings(args))
    if args.input:
        batch = io.read_events(args.input, args.resolution)
    else:
        batch = benchmark_stream(args.n_events, args.seed)
    report = bench_throughput(batch, params, warmup=args.warmup)
    print(report.to_text())
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=2))
    return 0


def cmd_viz(args) -> int:
    flow = io.read_flo(args.flo)
    save_png(args.out, render_flow(flow, args.max_magnitude))
    print(f"wrote {args.out}")
    return 0


def cmd_histogram(args) -> int:
    params = _params(_settings(args))
    batch = io.read_events(args.input, args.resolution)
    flows = process_batch(batch, params, collect_triplets=True)
    v = np.array([tr.v for tr in flows.triplets]).reshape(-1, 2)
    top = args.max_speed if args.max_speed is not None else params.max_speed
    hist = velocity_histogram(v, n_magnitude_bins=args.bins, max_speed=top)
    Path(args.out).write_text(hist.to_csv())
    print(" ".join(f"{k}={c}" for k, c in hist.direction_counts.items()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tripletflow", description="Event-based optical flow by triplet matching")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="per-event flow and voxelized .flo slices")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--out-dir", default="out", type=Path)
    p.add_argument("--resolution", type=_resolution, help="WxH (default: sidecar or bounding box)")
    p.add_argument("--bins", type=int, default=1, help="time bins for voxelization")
    p.add_argument("--eval-dt-ms", type=float, default=22.2, help="interval for px/s -> px conversion")
    p.add_argument("--no-smooth", action="store_true", help="skip the 3x3 valid-average filter")
    p.add_argument("--workers", type=int, default=1)
    _add_matcher_flags(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("evaluate", help="AEE / %%Out (and FWL) of a .flo prediction")
    p.add_argument("--pred", required=True, type=Path)
    p.add_argument("--gt", required=True, type=Path)
    p.add_argument("--threshold", type=float, default=3.0)
    p.add_argument("--margin", type=int, default=0, help="ignore pixels this close to the border")
    p.add_argument("--events", type=Path, help="event file, for FWL")
    p.add_argument("--event-flow", type=Path, help="flow_events.txt from estimate, for FWL")
    p.add_argument("--out", type=Path, help="write the report as JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="synthetic events with ground truth")
    p.add_argument("--pattern", choices=PATTERNS, default="bar")
    p.add_argument("--vx", type=float, default=200.0)
    p.add_argument("--vy", type=float, default=0.0)
    p.add_argument("--duration-ms", type=float, default=200.0)
    p.add_argument("--resolution", type=_resolution, default=(64, 48))
    p.add_argument("--bar-width", type=float, default=4.0)
    p.add_argument("--jitter-us", type=float, default=0.0)
    p.add_argument("--noise-rate", type=float, default=0.0)
    p.add_argument("--n-dots", type=int, default=20)
    p.add_argument("--dot-radius", type=float, default=3.0)
    p.add_argument("--gt-dt-ms", type=float, default=22.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="sim", type=Path)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="incremental throughput")
    p.add_argument("--input", type=Path, help="event file (default: synthetic stream)")
    p.add_argument("--resolution", type=_resolution)
    p.add_argument("--n-events", type=int, default=300_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--warmup", type=int, default=10_000)
    p.add_argument("--out", type=Path)
    _add_matcher_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("viz", help="render a .flo file with the flow color wheel")
    p.add_argument("--flo", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--max-magnitude", type=float)
    p.set_defaults(func=cmd_viz)

    p = sub.add_parser("histogram", help="triplet velocity histogram as CSV")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--resolution", type=_resolution)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--bins", type=int, default=20, help="magnitude bins")
    p.add_argument("--max-speed", type=float, help="upper magnitude edge in px/s (default d_x/tau)")
    _add_matcher_flags(p)
    p.set_defaults(func=cmd_histogram)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (EmptyStreamError, NoOverlapError, DegenerateBaselineError, ValueError, OSError) as exc:
        print(f"tripletflow {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
