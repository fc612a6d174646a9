"""Color-wheel rendering of dense flow."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .postprocess import DenseFlow


def render_flow(flow: DenseFlow, max_magnitude: float | None = None) -> np.ndarray:
    """RGB uint8 image: hue = direction, saturation = magnitude / max.

    Zero flow is white, invalid pixels are black.
    """
    h, w = flow.shape
    u = np.where(flow.valid, flow.flow[..., 0], 0.0)
    v = np.where(flow.valid, flow.flow[..., 1], 0.0)
    mag = np.hypot(u, v)
    if max_magnitude is None:
        max_magnitude = float(mag.max()) if flow.valid.any() else 0.0
    sat = mag / max_magnitude if max_magnitude > 0 else np.zeros_like(mag)
    hue = (np.arctan2(v, u) % (2 * np.pi)) / (2 * np.pi)

    hsv = np.zeros((h, w, 3), dtype=np.uint8)
    hsv[..., 0] = np.round(hue * 255).astype(np.int64) % 255  # PIL hue byte: 255 = 360 deg
    hsv[..., 1] = np.round(np.clip(sat, 0, 1) * 255).astype(np.uint8)
    hsv[..., 2] = 255
    rgb = np.asarray(Image.frombytes("HSV", (w, h), hsv.tobytes()).convert("RGB")).copy()
    rgb[~flow.valid] = 0
    return rgb


def save_png(path: str | Path, rgb: np.ndarray) -> None:
    Image.fromarray(rgb).save(path)
