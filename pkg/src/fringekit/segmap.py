"""Per-pixel ring-count maps: painted targets, painted predictions, quantization.

A ring map is a single-channel float image whose nonzero pixels carry the
ring count of the antinode covering them. Maps persist as 16-bit PNGs at a
fixed counts-per-ring scale with a JSON sidecar.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .annot import BBox, EllipseAnnotation, FrameRecord
from .detect import Detection, DetectorConfig, detect_antinodes
from .imgio import load_png_u16, save_png_u16
from .rings import CropError, RingCounterConfig, count_rings, crop_and_square

MAP_SCALE = 5000  # png counts per ring; lossless to 2e-4 rings
DEFAULT_BIN = 0.7


@dataclass(frozen=True)
class RingMap:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(v)) or (v < 0).any():
            raise ValueError("ring map values must be finite and >= 0")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class QuantizedRingMap:
    values: np.ndarray
    bin: float


def _paint(values: np.ndarray, e: EllipseAnnotation, level: float) -> None:
    h, w = values.shape
    t = math.radians(e.theta)
    x0 = max(0, int(math.floor(e.cx - max(e.a, e.b))))
    x1 = min(w, int(math.ceil(e.cx + max(e.a, e.b))) + 1)
    y0 = max(0, int(math.floor(e.cy - max(e.a, e.b))))
    y1 = min(h, int(math.ceil(e.cy + max(e.a, e.b))) + 1)
    if x0 >= x1 or y0 >= y1:
        return
    xs = np.arange(x0, x1, dtype=float) - e.cx
    ys = np.arange(y0, y1, dtype=float) - e.cy
    xg, yg = np.meshgrid(xs, ys)
    u = (xg * math.cos(t) + yg * math.sin(t)) / e.a
    v = (-xg * math.sin(t) + yg * math.cos(t)) / e.b
    inside = (u * u + v * v) < 1.0
    region = values[y0:y1, x0:x1]
    region[inside] = np.maximum(region[inside], level)


def build_target_map(frame: FrameRecord, height: int, width: int) -> RingMap:
    """Paint every annotation's interior with its ring count; overlaps keep the max."""
    values = np.zeros((height, width))
    for e in frame.annotations:
        _paint(values, e, e.rings)
    return RingMap(values=values)


def analyze_frame(
    image: np.ndarray,
    detector_cfg: DetectorConfig = DetectorConfig(),
    ring_cfg: RingCounterConfig = RingCounterConfig(),
) -> tuple[list[Detection], RingMap]:
    """Detect antinodes, count rings on each crop, and paint the predicted map.

    Detections whose fitted ellipse cannot be cropped (touching the frame
    edge) keep a ring count of 0 and are not painted.
    """
    img = np.asarray(image, dtype=float)
    detections = detect_antinodes(img, detector_cfg)
    values = np.zeros(img.shape)
    out = []
    for det in detections:
        try:
            patch = crop_and_square(img, det.ellipse, ring_cfg.patch_size)
        except CropError:
            out.append(det)
            continue
        counted = count_rings(patch, ring_cfg)
        ellipse = det.ellipse.with_rings(counted.value)
        out.append(Detection(bbox=det.bbox, score=det.score, ellipse=ellipse))
        if counted.value > 0:
            _paint(values, ellipse, counted.value)
    return out, RingMap(values=values)


def predict_map(
    image: np.ndarray,
    detector_cfg: DetectorConfig = DetectorConfig(),
    ring_cfg: RingCounterConfig = RingCounterConfig(),
) -> RingMap:
    """Predicted ring map for a frame (detector + counter, interiors painted)."""
    return analyze_frame(image, detector_cfg, ring_cfg)[1]


def quantize_map(m: RingMap, bin: float = DEFAULT_BIN) -> QuantizedRingMap:
    """Snap every value to the nearest multiple of ``bin``; ties round away from zero."""
    if bin <= 0:
        raise ValueError("bin must be positive")
    v = m.values
    quantized = bin * np.sign(v) * np.floor(np.abs(v) / bin + 0.5)
    return QuantizedRingMap(values=quantized, bin=bin)


def map_to_counts(values: np.ndarray) -> list[tuple[BBox, float]]:
    """Per-region (bbox, median ring count) over connected nonzero support."""
    v = np.asarray(values, dtype=float)
    labels, n = ndimage.label(v > 0)
    out = []
    for idx, slc in enumerate(ndimage.find_objects(labels), start=1):
        if slc is None:
            continue
        region = labels[slc] == idx
        rings = float(np.median(v[slc][region]))
        bbox = BBox(
            x_min=float(slc[1].start), y_min=float(slc[0].start),
            x_max=float(slc[1].stop), y_max=float(slc[0].stop),
        )
        out.append((bbox, rings))
    return out


def save_ring_map(path, values: np.ndarray, bin: float | None = None) -> None:
    """Persist a ring map as 16-bit PNG + JSON sidecar recording the scale."""
    path = Path(path)
    scaled = np.round(np.asarray(values, dtype=float) * MAP_SCALE)
    if scaled.max(initial=0.0) > np.iinfo(np.uint16).max:
        raise ValueError("ring values too large for 16-bit storage")
    save_png_u16(path, scaled.astype(np.uint16))
    sidecar = {"scale": MAP_SCALE}
    if bin is not None:
        sidecar["bin"] = bin
    path.with_suffix(".json").write_text(json.dumps(sidecar) + "\n", encoding="utf-8")


def load_ring_map(path) -> np.ndarray:
    path = Path(path)
    sidecar = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    return load_png_u16(path).astype(float) / float(sidecar["scale"])
