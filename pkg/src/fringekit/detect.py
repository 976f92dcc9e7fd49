"""Classical antinode detector: local-contrast saliency -> blobs -> ellipses.

Fringed regions are locally high-variance, so a normalized windowed standard
deviation map separates antinodes from background with a global threshold.
Connected components become detections; each gets a moment-fitted ellipse, an
intensity-profile edge refinement (the saliency support overshoots the true
boundary by a window-dependent halo), and a mean-saliency confidence score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .annot import BBox, EllipseAnnotation, ellipse_to_bbox


@dataclass(frozen=True)
class DetectorConfig:
    window: int = 15
    min_area: float = 200.0
    threshold: str | float = "otsu"
    merge_iou: float = 0.5
    refine_edge: bool = True
    # Otsu effectiveness gate: below this the contrast histogram is unimodal
    # (pure speckle, no fringes) and the frame yields no detections.
    min_separability: float = 0.75

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError("window must be odd and >= 3")


@dataclass(frozen=True)
class Detection:
    bbox: BBox
    score: float
    ellipse: EllipseAnnotation


def local_contrast_map(image: np.ndarray, window: int = 15) -> np.ndarray:
    """Windowed standard deviation, edge-clamped, normalized to max 1.

    An all-constant image maps to all zeros.
    """
    img = np.asarray(image, dtype=float)
    mean = ndimage.uniform_filter(img, size=window, mode="nearest")
    mean_sq = ndimage.uniform_filter(img * img, size=window, mode="nearest")
    var = mean_sq - mean * mean
    # kill the catastrophic-cancellation residue a constant region leaves
    var[var < 1e-12] = 0.0
    std = np.sqrt(var)
    peak = std.max()
    if peak > 0:
        std /= peak
    return std


def otsu_threshold(values: np.ndarray, bins: int = 256) -> float:
    """Otsu's threshold over [0, 1]-valued data (maximum between-class variance)."""
    hist, edges = np.histogram(np.asarray(values, dtype=float).ravel(), bins=bins, range=(0.0, 1.0))
    hist = hist.astype(float)
    total = hist.sum()
    if total == 0:
        return 0.0
    w0 = np.cumsum(hist)
    w1 = total - w0
    centers = 0.5 * (edges[:-1] + edges[1:])
    mass = np.cumsum(hist * centers)
    mu0 = np.divide(mass, w0, out=np.zeros_like(mass), where=w0 > 0)
    mu1 = np.divide(mass[-1] - mass, w1, out=np.zeros_like(mass), where=w1 > 0)
    between = w0 * w1 * (mu0 - mu1) ** 2
    k = int(np.argmax(between))
    return float(edges[k + 1])


def otsu_effectiveness(values: np.ndarray, threshold: float) -> float:
    """Otsu's goodness measure: between-class variance over total variance.

    Near 1 for cleanly bimodal data; low when there is nothing to segment.
    Invariant under affine rescaling of the values.
    """
    vals = np.asarray(values, dtype=float).ravel()
    total = vals.var()
    if total <= 0:
        return 0.0
    hi = vals > threshold
    w1 = hi.mean()
    if w1 <= 0 or w1 >= 1:
        return 0.0
    return float(w1 * (1 - w1) * (vals[hi].mean() - vals[~hi].mean()) ** 2 / total)


def _fit_ellipse(ys: np.ndarray, xs: np.ndarray) -> EllipseAnnotation | None:
    """Moment-based ellipse fit: axes are 2*sqrt of the covariance eigenvalues."""
    mx = xs.mean()
    my = ys.mean()
    dx = xs - mx
    dy = ys - my
    cov = np.array([[np.mean(dx * dx), np.mean(dx * dy)], [np.mean(dx * dy), np.mean(dy * dy)]])
    evals, evecs = np.linalg.eigh(cov)
    semi_minor = 2.0 * math.sqrt(max(evals[0], 0.0))
    semi_major = 2.0 * math.sqrt(max(evals[1], 0.0))
    if semi_minor <= 1.0 or semi_major <= 1.0:
        return None
    vx, vy = evecs[0, 1], evecs[1, 1]
    theta = math.degrees(math.atan2(vy, vx)) % 180.0
    return EllipseAnnotation(cx=float(mx), cy=float(my), a=float(semi_major),
                             b=float(semi_minor), theta=theta, rings=0.0)


_PROFILE_LO = 0.5
_PROFILE_HI = 1.7
_PROFILE_BINS = 60


def _sector_scale(rad: np.ndarray, intensity: np.ndarray) -> float | None:
    """Boundary position (in fitted-radius units) from a radial intensity profile.

    The antinode rim is the brightest fringe; the true edge sits at the 50%
    crossing between the rim peak and the background level outside.
    """
    edges = np.linspace(_PROFILE_LO, _PROFILE_HI, _PROFILE_BINS + 1)
    prof = np.full(_PROFILE_BINS, np.nan)
    idx = np.digitize(rad, edges) - 1
    for k in range(_PROFILE_BINS):
        vals = intensity[idx == k]
        if vals.size:
            prof[k] = np.median(vals)
    if np.isnan(prof).all():
        return None
    # forward-fill gaps so scanning is well defined
    for k in range(1, _PROFILE_BINS):
        if np.isnan(prof[k]):
            prof[k] = prof[k - 1]
    first = int(np.argmax(~np.isnan(prof)))
    prof[:first] = prof[first]
    centers = 0.5 * (edges[:-1] + edges[1:])
    search = (centers >= 0.6) & (centers <= 1.15)
    far = centers >= 1.4
    if not search.any() or not far.any():
        return None
    bg = float(np.median(prof[far]))
    dev = prof - bg
    search_idx = np.flatnonzero(search)
    max_dev = float(dev[search].max())
    if max_dev < 0.05:
        return None
    # The rim is the outermost bright bump above background. Deeper fringes can
    # be brighter (the rim blurs into its neighboring dark ring), so the
    # crossing level is taken from the rim bump itself, not the global peak.
    floor = max(0.04, 0.3 * max_dev)
    rim_k = -1
    for k in search_idx[::-1]:
        left = dev[k - 1] if k > 0 else -np.inf
        right = dev[k + 1] if k + 1 < _PROFILE_BINS else -np.inf
        if dev[k] >= floor and dev[k] >= left and dev[k] >= right:
            rim_k = int(k)
            break
    if rim_k < 0:
        return None
    mid = bg + 0.5 * dev[rim_k]
    for k in range(rim_k, _PROFILE_BINS - 1):
        if prof[k + 1] < mid <= prof[k]:
            p0, p1 = prof[k], prof[k + 1]
            frac = (p0 - mid) / (p0 - p1) if p0 != p1 else 0.5
            return float(centers[k] + frac * (centers[k + 1] - centers[k]))
    return float(centers[rim_k])


def _refine_axes(image: np.ndarray, e: EllipseAnnotation) -> EllipseAnnotation:
    """Rescale fitted semi-axes so they land on the intensity edge of the blob.

    Major and minor axes are refined from separate 60-degree angular sectors;
    if no clear edge is found the moment fit is kept.
    """
    h, w = image.shape
    reach = max(e.a, e.b) * _PROFILE_HI + 2.0
    x0 = max(0, int(math.floor(e.cx - reach)))
    x1 = min(w, int(math.ceil(e.cx + reach)) + 1)
    y0 = max(0, int(math.floor(e.cy - reach)))
    y1 = min(h, int(math.ceil(e.cy + reach)) + 1)
    xs = np.arange(x0, x1, dtype=float) - e.cx
    ys = np.arange(y0, y1, dtype=float) - e.cy
    xg, yg = np.meshgrid(xs, ys)
    t = math.radians(e.theta)
    u = (xg * math.cos(t) + yg * math.sin(t)) / e.a
    v = (-xg * math.sin(t) + yg * math.cos(t)) / e.b
    rad = np.hypot(u, v)
    band = (rad >= _PROFILE_LO) & (rad <= _PROFILE_HI)
    if not band.any():
        return e
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_phi = np.abs(u[band] / np.maximum(rad[band], 1e-12))
    values = image[y0:y1, x0:x1][band]
    radb = rad[band]
    major = cos_phi >= math.cos(math.radians(30.0))
    minor = cos_phi <= math.cos(math.radians(60.0))
    s_a = _sector_scale(radb[major], values[major]) if major.any() else None
    s_b = _sector_scale(radb[minor], values[minor]) if minor.any() else None
    if s_a is None and s_b is None:
        return e
    if s_a is None:
        s_a = s_b
    if s_b is None:
        s_b = s_a
    s_a = min(max(s_a, 0.55), 1.3)
    s_b = min(max(s_b, 0.55), 1.3)
    new_a = e.a * s_a
    new_b = e.b * s_b
    if new_b > new_a:
        new_a = new_b = 0.5 * (new_a + new_b)
    if new_b <= 1.0:
        return e
    return EllipseAnnotation(cx=e.cx, cy=e.cy, a=new_a, b=new_b, theta=e.theta, rings=0.0)


def detect_antinodes(image: np.ndarray, cfg: DetectorConfig = DetectorConfig()) -> list[Detection]:
    """Detect fringed regions; returns detections sorted by descending score."""
    img = np.asarray(image, dtype=float)
    contrast = local_contrast_map(img, cfg.window)
    if cfg.threshold == "otsu":
        thr = otsu_threshold(contrast)
        if otsu_effectiveness(contrast, thr) < cfg.min_separability:
            return []
    else:
        thr = float(cfg.threshold)
    mask = contrast > thr
    if not mask.any():
        return []
    structure = np.ones((3, 3), dtype=bool)
    mask = ndimage.binary_closing(mask, structure=structure, iterations=2)
    mask = ndimage.binary_fill_holes(mask)
    labels, n = ndimage.label(mask, structure=structure)
    if n == 0:
        return []

    candidates: list[tuple[float, np.ndarray, np.ndarray]] = []
    for idx in range(1, n + 1):
        ys, xs = np.nonzero(labels == idx)
        if ys.size < cfg.min_area:
            continue
        score = float(contrast[ys, xs].mean())
        candidates.append((score, ys, xs))

    # Merge overlapping candidates (box IoU above cfg.merge_iou): union the
    # pixel support, keep the best score, refit.
    merged = True
    while merged and len(candidates) > 1:
        merged = False
        boxes = []
        for score, ys, xs in candidates:
            e = _fit_ellipse(ys, xs)
            boxes.append(ellipse_to_bbox(e) if e is not None else None)
        for i in range(len(candidates)):
            for j in range(i + 1, len(candidates)):
                if boxes[i] is None or boxes[j] is None:
                    continue
                if _box_iou(boxes[i], boxes[j]) > cfg.merge_iou:
                    si, ysi, xsi = candidates[i]
                    sj, ysj, xsj = candidates[j]
                    candidates[i] = (max(si, sj), np.concatenate([ysi, ysj]), np.concatenate([xsi, xsj]))
                    del candidates[j]
                    merged = True
                    break
            if merged:
                break

    detections = []
    for score, ys, xs in candidates:
        ellipse = _fit_ellipse(ys, xs)
        if ellipse is None:
            continue
        if cfg.refine_edge:
            ellipse = _refine_axes(img, ellipse)
        detections.append(Detection(bbox=ellipse_to_bbox(ellipse), score=score, ellipse=ellipse))
    detections.sort(key=lambda d: (-d.score, d.ellipse.cx, d.ellipse.cy))
    return detections


def _box_iou(a: BBox, b: BBox) -> float:
    ix = max(0.0, min(a.x_max, b.x_max) - max(a.x_min, b.x_min))
    iy = max(0.0, min(a.y_max, b.y_max) - max(a.y_min, b.y_min))
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union if union > 0 else 0.0
