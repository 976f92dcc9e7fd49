"""Deterministic synthetic interferogram frames with exact ground truth.

Each frame is a grayscale float image in [0, 1]: a flat background, one
fringe-patterned ellipse per antinode, multiplicative smoothed speckle, and a
final Gaussian blur. The ring count of every antinode is known exactly, which
is what makes the downstream counters testable.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter
from scipy.special import j0, jn_zeros

from .annot import EllipseAnnotation, FrameRecord, ellipse_to_bbox, write_annotations
from .imgio import save_png_u8

PROFILES = ("cosine", "bessel")


class SynthError(ValueError):
    """Invalid synthetic-frame specification."""


@dataclass(frozen=True)
class AntinodeSpec:
    """One antinode to render; ``ellipse.rings`` is the ground-truth count."""

    ellipse: EllipseAnnotation
    contrast: float = 0.9
    profile: str = "cosine"

    def __post_init__(self):
        if not 0 < self.contrast <= 1:
            raise SynthError(f"contrast must be in (0, 1], got {self.contrast}")
        if not 0.5 <= self.ellipse.rings <= 12:
            raise SynthError(f"rings must be in [0.5, 12], got {self.ellipse.rings}")
        if self.profile not in PROFILES:
            raise SynthError(f"profile must be one of {PROFILES}, got {self.profile!r}")


@dataclass(frozen=True)
class SynthSpec:
    """Full recipe for one frame. Identical spec (incl. seed) -> identical pixels."""

    width: int
    height: int
    antinodes: tuple[AntinodeSpec, ...] = ()
    background: float = 0.45
    speckle_strength: float = 0.35
    speckle_scale: float = 1.5
    blur_sigma: float = 0.5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "antinodes", tuple(self.antinodes))
        if self.width < 64 or self.height < 64:
            raise SynthError("frame must be at least 64x64")
        if not 0 <= self.background <= 1:
            raise SynthError("background must be in [0, 1]")
        if not 0 <= self.speckle_strength <= 1:
            raise SynthError("speckle_strength must be in [0, 1]")
        for i, an in enumerate(self.antinodes):
            box = ellipse_to_bbox(an.ellipse)
            if box.x_min < 0 or box.y_min < 0 or box.x_max > self.width - 1 or box.y_max > self.height - 1:
                raise SynthError(f"antinode {i} does not lie fully inside the frame")


def _bessel_scale(rings: float) -> float:
    """Argument scale that puts the ``rings``-th J0 zero at the antinode center.

    Linear interpolation between consecutive zeros for fractional counts,
    anchored at 0 for rings -> 0.
    """
    lo = int(math.floor(rings))
    frac = rings - lo
    zeros = jn_zeros(0, max(lo + 1, 1))
    j_lo = 0.0 if lo == 0 else float(zeros[lo - 1])
    j_hi = float(zeros[lo]) if frac > 0 else j_lo
    return j_lo + frac * (j_hi - j_lo)


def fringe_profile(u, rings: float, profile: str = "cosine"):
    """Fringe intensity at normalized elliptical radius ``u`` (1 = edge).

    cosine: 0.5 + 0.5*cos(2*pi*rings*(1-u)); bessel: J0(j*(1-u))^2 with j the
    interpolated rings-th positive zero of J0. Either way an integer ring
    count yields exactly that many dark fringes between edge and center.
    """
    if rings <= 0:
        raise SynthError("rings must be positive")
    u = np.asarray(u, dtype=float)
    if profile == "cosine":
        return 0.5 + 0.5 * np.cos(2.0 * np.pi * rings * (1.0 - u))
    if profile == "bessel":
        return j0(_bessel_scale(rings) * (1.0 - u)) ** 2
    raise SynthError(f"unknown profile {profile!r}")


def _elliptical_radius(spec_e: EllipseAnnotation, width: int, height: int):
    """Normalized elliptical radius field over the ellipse's bounding window."""
    box = ellipse_to_bbox(spec_e)
    x0 = max(0, math.floor(box.x_min))
    y0 = max(0, math.floor(box.y_min))
    x1 = min(width, math.ceil(box.x_max) + 1)
    y1 = min(height, math.ceil(box.y_max) + 1)
    xs = np.arange(x0, x1, dtype=float) - spec_e.cx
    ys = np.arange(y0, y1, dtype=float) - spec_e.cy
    xg, yg = np.meshgrid(xs, ys)
    t = math.radians(spec_e.theta)
    ur = (xg * math.cos(t) + yg * math.sin(t)) / spec_e.a
    vr = (-xg * math.sin(t) + yg * math.cos(t)) / spec_e.b
    return (slice(y0, y1), slice(x0, x1)), np.hypot(ur, vr)


def render_frame(spec: SynthSpec, frame_id: str | None = None) -> tuple[np.ndarray, FrameRecord]:
    """Render one frame; returns (float image HxW in [0,1], ground truth).

    Raises :class:`SynthError` if any two antinodes overlap (the per-pixel
    ground truth would be ambiguous).
    """
    img = np.full((spec.height, spec.width), float(spec.background))
    coverage = np.zeros(img.shape, dtype=np.uint8)
    for an in spec.antinodes:
        window, u = _elliptical_radius(an.ellipse, spec.width, spec.height)
        inside = u < 1.0
        coverage[window] += inside
        fringe = fringe_profile(u[inside], an.ellipse.rings, an.profile)
        block = img[window]
        block[inside] = (1.0 - an.contrast) * spec.background + an.contrast * fringe
        img[window] = block
    if np.any(coverage > 1):
        raise SynthError("overlapping antinodes: per-pixel ground truth would be ambiguous")

    if spec.speckle_strength > 0:
        rng = np.random.default_rng(spec.seed)
        speckle = rng.exponential(1.0, size=img.shape)
        if spec.speckle_scale > 0:
            speckle = gaussian_filter(speckle, sigma=spec.speckle_scale, mode="nearest")
        speckle /= speckle.mean()
        img = img * (1.0 + spec.speckle_strength * (speckle - 1.0))
    if spec.blur_sigma > 0:
        img = gaussian_filter(img, sigma=spec.blur_sigma, mode="nearest")
    np.clip(img, 0.0, 1.0, out=img)

    if frame_id is None:
        frame_id = f"synth_{spec.seed & 0xFFFFFFFFFFFFFFFF:016x}"
    truth = FrameRecord(frame_id=frame_id, annotations=[an.ellipse for an in spec.antinodes])
    return img, truth


def render_dataset(specs: list[SynthSpec], out_dir) -> dict:
    """Render frames to 8-bit PNGs plus an annotations CSV and a JSON manifest.

    Files are named ``frame_00000.png`` onward; re-running with the same specs
    rewrites byte-identical output.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    seeds = []
    records = []
    for i, spec in enumerate(specs):
        name = f"frame_{i:05d}"
        img, truth = render_frame(spec, frame_id=name)
        save_png_u8(out / f"{name}.png", img)
        files.append(f"{name}.png")
        seeds.append(spec.seed)
        records.append(truth)
    (out / "annotations.csv").write_text(write_annotations(records), encoding="utf-8")
    manifest = {"files": files, "seeds": seeds}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest


@dataclass
class DatasetConfig:
    """Randomized-dataset sampling ranges used by the CLI generator.

    Semi-axis ranges are coupled to the drawn ring count so every fringe stays
    resolvable at the image resolution (the minor-axis fringe period must
    clear Nyquist with margin).
    """

    width: int = 320
    height: int = 240
    min_antinodes: int = 0
    max_antinodes: int = 4
    rings_min: float = 1.0
    rings_max: float = 11.0
    rings_step: float = 0.5
    background: float = 0.45
    speckle_strength: float = 0.35
    speckle_scale: float = 1.5
    blur_sigma: float = 0.5
    contrast: float = 0.9
    margin: int = 18


def sample_spec(cfg: DatasetConfig, seed: int) -> SynthSpec:
    """Draw one frame spec; placement is rejection-sampled to avoid overlap."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(cfg.min_antinodes, cfg.max_antinodes + 1))
    antinodes: list[AntinodeSpec] = []
    boxes = []
    attempts = 0
    while len(antinodes) < n and attempts < 200:
        attempts += 1
        n_steps = int(round((cfg.rings_max - cfg.rings_min) / cfg.rings_step))
        rings = cfg.rings_min + cfg.rings_step * int(rng.integers(0, n_steps + 1))
        b_lo = max(20.0, 2.7 * rings + 2.0)
        b = float(rng.uniform(b_lo, b_lo + 10.0))
        a = float(rng.uniform(b, min(b + 14.0, b * 1.5)))
        theta = float(rng.uniform(0.0, 180.0))
        half = max(a, b) + cfg.margin
        if 2 * half >= min(cfg.width, cfg.height):
            continue
        cx = float(rng.uniform(half, cfg.width - 1 - half))
        cy = float(rng.uniform(half, cfg.height - 1 - half))
        e = EllipseAnnotation(cx=cx, cy=cy, a=a, b=b, theta=theta, rings=rings)
        box = ellipse_to_bbox(e)
        if any(
            box.x_min < o.x_max + cfg.margin and o.x_min < box.x_max + cfg.margin
            and box.y_min < o.y_max + cfg.margin and o.y_min < box.y_max + cfg.margin
            for o in boxes
        ):
            continue
        boxes.append(box)
        antinodes.append(AntinodeSpec(ellipse=e, contrast=cfg.contrast))
    return SynthSpec(
        width=cfg.width,
        height=cfg.height,
        antinodes=tuple(antinodes),
        background=cfg.background,
        speckle_strength=cfg.speckle_strength,
        speckle_scale=cfg.speckle_scale,
        blur_sigma=cfg.blur_sigma,
        seed=seed,
    )


def dataset_digest(out_dir) -> str:
    """SHA-256 over every rendered artifact, for determinism checks."""
    h = hashlib.sha256()
    for path in sorted(Path(out_dir).rglob("*")):
        if path.is_file():
            h.update(path.name.encode())
            h.update(path.read_bytes())
    return h.hexdigest()
