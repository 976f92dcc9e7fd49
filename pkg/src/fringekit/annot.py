"""Elliptical antinode annotations: data model, CSV persistence, aggregation.

The canonical on-disk format is a CSV with header
``filename,cx,cy,a,b,theta,rings`` (UTF-8, LF line endings, one row per
ellipse). Angles are degrees counterclockwise from +x and are always
normalized into [0, 180) because an ellipse is symmetric under a half turn.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

CSV_HEADER = "filename,cx,cy,a,b,theta,rings"
_CSV_COLUMNS = CSV_HEADER.split(",")


class AnnotationError(ValueError):
    """Malformed or invariant-violating annotation data."""


def _normalize_theta(theta: float) -> float:
    t = float(theta) % 180.0
    # -1e-14 % 180 can come back as 180.0 exactly
    return 0.0 if t >= 180.0 else t


@dataclass(frozen=True)
class EllipseAnnotation:
    """One antinode label: center, semi-axes, rotation, fractional ring count."""

    cx: float
    cy: float
    a: float
    b: float
    theta: float
    rings: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.cx, self.cy, self.a, self.b, self.theta, self.rings)):
            raise AnnotationError("ellipse fields must be finite")
        if self.b <= 0:
            raise AnnotationError(f"semi-minor axis must be positive, got b={self.b}")
        if self.a < self.b:
            raise AnnotationError(f"a < b (a={self.a}, b={self.b})")
        if self.rings < 0:
            raise AnnotationError(f"rings must be >= 0, got {self.rings}")
        object.__setattr__(self, "theta", _normalize_theta(self.theta))

    def with_rings(self, rings: float) -> "EllipseAnnotation":
        return replace(self, rings=rings)


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box, pixel coordinates, x_min < x_max and y_min < y_max."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate box {self}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))


@dataclass
class FrameRecord:
    """All annotations for one frame, keyed by the image filename stem."""

    frame_id: str
    annotations: list[EllipseAnnotation] = field(default_factory=list)

    def __post_init__(self):
        if not self.frame_id:
            raise AnnotationError("frame_id must be nonempty")


@dataclass
class VolunteerBatch:
    """Raw multi-volunteer submissions for one frame."""

    frame_id: str
    submissions: list[tuple[str, list[EllipseAnnotation]]] = field(default_factory=list)

    def __post_init__(self):
        ids = [vid for vid, _ in self.submissions]
        if len(ids) != len(set(ids)):
            raise AnnotationError("volunteer_id must be unique per batch")


def _fmt(x: float) -> str:
    return f"{float(x):.6g}"


def parse_annotations(text: str) -> list[FrameRecord]:
    """Parse the annotations CSV into frame records grouped by filename.

    Grouping preserves the order of first appearance; rows for the same
    filename need not be adjacent. Raises :class:`AnnotationError` naming the
    offending line (and column where applicable).
    """
    lines = text.splitlines()
    if not lines or lines[0].strip() != CSV_HEADER:
        raise AnnotationError(f"expected header '{CSV_HEADER}'")
    by_frame: dict[str, FrameRecord] = {}
    for line_no, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != len(_CSV_COLUMNS):
            raise AnnotationError(
                f"line {line_no}: expected {len(_CSV_COLUMNS)} fields, got {len(parts)}"
            )
        filename = parts[0].strip()
        if not filename:
            raise AnnotationError(f"line {line_no}, column filename: empty")
        values = {}
        for col, cell in zip(_CSV_COLUMNS[1:], parts[1:]):
            try:
                values[col] = float(cell)
            except ValueError:
                raise AnnotationError(
                    f"line {line_no}, column {col}: could not parse {cell.strip()!r} as a number"
                ) from None
        if values["b"] <= 0:
            raise AnnotationError(f"b <= 0 at line {line_no}")
        if values["a"] < values["b"]:
            raise AnnotationError(f"a < b at line {line_no}")
        if values["rings"] < 0:
            raise AnnotationError(f"negative rings at line {line_no}")
        ann = EllipseAnnotation(**values)
        frame_id = filename.rsplit(".", 1)[0] if filename.endswith(".png") else filename
        if frame_id not in by_frame:
            by_frame[frame_id] = FrameRecord(frame_id=frame_id)
        by_frame[frame_id].annotations.append(ann)
    return list(by_frame.values())


def write_annotations(records: list[FrameRecord]) -> str:
    """Serialize frame records to the CSV format (6 significant digits).

    ``parse_annotations(write_annotations(r))`` reproduces ``r`` exactly for
    values representable at that precision. Validates every record before
    emitting any output.
    """
    seen: set[str] = set()
    for rec in records:
        if not isinstance(rec, FrameRecord):
            raise AnnotationError(f"not a FrameRecord: {rec!r}")
        if rec.frame_id in seen:
            raise AnnotationError(f"duplicate frame_id {rec.frame_id!r}")
        seen.add(rec.frame_id)
    out = [CSV_HEADER]
    for rec in records:
        for e in rec.annotations:
            out.append(
                f"{rec.frame_id}.png,{_fmt(e.cx)},{_fmt(e.cy)},{_fmt(e.a)},"
                f"{_fmt(e.b)},{_fmt(e.theta)},{_fmt(e.rings)}"
            )
    return "\n".join(out) + "\n"


def ellipse_to_bbox(e: EllipseAnnotation) -> BBox:
    """Tight axis-aligned bounding box of an ellipse.

    half_w = sqrt(a^2 cos^2(t) + b^2 sin^2(t)), half_h with sin/cos swapped.
    """
    t = math.radians(e.theta)
    c, s = math.cos(t), math.sin(t)
    half_w = math.sqrt((e.a * c) ** 2 + (e.b * s) ** 2)
    half_h = math.sqrt((e.a * s) ** 2 + (e.b * c) ** 2)
    return BBox(e.cx - half_w, e.cy - half_h, e.cx + half_w, e.cy + half_h)


def _ellipse_mask(e: EllipseAnnotation) -> tuple[int, int, np.ndarray]:
    """Rasterize the ellipse interior at 1 px; returns (x0, y0, bool grid)."""
    box = ellipse_to_bbox(e)
    x0 = math.floor(box.x_min)
    y0 = math.floor(box.y_min)
    x1 = math.ceil(box.x_max) + 1
    y1 = math.ceil(box.y_max) + 1
    xs = np.arange(x0, x1, dtype=float)
    ys = np.arange(y0, y1, dtype=float)
    xg, yg = np.meshgrid(xs - e.cx, ys - e.cy)
    t = math.radians(e.theta)
    u = (xg * math.cos(t) + yg * math.sin(t)) / e.a
    v = (-xg * math.sin(t) + yg * math.cos(t)) / e.b
    return x0, y0, (u * u + v * v) < 1.0


def ellipse_iou(e1: EllipseAnnotation, e2: EllipseAnnotation) -> float:
    """Region IoU of two ellipses, computed by 1-px rasterization."""
    x0a, y0a, ma = _ellipse_mask(e1)
    x0b, y0b, mb = _ellipse_mask(e2)
    x0 = min(x0a, x0b)
    y0 = min(y0a, y0b)
    x1 = max(x0a + ma.shape[1], x0b + mb.shape[1])
    y1 = max(y0a + ma.shape[0], y0b + mb.shape[0])
    grid_a = np.zeros((y1 - y0, x1 - x0), dtype=bool)
    grid_b = np.zeros_like(grid_a)
    grid_a[y0a - y0 : y0a - y0 + ma.shape[0], x0a - x0 : x0a - x0 + ma.shape[1]] = ma
    grid_b[y0b - y0 : y0b - y0 + mb.shape[0], x0b - x0 : x0b - x0 + mb.shape[1]] = mb
    union = np.count_nonzero(grid_a | grid_b)
    if union == 0:
        return 0.0
    return np.count_nonzero(grid_a & grid_b) / union


def _circular_median_theta(thetas: list[float]) -> float:
    """Median orientation on doubled angles; ties go to the smaller angle."""
    doubled = np.sort(np.asarray(thetas, dtype=float) % 180.0) * 2.0
    best_cost = math.inf
    best = 0.0
    for cand in doubled:
        d = np.abs(doubled - cand) % 360.0
        cost = float(np.minimum(d, 360.0 - d).sum())
        if cost < best_cost - 1e-12:
            best_cost = cost
            best = float(cand)
    return (best / 2.0) % 180.0


def aggregate_volunteers(
    batch: VolunteerBatch, min_support: int = 3, iou_threshold: float = 0.3
) -> list[EllipseAnnotation]:
    """Consolidate multi-volunteer submissions into one annotation per cluster.

    Single-linkage clustering on rasterized ellipse IoU; clusters supported by
    at least ``min_support`` distinct volunteers emit the component-wise median
    ellipse (circular median for theta). Output sorted by (cx, cy).
    """
    if min_support < 1:
        raise ValueError("min_support must be >= 1")
    if not 0 < iou_threshold < 1:
        raise ValueError("iou_threshold must be in (0, 1)")
    items: list[tuple[str, EllipseAnnotation]] = []
    for vid, anns in batch.submissions:
        items.extend((vid, a) for a in anns)
    n = len(items)
    if n == 0:
        return []

    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if ellipse_iou(items[i][1], items[j][1]) >= iou_threshold:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)

    clusters: dict[int, list[int]] = {}
    for i in range(n):
        clusters.setdefault(find(i), []).append(i)

    out = []
    for members in clusters.values():
        support = len({items[i][0] for i in members})
        if support < min_support:
            continue
        ells = [items[i][1] for i in members]
        out.append(
            EllipseAnnotation(
                cx=float(np.median([e.cx for e in ells])),
                cy=float(np.median([e.cy for e in ells])),
                a=float(np.median([e.a for e in ells])),
                b=float(np.median([e.b for e in ells])),
                theta=_circular_median_theta([e.theta for e in ells]),
                rings=float(np.median([e.rings for e in ells])),
            )
        )
    out.sort(key=lambda e: (e.cx, e.cy))
    return out


def frame_record_to_json(rec: FrameRecord) -> dict:
    return {
        "frame_id": rec.frame_id,
        "annotations": [
            {"cx": e.cx, "cy": e.cy, "a": e.a, "b": e.b, "theta": e.theta, "rings": e.rings}
            for e in rec.annotations
        ],
    }


def frame_record_from_json(data: dict) -> FrameRecord:
    anns = [
        EllipseAnnotation(
            cx=float(d["cx"]), cy=float(d["cy"]), a=float(d["a"]),
            b=float(d["b"]), theta=float(d["theta"]), rings=float(d["rings"]),
        )
        for d in data.get("annotations", [])
    ]
    return FrameRecord(frame_id=str(data["frame_id"]), annotations=anns)
