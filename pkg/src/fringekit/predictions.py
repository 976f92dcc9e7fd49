"""Predictions CSV (detector + counter output) and metric-input adapters."""

from __future__ import annotations

from .annot import AnnotationError, EllipseAnnotation, FrameRecord, ellipse_to_bbox
from .detect import Detection
from .metrics import ScoredBox, TruthBox

PRED_CSV_HEADER = "filename,score,cx,cy,a,b,theta,rings"


def parse_predictions(text: str) -> dict[str, list[Detection]]:
    """Parse a predictions CSV into detections grouped by frame id."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != PRED_CSV_HEADER:
        raise AnnotationError(f"expected header '{PRED_CSV_HEADER}'")
    out: dict[str, list[Detection]] = {}
    for line_no, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != 8:
            raise AnnotationError(f"line {line_no}: expected 8 fields, got {len(parts)}")
        filename = parts[0].strip()
        try:
            score, cx, cy, a, b, theta, rings = (float(p) for p in parts[1:])
        except ValueError:
            raise AnnotationError(f"line {line_no}: non-numeric field") from None
        frame_id = filename.rsplit(".", 1)[0] if filename.endswith(".png") else filename
        ellipse = EllipseAnnotation(cx=cx, cy=cy, a=a, b=b, theta=theta, rings=rings)
        out.setdefault(frame_id, []).append(
            Detection(bbox=ellipse_to_bbox(ellipse), score=score, ellipse=ellipse)
        )
    return out


def write_predictions(preds: dict[str, list[Detection]]) -> str:
    lines = [PRED_CSV_HEADER]
    for frame_id in preds:
        for d in preds[frame_id]:
            e = d.ellipse
            lines.append(
                f"{frame_id}.png,{d.score:.6g},{e.cx:.6g},{e.cy:.6g},"
                f"{e.a:.6g},{e.b:.6g},{e.theta:.6g},{e.rings:.6g}"
            )
    return "\n".join(lines) + "\n"


def detections_to_scored(dets: list[Detection]) -> list[ScoredBox]:
    return [ScoredBox(bbox=d.bbox, score=d.score, rings=d.ellipse.rings) for d in dets]


def record_to_truths(rec: FrameRecord) -> list[TruthBox]:
    return [TruthBox(bbox=ellipse_to_bbox(e), rings=e.rings) for e in rec.annotations]
