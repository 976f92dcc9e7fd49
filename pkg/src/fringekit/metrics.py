"""Scoring: box IoU matching, COCO-style mAP, ring-count accuracies, losses.

Conventions fixed here: mAP averages 101-point interpolated AP over IoU
thresholds 0.50:0.05:0.95 for a single class; ring accuracies are reported at
tolerances {0.5, 0.7, 1.0, 1.5, 2.0}; pixel metrics run over the union of
prediction and target support, never over pure background.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .annot import BBox

TOLERANCES = (0.5, 0.7, 1.0, 1.5, 2.0)
IOU_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))
_RECALL_GRID = np.arange(101) / 100.0


class EvalError(ValueError):
    """Metric undefined for the given inputs."""


@dataclass(frozen=True)
class ScoredBox:
    """A prediction as the scorer sees it: box, confidence, ring count."""

    bbox: BBox
    score: float
    rings: float = 0.0


@dataclass(frozen=True)
class TruthBox:
    bbox: BBox
    rings: float = 0.0


@dataclass
class MatchResult:
    pairs: list[tuple[int, int, float]]  # (pred index, truth index, IoU)
    fp: list[int]
    fn: list[int]


@dataclass
class EvalReport:
    map_coco: float
    mae: float | None
    acc: dict[float, float | None]
    n_matched: int
    n_fp: int
    n_fn: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "map_coco": self.map_coco,
                "mae": self.mae,
                "acc": {str(t): v for t, v in self.acc.items()},
                "n_matched": self.n_matched,
                "n_fp": self.n_fp,
                "n_fn": self.n_fn,
            },
            indent=2,
        )


@dataclass
class PixelEvalReport:
    mae: float | None
    acc: dict[float, float | None]
    support_px: int


@dataclass
class LossRanking:
    entries: list[tuple[str, float]]


@dataclass(frozen=True)
class LossConfig:
    fp_weight: float = 1.0
    fn_weight: float = 1.0
    ring_weight: float = 0.5
    iou_thresh: float = 0.5


def iou(a: BBox, b: BBox) -> float:
    """Intersection-over-union of two boxes."""
    ix = max(0.0, min(a.x_max, b.x_max) - max(a.x_min, b.x_min))
    iy = max(0.0, min(a.y_max, b.y_max) - max(a.y_min, b.y_min))
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union if union > 0 else 0.0


def match(preds: list[ScoredBox], truths: list[TruthBox], iou_thresh: float = 0.5) -> MatchResult:
    """Greedy matching in descending score order.

    Each prediction claims the unclaimed truth with the highest IoU if that
    IoU reaches the threshold; equal IoUs break toward the lower truth index.
    """
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].score, i))
    claimed: set[int] = set()
    pairs: list[tuple[int, int, float]] = []
    fp: list[int] = []
    for pi in order:
        best_iou = 0.0
        best_ti = -1
        for ti, truth in enumerate(truths):
            if ti in claimed:
                continue
            v = iou(preds[pi].bbox, truth.bbox)
            if v > best_iou:
                best_iou = v
                best_ti = ti
        if best_ti >= 0 and best_iou >= iou_thresh:
            claimed.add(best_ti)
            pairs.append((pi, best_ti, best_iou))
        else:
            fp.append(pi)
    fn = [ti for ti in range(len(truths)) if ti not in claimed]
    return MatchResult(pairs=pairs, fp=fp, fn=fn)


def _average_precision(
    preds_by_frame: dict[str, list[ScoredBox]],
    truths_by_frame: dict[str, list[TruthBox]],
    iou_thresh: float,
) -> float:
    flat: list[tuple[float, str, int]] = []
    for fid, preds in preds_by_frame.items():
        for i, p in enumerate(preds):
            flat.append((p.score, fid, i))
    flat.sort(key=lambda item: (-item[0], item[1], item[2]))
    n_truth = sum(len(v) for v in truths_by_frame.values())
    if not flat:
        return 0.0
    claimed: dict[str, set[int]] = {fid: set() for fid in truths_by_frame}
    tp_flags = np.zeros(len(flat), dtype=bool)
    for rank, (_, fid, pi) in enumerate(flat):
        truths = truths_by_frame.get(fid, [])
        taken = claimed.setdefault(fid, set())
        best_iou = 0.0
        best_ti = -1
        for ti, truth in enumerate(truths):
            if ti in taken:
                continue
            v = iou(preds_by_frame[fid][pi].bbox, truth.bbox)
            if v > best_iou:
                best_iou = v
                best_ti = ti
        if best_ti >= 0 and best_iou >= iou_thresh:
            taken.add(best_ti)
            tp_flags[rank] = True
    tp_cum = np.cumsum(tp_flags)
    ranks = np.arange(1, len(flat) + 1)
    precision = tp_cum / ranks
    recall = tp_cum / n_truth
    # Precision envelope, then sample at the 101 standard recall points.
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, _RECALL_GRID, side="left")
    sampled = np.where(idx < len(envelope), envelope[np.minimum(idx, len(envelope) - 1)], 0.0)
    return float(sampled.mean())


def coco_map(
    preds_by_frame: dict[str, list[ScoredBox]],
    truths_by_frame: dict[str, list[TruthBox]],
) -> float:
    """Single-class mAP over IoU thresholds 0.50:0.05:0.95, 101-point interpolation."""
    n_truth = sum(len(v) for v in truths_by_frame.values())
    if n_truth == 0:
        raise EvalError("mAP undefined: no ground truth boxes")
    aps = [_average_precision(preds_by_frame, truths_by_frame, t) for t in IOU_THRESHOLDS]
    return float(np.mean(aps))


@dataclass
class RingScores:
    n: int
    mae: float | None
    acc: dict[float, float | None]


def ring_scores(pairs: list[tuple[float, float]]) -> RingScores:
    """MAE and +-tolerance accuracies over (predicted, target) ring pairs.

    Empty input yields n=0 with absent (None) metrics, never zeros.
    """
    if not pairs:
        return RingScores(n=0, mae=None, acc={t: None for t in TOLERANCES})
    diffs = np.abs([p - t for p, t in pairs])
    acc = {t: float(np.mean(diffs <= t)) for t in TOLERANCES}
    return RingScores(n=len(pairs), mae=float(diffs.mean()), acc=acc)


def pixel_scores(pred: np.ndarray, target: np.ndarray) -> PixelEvalReport:
    """Pixelwise MAE/accuracies over the union of nonzero supports."""
    p = np.asarray(pred, dtype=float)
    t = np.asarray(target, dtype=float)
    if p.shape != t.shape:
        raise EvalError(f"shape mismatch: {p.shape} vs {t.shape}")
    support = (p > 0) | (t > 0)
    n = int(np.count_nonzero(support))
    if n == 0:
        return PixelEvalReport(mae=None, acc={tol: None for tol in TOLERANCES}, support_px=0)
    diffs = np.abs(p[support] - t[support])
    acc = {tol: float(np.mean(diffs <= tol)) for tol in TOLERANCES}
    return PixelEvalReport(mae=float(diffs.mean()), acc=acc, support_px=n)


def frame_loss(
    preds: list[ScoredBox], truths: list[TruthBox], cfg: LossConfig = LossConfig()
) -> float:
    """Cardinality errors plus matched localization and ring-count penalties."""
    result = match(preds, truths, cfg.iou_thresh)
    loss = cfg.fp_weight * len(result.fp) + cfg.fn_weight * len(result.fn)
    for pi, ti, v in result.pairs:
        loss += (1.0 - v) + cfg.ring_weight * abs(preds[pi].rings - truths[ti].rings)
    return float(loss)


def rank_by_loss(
    truths_by_frame: dict[str, list[TruthBox]],
    preds_by_frame: dict[str, list[ScoredBox]],
    cfg: LossConfig = LossConfig(),
) -> LossRanking:
    """Frames ordered by descending loss; ties break on frame_id."""
    frame_ids = sorted(set(truths_by_frame) | set(preds_by_frame))
    entries = [
        (fid, frame_loss(preds_by_frame.get(fid, []), truths_by_frame.get(fid, []), cfg))
        for fid in frame_ids
    ]
    entries.sort(key=lambda kv: (-kv[1], kv[0]))
    return LossRanking(entries=entries)


def evaluate_detections(
    preds_by_frame: dict[str, list[ScoredBox]],
    truths_by_frame: dict[str, list[TruthBox]],
    iou_thresh: float = 0.5,
) -> EvalReport:
    """Full region-level report: mAP plus ring scores over IoU-matched pairs."""
    pairs: list[tuple[float, float]] = []
    n_fp = 0
    n_fn = 0
    for fid in sorted(set(preds_by_frame) | set(truths_by_frame)):
        preds = preds_by_frame.get(fid, [])
        truths = truths_by_frame.get(fid, [])
        result = match(preds, truths, iou_thresh)
        pairs.extend((preds[pi].rings, truths[ti].rings) for pi, ti, _ in result.pairs)
        n_fp += len(result.fp)
        n_fn += len(result.fn)
    scores = ring_scores(pairs)
    return EvalReport(
        map_coco=coco_map(preds_by_frame, truths_by_frame),
        mae=scores.mae,
        acc=scores.acc,
        n_matched=scores.n,
        n_fp=n_fp,
        n_fn=n_fn,
    )


def report_csv_row(dataset: str, map_coco: float | None, mae: float | None,
                   acc: dict[float, float | None]) -> str:
    """One results row: ``dataset,mAP,MAE,acc0.5,acc0.7,acc1,acc1.5,acc2``."""
    def fmt(v):
        return "" if v is None else f"{v:.3g}"

    cells = [dataset, fmt(map_coco), fmt(mae)] + [fmt(acc.get(t)) for t in TOLERANCES]
    return ",".join(cells)


REPORT_CSV_HEADER = "dataset,mAP,MAE,acc0.5,acc0.7,acc1,acc1.5,acc2"
