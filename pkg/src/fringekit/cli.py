"""Command-line entry point wiring the full pipeline.

Subcommands: synth, predict, eval, rank, track, serve. Every command is
deterministic given its inputs and --seed. Exit codes: 0 success, 1 usage
error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .annot import AnnotationError, FrameRecord, parse_annotations
from .config import ConfigError, load_config
from .imgio import load_png_f
from .metrics import (
    REPORT_CSV_HEADER,
    EvalError,
    coco_map,
    evaluate_detections,
    pixel_scores,
    rank_by_loss,
    report_csv_row,
)
from .predictions import (
    PRED_CSV_HEADER,
    detections_to_scored,
    parse_predictions,
    record_to_truths,
    write_predictions,
)
from .segmap import analyze_frame, build_target_map, load_ring_map, save_ring_map
from .synth import render_dataset, sample_spec
from .track import FitError, TrackConfig, fit_rise, link, tracks_to_csv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class DataError(Exception):
    pass


def _data_root(args) -> Path:
    if getattr(args, "data_dir", None):
        return Path(args.data_dir)
    env = os.environ.get("FRINGE_DATA_DIR")
    if env:
        return Path(env)
    return Path.cwd()


def _overrides_from_flags(args) -> dict[str, str]:
    over: dict[str, str] = {}
    if args.seed is not None:
        over["seed"] = str(args.seed)
    if getattr(args, "bin", None) is not None:
        over["bin"] = str(args.bin)
    if getattr(args, "score_thresh", None) is not None:
        over["detector.threshold"] = str(args.score_thresh)
    if getattr(args, "iou_thresh", None) is not None:
        over["eval.iou_thresh"] = str(args.iou_thresh)
    return over


def cmd_synth(args) -> int:
    cfg = load_config(args.config, _overrides_from_flags(args))
    out_dir = Path(args.out) if args.out else _data_root(args) / "synth"
    specs = [sample_spec(cfg.synth, seed=cfg.seed + i) for i in range(args.count)]
    manifest = render_dataset(specs, out_dir)
    print(f"wrote {len(manifest['files'])} frames to {out_dir}")
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = load_config(args.config, _overrides_from_flags(args))
    images_dir = Path(args.images)
    if not images_dir.is_dir():
        raise DataError(f"not a directory: {images_dir}")
    out_dir = Path(args.out) if args.out else images_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    maps_dir = out_dir / "maps"
    maps_dir.mkdir(exist_ok=True)
    preds = {}
    failures = []
    for path in sorted(images_dir.glob("*.png")):
        try:
            image = load_png_f(path)
        except Exception as exc:  # corrupt file: report, keep going
            failures.append(f"{path.name}: {exc}")
            continue
        detections, ring_map = analyze_frame(image, cfg.detector, cfg.rings)
        preds[path.stem] = detections
        save_ring_map(maps_dir / f"{path.stem}.png", ring_map.values, bin=cfg.bin)
    (out_dir / "predictions.csv").write_text(write_predictions(preds), encoding="utf-8")
    for line in failures:
        print(f"error: {line}", file=sys.stderr)
    print(f"predicted {len(preds)} frames -> {out_dir / 'predictions.csv'}")
    return EXIT_OK


def _load_eval_inputs(args):
    pred_path = Path(args.pred)
    truth_path = Path(args.truth)
    preds = parse_predictions(pred_path.read_text(encoding="utf-8"))
    records = parse_annotations(truth_path.read_text(encoding="utf-8"))
    truths = {rec.frame_id: record_to_truths(rec) for rec in records}
    # frames with zero annotations are listed only in the dataset manifest
    manifest_path = truth_path.parent / "manifest.json"
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        for name in manifest.get("files", []):
            fid = name.rsplit(".", 1)[0]
            truths.setdefault(fid, [])
            if not any(rec.frame_id == fid for rec in records):
                records.append(FrameRecord(frame_id=fid))
    unknown = sorted(set(preds) - set(truths))
    if unknown:
        raise DataError(f"predictions reference unknown frame ids: {', '.join(unknown)}")
    scored = {fid: detections_to_scored(dets) for fid, dets in preds.items()}
    for fid in truths:
        scored.setdefault(fid, [])
    return scored, truths, records, pred_path


def cmd_eval(args) -> int:
    cfg = load_config(args.config, _overrides_from_flags(args))
    scored, truths, records, pred_path = _load_eval_inputs(args)
    report = evaluate_detections(scored, truths, iou_thresh=cfg.eval.iou_thresh)

    maps_dir = Path(args.maps) if args.maps else pred_path.parent / "maps"
    pixel_report = None
    if maps_dir.is_dir():
        import numpy as np

        pred_px = []
        target_px = []
        for rec in records:
            map_path = maps_dir / f"{rec.frame_id}.png"
            if not map_path.exists():
                continue
            pred_values = load_ring_map(map_path)
            h, w = pred_values.shape
            target_values = build_target_map(rec, h, w).values
            pred_px.append(pred_values.ravel())
            target_px.append(target_values.ravel())
        if pred_px:
            pixel_report = pixel_scores(np.concatenate(pred_px), np.concatenate(target_px))

    payload = json.loads(report.to_json())
    if pixel_report is not None:
        payload["pixel"] = {
            "mae": pixel_report.mae,
            "acc": {str(t): v for t, v in pixel_report.acc.items()},
            "support_px": pixel_report.support_px,
        }
    name = args.name or Path(args.pred).parent.name or "dataset"
    rows = [REPORT_CSV_HEADER, report_csv_row(name, report.map_coco, report.mae, report.acc)]
    if pixel_report is not None:
        rows.append(report_csv_row(f"{name}-pixel", None, pixel_report.mae, pixel_report.acc))
    out = Path(args.out) if args.out else Path("eval_report.json")
    out.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    out.with_suffix(".csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    print("\n".join(rows))
    return EXIT_OK


def cmd_rank(args) -> int:
    cfg = load_config(args.config, _overrides_from_flags(args))
    scored, truths, _, _ = _load_eval_inputs(args)
    ranking = rank_by_loss(truths, scored, cfg.eval)
    lines = ["frame_id,loss"] + [f"{fid},{loss:.6g}" for fid, loss in ranking.entries]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


def cmd_track(args) -> int:
    cfg = load_config(args.config, _overrides_from_flags(args))
    preds = parse_predictions(Path(args.pred).read_text(encoding="utf-8"))
    frames = [preds[fid] for fid in sorted(preds)]
    tcfg = cfg.track if args.fps is None else TrackConfig(
        fps=args.fps, gate=cfg.track.gate, max_misses=cfg.track.max_misses
    )
    tracks = link(frames, tcfg)
    fittable = [t for t in tracks if len(t.samples) >= 6]
    if not fittable:
        raise DataError("no track has the >= 6 samples needed for a rise fit")
    out_dir = Path(args.out) if args.out else Path.cwd()
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "tracks.csv").write_text(tracks_to_csv(tracks), encoding="utf-8")
    rise_lines = ["track_id,a_max,tau,t0,rmse,converged,degenerate"]
    for t in fittable:
        fit = fit_rise(t)
        rise_lines.append(
            f"{t.track_id},{fit.a_max:.6g},{fit.tau:.6g},{fit.t0:.6g},"
            f"{fit.rmse:.6g},{int(fit.converged)},{int(fit.degenerate)}"
        )
    (out_dir / "rise_fits.csv").write_text("\n".join(rise_lines) + "\n", encoding="utf-8")
    print(f"{len(tracks)} tracks, {len(fittable)} rise fits -> {out_dir}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(
        _data_root(args),
        config=load_config(args.config, _overrides_from_flags(args)),
        static_dir=args.static,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fringekit",
        description="Fringe-pattern analysis: synthesize, detect, count, score, track, serve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat 'section.key = value' config file")
        p.add_argument("--seed", type=int, default=None, help="RNG seed override")

    p = sub.add_parser("synth", help="render a synthetic dataset (PNGs + annotations.csv)")
    common(p)
    p.add_argument("--count", type=int, required=True, help="number of frames")
    p.add_argument("--out", help="output directory (default $FRINGE_DATA_DIR/synth)")
    p.add_argument("--data-dir", help="data root (default $FRINGE_DATA_DIR or cwd)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("predict", help="detect antinodes and count rings over a frame directory")
    common(p)
    p.add_argument("images", help="directory of grayscale PNG frames")
    p.add_argument("--out", help="output directory (default: images dir)")
    p.add_argument("--score-thresh", type=float, default=None,
                   help="fixed saliency threshold instead of Otsu")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score predictions against truth (region + pixel)")
    common(p)
    p.add_argument("--pred", required=True, help="predictions CSV")
    p.add_argument("--truth", required=True, help="annotations CSV")
    p.add_argument("--maps", help="predicted ring-map directory (default: alongside pred)")
    p.add_argument("--out", help="report JSON path (CSV written next to it)")
    p.add_argument("--name", help="dataset label for the CSV row")
    p.add_argument("--iou-thresh", type=float, default=None)
    p.add_argument("--bin", type=float, default=None, help="ring-map quantization bin")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rank", help="order frames by descending loss for curation")
    common(p)
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", help="losses CSV path")
    p.add_argument("--iou-thresh", type=float, default=None)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("track", help="link predictions through time and fit rise curves")
    common(p)
    p.add_argument("--pred", required=True, help="predictions CSV (frames in filename order)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--fps", type=float, default=None)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("serve", help="run the annotation-curation HTTP service")
    common(p)
    p.add_argument("--data-dir", help="dataset directory (default $FRINGE_DATA_DIR)")
    p.add_argument("--port", type=int, default=8077)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--static", help="directory of editor UI assets to serve under /")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (DataError, AnnotationError, ConfigError, EvalError, FitError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
