"""HTTP+JSON curation service: frames, annotations, predictions, loss queue.

The store holds one dataset directory (PNG frames + annotations.csv, plus
optional predictions.csv and maps/). Edits go through optimistic concurrency:
every successful write bumps a monotone revision, and writers must present it
via ``If-Match``. Recomputing predictions and losses is an explicit
background job so cheap edits never block on the full pipeline.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
import uuid
from pathlib import Path

from fastapi import Body, FastAPI, Header, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from .annot import (
    AnnotationError,
    EllipseAnnotation,
    FrameRecord,
    frame_record_to_json,
    parse_annotations,
    write_annotations,
)
from .config import RunConfig
from .imgio import load_png_f
from .metrics import rank_by_loss
from .predictions import (
    detections_to_scored,
    parse_predictions,
    record_to_truths,
    write_predictions,
)
from .segmap import analyze_frame, save_ring_map


class SessionStore:
    """In-memory view of a dataset directory with atomic CSV persistence."""

    def __init__(self, data_dir, config: RunConfig | None = None):
        self.data_dir = Path(data_dir)
        self.config = config or RunConfig()
        self.lock = threading.RLock()
        self.loaded = False
        self.revision = 0
        self.annotations: dict[str, FrameRecord] = {}
        self.predictions: dict[str, list] = {}
        self.losses: dict[str, float] = {}
        self.job: dict | None = None

    # -- loading ---------------------------------------------------------
    def load(self) -> None:
        with self.lock:
            ann_path = self.data_dir / "annotations.csv"
            if ann_path.exists():
                records = parse_annotations(ann_path.read_text(encoding="utf-8"))
            else:
                records = []
            self.annotations = {rec.frame_id: rec for rec in records}
            for png in sorted(self.data_dir.glob("*.png")):
                self.annotations.setdefault(png.stem, FrameRecord(frame_id=png.stem))
            pred_path = self.data_dir / "predictions.csv"
            self.predictions = (
                parse_predictions(pred_path.read_text(encoding="utf-8"))
                if pred_path.exists()
                else {}
            )
            self._recompute_losses()
            self.loaded = True

    def frame_ids(self) -> list[str]:
        return sorted(self.annotations)

    def image_path(self, frame_id: str) -> Path:
        return self.data_dir / f"{frame_id}.png"

    def map_path(self, frame_id: str) -> Path:
        return self.data_dir / "maps" / f"{frame_id}.png"

    def _recompute_losses(self) -> None:
        truths = {fid: record_to_truths(rec) for fid, rec in self.annotations.items()}
        preds = {fid: detections_to_scored(d) for fid, d in self.predictions.items()}
        for fid in truths:
            preds.setdefault(fid, [])
        ranking = rank_by_loss(truths, preds, self.config.eval)
        self.losses = dict(ranking.entries)

    # -- writes ----------------------------------------------------------
    def _write_csv_atomic(self) -> None:
        records = [self.annotations[fid] for fid in sorted(self.annotations)]
        records = [rec for rec in records if rec.annotations]
        text = write_annotations(records)
        fd, tmp = tempfile.mkstemp(dir=self.data_dir, suffix=".csv.tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, self.data_dir / "annotations.csv")
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)

    def put_annotations(self, frame_id: str, record: FrameRecord) -> int:
        with self.lock:
            self.annotations[frame_id] = record
            self._write_csv_atomic()
            self.revision += 1
            return self.revision

    # -- recompute job ---------------------------------------------------
    def start_recompute(self) -> str:
        with self.lock:
            if self.job is not None and self.job["status"] in ("queued", "running"):
                raise RuntimeError("a recompute job is already active")
            job_id = uuid.uuid4().hex[:12]
            self.job = {"id": job_id, "status": "queued", "progress": 0.0}
        worker = threading.Thread(target=self._run_recompute, args=(job_id,), daemon=True)
        worker.start()
        return job_id

    def _run_recompute(self, job_id: str) -> None:
        try:
            with self.lock:
                self.job["status"] = "running"
                frame_ids = self.frame_ids()
            maps_dir = self.data_dir / "maps"
            maps_dir.mkdir(exist_ok=True)
            new_preds = {}
            for i, fid in enumerate(frame_ids):
                img_path = self.image_path(fid)
                if img_path.exists():
                    image = load_png_f(img_path)
                    detections, ring_map = analyze_frame(
                        image, self.config.detector, self.config.rings
                    )
                    new_preds[fid] = detections
                    save_ring_map(maps_dir / f"{fid}.png", ring_map.values, bin=self.config.bin)
                with self.lock:
                    self.job["progress"] = (i + 1) / max(len(frame_ids), 1)
            with self.lock:
                text = write_predictions(new_preds)
                (self.data_dir / "predictions.csv").write_text(text, encoding="utf-8")
                # the persisted CSV is canonical: re-parse so losses match what
                # a fresh load of the same directory would compute
                self.predictions = parse_predictions(text)
                self._recompute_losses()
                self.revision += 1
                self.job["status"] = "done"
                self.job["progress"] = 1.0
        except Exception as exc:  # surfaced via job status
            with self.lock:
                self.job["status"] = "failed"
                self.job["error"] = str(exc)


def _validate_record_body(frame_id: str, body: dict) -> FrameRecord:
    errors = []
    anns = body.get("annotations")
    if not isinstance(anns, list):
        raise HTTPException(422, detail=[{"field": "annotations", "message": "must be a list"}])
    parsed = []
    for i, item in enumerate(anns):
        prefix = f"annotations[{i}]"
        if not isinstance(item, dict):
            errors.append({"field": prefix, "message": "must be an object"})
            continue
        vals = {}
        for name in ("cx", "cy", "a", "b", "theta", "rings"):
            v = item.get(name)
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                errors.append({"field": f"{prefix}.{name}", "message": "must be a number"})
            else:
                vals[name] = float(v)
        if len(vals) < 6:
            continue
        if vals["b"] <= 0:
            errors.append({"field": f"{prefix}.b", "message": "must be positive"})
        elif vals["a"] < vals["b"]:
            errors.append({"field": f"{prefix}.a", "message": "a must be >= b"})
        if vals.get("rings", 0) < 0:
            errors.append({"field": f"{prefix}.rings", "message": "must be >= 0"})
        if errors:
            continue
        try:
            parsed.append(EllipseAnnotation(**vals))
        except AnnotationError as exc:
            errors.append({"field": prefix, "message": str(exc)})
    if errors:
        raise HTTPException(422, detail=errors)
    return FrameRecord(frame_id=frame_id, annotations=parsed)


def create_app(
    data_dir,
    config: RunConfig | None = None,
    static_dir=None,
    eager: bool = True,
) -> FastAPI:
    store = SessionStore(data_dir, config)
    app = FastAPI(title="fringekit curation service")
    app.state.store = store
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
        expose_headers=["ETag"],
    )

    def require_loaded() -> SessionStore:
        if not store.loaded:
            raise HTTPException(503, detail="store not loaded yet")
        return store

    @app.get("/api/queue")
    def queue(order: str = "loss_desc"):
        s = require_loaded()
        if order != "loss_desc":
            raise HTTPException(400, detail=f"unsupported order {order!r}")
        with s.lock:
            entries = sorted(s.losses.items(), key=lambda kv: (-kv[1], kv[0]))
            return [{"frame_id": fid, "loss": loss} for fid, loss in entries]

    def _check_frame(s: SessionStore, frame_id: str) -> None:
        if frame_id not in s.annotations:
            raise HTTPException(404, detail=f"unknown frame {frame_id!r}")

    @app.get("/api/frames/{frame_id}/image")
    def frame_image(frame_id: str):
        s = require_loaded()
        _check_frame(s, frame_id)
        path = s.image_path(frame_id)
        if not path.exists():
            raise HTTPException(404, detail=f"no image for frame {frame_id!r}")
        return Response(content=path.read_bytes(), media_type="image/png")

    @app.get("/api/frames/{frame_id}/annotations")
    def frame_annotations(frame_id: str):
        s = require_loaded()
        _check_frame(s, frame_id)
        with s.lock:
            payload = frame_record_to_json(s.annotations[frame_id])
            return JSONResponse(payload, headers={"ETag": str(s.revision)})

    @app.put("/api/frames/{frame_id}/annotations")
    def put_frame_annotations(
        frame_id: str,
        body: dict = Body(...),
        if_match: str | None = Header(default=None),
    ):
        s = require_loaded()
        _check_frame(s, frame_id)
        with s.lock:
            if if_match is not None and if_match.strip() != str(s.revision):
                raise HTTPException(
                    409, detail=f"stale revision {if_match.strip()}, current is {s.revision}"
                )
            record = _validate_record_body(frame_id, body)
            revision = s.put_annotations(frame_id, record)
            return {"revision": revision}

    @app.get("/api/frames/{frame_id}/predictions")
    def frame_predictions(frame_id: str):
        s = require_loaded()
        _check_frame(s, frame_id)
        with s.lock:
            dets = s.predictions.get(frame_id, [])
            payload = {
                "detections": [
                    {
                        "bbox": {
                            "x_min": d.bbox.x_min,
                            "y_min": d.bbox.y_min,
                            "x_max": d.bbox.x_max,
                            "y_max": d.bbox.y_max,
                        },
                        "score": d.score,
                        "rings": d.ellipse.rings,
                        "ellipse": {
                            "cx": d.ellipse.cx, "cy": d.ellipse.cy,
                            "a": d.ellipse.a, "b": d.ellipse.b,
                            "theta": d.ellipse.theta, "rings": d.ellipse.rings,
                        },
                    }
                    for d in dets
                ],
            }
            if s.map_path(frame_id).exists():
                payload["map_url"] = f"/api/frames/{frame_id}/map"
            return payload

    @app.get("/api/frames/{frame_id}/map")
    def frame_map(frame_id: str):
        s = require_loaded()
        _check_frame(s, frame_id)
        path = s.map_path(frame_id)
        if not path.exists():
            raise HTTPException(404, detail=f"no ring map for frame {frame_id!r}")
        return Response(content=path.read_bytes(), media_type="image/png")

    @app.get("/api/frames/{frame_id}/map.json")
    def frame_map_sidecar(frame_id: str):
        s = require_loaded()
        _check_frame(s, frame_id)
        sidecar = s.map_path(frame_id).with_suffix(".json")
        if not sidecar.exists():
            raise HTTPException(404, detail=f"no ring map for frame {frame_id!r}")
        return json.loads(sidecar.read_text(encoding="utf-8"))

    @app.post("/api/recompute")
    def recompute():
        s = require_loaded()
        try:
            job_id = s.start_recompute()
        except RuntimeError as exc:
            raise HTTPException(409, detail=str(exc)) from None
        return {"job_id": job_id}

    @app.get("/api/jobs/{job_id}")
    def job_status(job_id: str):
        s = require_loaded()
        with s.lock:
            if s.job is None or s.job["id"] != job_id:
                raise HTTPException(404, detail=f"unknown job {job_id!r}")
            payload = {"status": s.job["status"], "progress": s.job["progress"]}
            if "error" in s.job:
                payload["error"] = s.job["error"]
            return payload

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="static")

    if eager:
        store.load()
    return app
