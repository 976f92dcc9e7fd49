#!/usr/bin/env python3
"""Headless curation-loop demo: corrupt, triage, fix through the API, verify.

Builds a small synthetic dataset with predictions, corrupts one annotation,
shows that loss ranking sends it to the top of the queue, restores it through
the HTTP API, triggers a recompute, and verifies the loss returns to its
pristine baseline.
"""

import sys
import tempfile
import time
from pathlib import Path

from fastapi.testclient import TestClient

from fringekit.annot import EllipseAnnotation, parse_annotations, write_annotations
from fringekit.cli import main as cli_main
from fringekit.metrics import rank_by_loss
from fringekit.predictions import detections_to_scored, parse_predictions, record_to_truths
from fringekit.server import create_app


def main() -> int:
    with tempfile.TemporaryDirectory() as tmp:
        data = Path(tmp) / "data"
        print("== render + predict ==")
        cli_main(["synth", "--count", "6", "--seed", "31", "--out", str(data)])
        cli_main(["predict", str(data), "--out", str(data)])

        records = parse_annotations((data / "annotations.csv").read_text())
        preds = parse_predictions((data / "predictions.csv").read_text())
        truths = {r.frame_id: record_to_truths(r) for r in records}
        scored = {fid: detections_to_scored(d) for fid, d in preds.items()}
        for fid in truths:
            scored.setdefault(fid, [])
        baseline = dict(rank_by_loss(truths, scored).entries)

        victim = next(r for r in records if r.annotations)
        original = victim.annotations[0]
        victim.annotations[0] = EllipseAnnotation(
            cx=original.cx + 30, cy=original.cy, a=original.a * 0.6,
            b=original.b * 0.55, theta=original.theta,
            rings=min(original.rings + 4, 12),
        )
        (data / "annotations.csv").write_text(write_annotations(records))
        print(f"corrupted annotation in {victim.frame_id} "
              f"(baseline loss {baseline[victim.frame_id]:.4f})")

        app = create_app(data)
        with TestClient(app) as client:
            queue = client.get("/api/queue?order=loss_desc").json()
            print(f"top of queue: {queue[0]['frame_id']} (loss {queue[0]['loss']:.3f})")
            assert queue[0]["frame_id"] == victim.frame_id

            resp = client.get(f"/api/frames/{victim.frame_id}/annotations")
            body = resp.json()
            body["annotations"][0] = {
                "cx": original.cx, "cy": original.cy, "a": original.a,
                "b": original.b, "theta": original.theta, "rings": original.rings,
            }
            put = client.put(
                f"/api/frames/{victim.frame_id}/annotations",
                json=body, headers={"If-Match": resp.headers["ETag"]},
            )
            print(f"restored via PUT -> revision {put.json()['revision']}")

            job_id = client.post("/api/recompute").json()["job_id"]
            while True:
                status = client.get(f"/api/jobs/{job_id}").json()
                if status["status"] in ("done", "failed"):
                    break
                time.sleep(0.05)
            print(f"recompute {status['status']}")

            after = {e["frame_id"]: e["loss"] for e in client.get("/api/queue").json()}
        restored = after[victim.frame_id]
        print(f"loss after restore: {restored:.6f} "
              f"(pristine baseline {baseline[victim.frame_id]:.6f})")
        assert abs(restored - baseline[victim.frame_id]) < 1e-9
        print("curation loop verified")
    return 0


if __name__ == "__main__":
    sys.exit(main())
