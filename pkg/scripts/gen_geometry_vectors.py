#!/usr/bin/env python3
"""Emit shared ellipse-geometry test vectors for the editor UI.

Both the Python suite and the frontend suite consume this file, pinning the
two implementations of ellipse -> bounding box to each other within 1 px.
"""

import json
import sys
from pathlib import Path

import numpy as np

from fringekit.annot import EllipseAnnotation, ellipse_to_bbox

OUT = Path(__file__).resolve().parent.parent / "frontend" / "test-vectors" / "ellipse_bbox.json"


def main() -> int:
    rng = np.random.default_rng(424242)
    cases = []
    for _ in range(50):
        b = float(rng.uniform(5, 60))
        e = EllipseAnnotation(
            cx=float(rng.uniform(50, 500)),
            cy=float(rng.uniform(50, 400)),
            a=float(b + rng.uniform(0, 40)),
            b=b,
            theta=float(rng.uniform(0, 180)),
            rings=float(rng.integers(0, 25)) / 2.0,
        )
        box = ellipse_to_bbox(e)
        cases.append({
            "ellipse": {"cx": e.cx, "cy": e.cy, "a": e.a, "b": e.b,
                        "theta": e.theta, "rings": e.rings},
            "bbox": {"x_min": box.x_min, "y_min": box.y_min,
                     "x_max": box.x_max, "y_max": box.y_max},
        })
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps({"cases": cases}, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(cases)} cases to {OUT}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
