/**
 * Ellipse geometry for the editor canvas.
 *
 * The bounding-box derivation mirrors the service's geometry exactly; the
 * shared test-vector file pins both sides to each other.
 */

import type { BBox, EllipseAnnotation } from "./types.js";

export const RING_STEP = 0.5;
export const RING_MAX = 12;

export function normalizeTheta(theta: number): number {
  const t = ((theta % 180) + 180) % 180;
  return t >= 180 ? 0 : t;
}

export function ellipseToBBox(e: EllipseAnnotation): BBox {
  const t = (e.theta * Math.PI) / 180;
  const halfW = Math.hypot(e.a * Math.cos(t), e.b * Math.sin(t));
  const halfH = Math.hypot(e.a * Math.sin(t), e.b * Math.cos(t));
  return {
    x_min: e.cx - halfW,
    y_min: e.cy - halfH,
    x_max: e.cx + halfW,
    y_max: e.cy + halfH,
  };
}

export function ellipseBoundaryPoints(e: EllipseAnnotation, n = 90): Array<[number, number]> {
  const t = (e.theta * Math.PI) / 180;
  const cosT = Math.cos(t);
  const sinT = Math.sin(t);
  const points: Array<[number, number]> = [];
  for (let k = 0; k < n; k++) {
    const phi = (2 * Math.PI * k) / n;
    const u = e.a * Math.cos(phi);
    const v = e.b * Math.sin(phi);
    points.push([e.cx + u * cosT - v * sinT, e.cy + u * sinT + v * cosT]);
  }
  return points;
}

export function pointInEllipse(e: EllipseAnnotation, x: number, y: number): boolean {
  const t = (e.theta * Math.PI) / 180;
  const dx = x - e.cx;
  const dy = y - e.cy;
  const u = (dx * Math.cos(t) + dy * Math.sin(t)) / e.a;
  const v = (-dx * Math.sin(t) + dy * Math.cos(t)) / e.b;
  return u * u + v * v < 1;
}

export type HandleKind = "center" | "major" | "minor";

export interface Handle {
  kind: HandleKind;
  x: number;
  y: number;
}

/** Drag handles: center, tip of the semi-major axis, tip of the semi-minor axis. */
export function handlePositions(e: EllipseAnnotation): Handle[] {
  const t = (e.theta * Math.PI) / 180;
  return [
    { kind: "center", x: e.cx, y: e.cy },
    { kind: "major", x: e.cx + e.a * Math.cos(t), y: e.cy + e.a * Math.sin(t) },
    { kind: "minor", x: e.cx - e.b * Math.sin(t), y: e.cy + e.b * Math.cos(t) },
  ];
}

export function hitTestHandle(
  e: EllipseAnnotation,
  x: number,
  y: number,
  tolerance = 8,
): HandleKind | null {
  let best: HandleKind | null = null;
  let bestDist = tolerance;
  for (const h of handlePositions(e)) {
    const d = Math.hypot(h.x - x, h.y - y);
    if (d <= bestDist) {
      best = h.kind;
      bestDist = d;
    }
  }
  return best;
}

const MIN_AXIS = 1.0;

/**
 * Apply a handle drag, keeping the ellipse valid: axes stay positive, the
 * semi-major axis never falls below the semi-minor (it clamps), and theta
 * stays normalized. Returns a new annotation.
 */
export function applyHandleDrag(
  e: EllipseAnnotation,
  handle: HandleKind,
  x: number,
  y: number,
): EllipseAnnotation {
  if (handle === "center") {
    return { ...e, cx: x, cy: y };
  }
  const dx = x - e.cx;
  const dy = y - e.cy;
  const dist = Math.hypot(dx, dy);
  if (handle === "major") {
    const a = Math.max(dist, e.b, MIN_AXIS);
    const theta = dist > 1e-9 ? normalizeTheta((Math.atan2(dy, dx) * 180) / Math.PI) : e.theta;
    return { ...e, a, theta };
  }
  // minor handle: radial distance sets b, capped by a
  const b = Math.min(Math.max(dist, MIN_AXIS), e.a);
  return { ...e, b };
}

/** Ring stepper: half-ring increments clamped to [0, RING_MAX]. */
export function stepRings(e: EllipseAnnotation, steps: number): EllipseAnnotation {
  const rings = clampRings(e.rings + steps * RING_STEP);
  return { ...e, rings };
}

export function clampRings(value: number): number {
  if (!Number.isFinite(value)) return 0;
  return Math.min(RING_MAX, Math.max(0, Math.round(value / RING_STEP) * RING_STEP));
}

export function sameGeometry(a: EllipseAnnotation, b: EllipseAnnotation, tol = 1e-9): boolean {
  return (
    Math.abs(a.cx - b.cx) <= tol &&
    Math.abs(a.cy - b.cy) <= tol &&
    Math.abs(a.a - b.a) <= tol &&
    Math.abs(a.b - b.b) <= tol &&
    Math.abs(a.theta - b.theta) <= tol &&
    Math.abs(a.rings - b.rings) <= tol
  );
}
