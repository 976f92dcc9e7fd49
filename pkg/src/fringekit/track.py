"""Linking detections through time and fitting saturating-exponential rises.

Antinodes on a struck surface barely move between frames at these frame
rates, so greedy gated nearest-centroid association is enough; no global
assignment. Ring-count-vs-time curves are fit with the minimal 3-parameter
monotone rise r(t) = a_max * (1 - exp(-(t - t0)/tau)) for t >= t0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .detect import Detection


@dataclass(frozen=True)
class TrackConfig:
    fps: float = 15037.0
    gate: float | str = "auto"  # pixels, or "auto" = 0.5 * max(a, b) of the last hit
    max_misses: int = 3

    def __post_init__(self):
        if self.fps <= 0:
            raise ValueError("fps must be positive")


@dataclass
class TrackSample:
    t: float
    frame: int
    cx: float
    cy: float
    rings: float


@dataclass
class Track:
    track_id: int
    samples: list[TrackSample] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def ring_values(self) -> np.ndarray:
        return np.array([s.rings for s in self.samples])


@dataclass
class RiseFit:
    a_max: float
    tau: float
    t0: float
    rmse: float
    converged: bool = True
    degenerate: bool = False


class FitError(ValueError):
    """Not enough data to fit."""


def link(frames: list[list[Detection]], cfg: TrackConfig = TrackConfig()) -> list[Track]:
    """Greedy nearest-centroid linking of per-frame detections into tracks.

    Detections are processed in descending score (ties by centroid) so the
    result does not depend on within-frame input order. Tracks close after
    ``max_misses`` consecutive unmatched frames.
    """
    next_id = 0
    active: list[dict] = []  # {track, last: Detection, misses}
    done: list[Track] = []
    for frame_idx, detections in enumerate(frames):
        t = frame_idx / cfg.fps
        order = sorted(
            detections, key=lambda d: (-d.score, d.ellipse.cx, d.ellipse.cy)
        )
        taken: set[int] = set()
        for det in order:
            best = None
            best_dist = math.inf
            for slot_idx, slot in enumerate(active):
                if slot_idx in taken:
                    continue
                last = slot["last"]
                gate = (
                    0.5 * max(last.ellipse.a, last.ellipse.b)
                    if cfg.gate == "auto"
                    else float(cfg.gate)
                )
                dist = math.hypot(
                    det.ellipse.cx - last.ellipse.cx, det.ellipse.cy - last.ellipse.cy
                )
                if dist <= gate and dist < best_dist:
                    best = slot_idx
                    best_dist = dist
            sample = TrackSample(t=t, frame=frame_idx, cx=det.ellipse.cx,
                                 cy=det.ellipse.cy, rings=det.ellipse.rings)
            if best is not None:
                taken.add(best)
                slot = active[best]
                slot["last"] = det
                slot["misses"] = 0
                slot["track"].samples.append(sample)
            else:
                track = Track(track_id=next_id)
                next_id += 1
                track.samples.append(sample)
                taken.add(len(active))
                active.append({"track": track, "last": det, "misses": 0})
        still_active = []
        for slot_idx, slot in enumerate(active):
            if slot_idx not in taken and slot["track"].samples[-1].frame != frame_idx:
                slot["misses"] += 1
            if slot["misses"] >= cfg.max_misses:
                done.append(slot["track"])
            else:
                still_active.append(slot)
        active = still_active
    done.extend(slot["track"] for slot in active)
    done.sort(key=lambda tr: tr.track_id)
    return done


def rise_model(t: np.ndarray, a_max: float, tau: float, t0: float) -> np.ndarray:
    out = np.zeros_like(t, dtype=float)
    after = t >= t0
    out[after] = a_max * (1.0 - np.exp(-(t[after] - t0) / tau))
    return out


def fit_rise(track: Track) -> RiseFit:
    """Fit the rise curve by coarse grid search then Gauss-Newton refinement.

    Requires at least 6 samples. The residual norm never increases across
    refinement steps (step halving); if refinement cannot improve on the grid
    optimum the grid point is returned with ``converged=False``.
    """
    if len(track.samples) < 6:
        raise FitError(f"need >= 6 samples, got {len(track.samples)}")
    t = track.times
    r = track.ring_values
    span = float(t[-1] - t[0])
    if span <= 0:
        raise FitError("degenerate time support")

    ptp = float(r.max() - r.min())
    flat = ptp < 1e-9 or ptp < 1e-3 * max(1.0, abs(float(r.mean())))

    t0_grid = np.linspace(t[0] - 0.25 * span, t[0] + 0.5 * span, 25)
    tau_grid = np.geomspace(span / 200.0, 2.0 * span, 30)
    # full grid in one shot: shapes is (t0, tau, n); t < t0 gives exactly 0
    dt = np.maximum(t[None, None, :] - t0_grid[:, None, None], 0.0)
    shapes = 1.0 - np.exp(-dt / tau_grid[None, :, None])
    denom = np.sum(shapes * shapes, axis=2)
    numer = shapes @ r
    amps = np.divide(numer, denom, out=np.zeros_like(denom), where=denom > 0)
    sse_grid = np.sum(r * r) - np.where(denom > 0, amps * numer, 0.0)
    i0, k0 = np.unravel_index(int(np.argmin(sse_grid)), sse_grid.shape)
    a_max = float(amps[i0, k0])
    tau = float(tau_grid[k0])
    t0 = float(t0_grid[i0])
    sse = float(np.sum((r - rise_model(t, a_max, tau, t0)) ** 2))

    theta = np.array([a_max, tau, t0])
    converged = False
    for _ in range(60):
        a_max, tau, t0 = theta
        model = rise_model(t, a_max, tau, t0)
        resid = r - model
        sse = float(resid @ resid)
        after = t >= t0
        s = np.zeros_like(t)
        s[after] = (t[after] - t0) / tau
        e = np.exp(-s) * after
        jac = np.column_stack([
            (1.0 - np.exp(-s)) * after,       # d/da_max
            -a_max * s / tau * e,             # d/dtau
            -a_max / tau * e,                 # d/dt0
        ])
        g = jac.T @ resid
        h = jac.T @ jac + 1e-12 * np.eye(3)
        try:
            step = np.linalg.solve(h, g)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        improved = False
        scale = 1.0
        for _ in range(25):
            cand = theta + scale * step
            if cand[1] > 0:
                cand_sse = float(np.sum((r - rise_model(t, *cand)) ** 2))
                if cand_sse <= sse:
                    if sse - cand_sse < 1e-14 * max(sse, 1e-30):
                        converged = True
                    theta = cand
                    sse = cand_sse
                    improved = True
                    break
            scale *= 0.5
        if not improved:
            converged = True
            break
        if converged:
            break

    a_max, tau, t0 = theta
    rmse = math.sqrt(sse / len(r))
    degenerate = flat or tau <= 1.05 * float(tau_grid[0]) or a_max <= 0
    return RiseFit(
        a_max=float(a_max), tau=float(tau), t0=float(t0), rmse=rmse,
        converged=converged, degenerate=degenerate,
    )


def series_correlation(a: Track, b: Track, fps: float = 15037.0) -> float:
    """Pearson correlation of ring counts after nearest-sample time alignment."""
    tol = 0.5 / fps
    tb = b.times
    rb = b.ring_values
    xs = []
    ys = []
    for s in a.samples:
        j = int(np.argmin(np.abs(tb - s.t)))
        if abs(tb[j] - s.t) <= tol:
            xs.append(s.rings)
            ys.append(rb[j])
    if len(xs) < 3:
        raise FitError(f"need >= 3 aligned samples, got {len(xs)}")
    x = np.asarray(xs)
    y = np.asarray(ys)
    sx = x.std()
    sy = y.std()
    if sx == 0 or sy == 0:
        raise FitError("correlation undefined for a constant series")
    return float(np.corrcoef(x, y)[0, 1])


TRACKS_CSV_HEADER = "track_id,frame,t,cx,cy,rings"


def tracks_to_csv(tracks: list[Track]) -> str:
    lines = [TRACKS_CSV_HEADER]
    for tr in tracks:
        for s in tr.samples:
            lines.append(
                f"{tr.track_id},{s.frame},{s.t:.9g},{s.cx:.6g},{s.cy:.6g},{s.rings:.6g}"
            )
    return "\n".join(lines) + "\n"
