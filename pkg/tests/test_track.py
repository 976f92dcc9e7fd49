import math

import numpy as np
import pytest

from fringekit.annot import EllipseAnnotation, ellipse_to_bbox
from fringekit.detect import Detection
from fringekit.track import (
    FitError,
    Track,
    TrackConfig,
    TrackSample,
    fit_rise,
    link,
    rise_model,
    series_correlation,
    tracks_to_csv,
)


def det(cx, cy, rings=3.0, score=0.9, a=20.0, b=16.0):
    e = EllipseAnnotation(cx=cx, cy=cy, a=a, b=b, theta=0.0, rings=rings)
    return Detection(bbox=ellipse_to_bbox(e), score=score, ellipse=e)


def make_track(times, values):
    t = Track(track_id=0)
    for i, (ti, ri) in enumerate(zip(times, values)):
        t.samples.append(TrackSample(t=ti, frame=i, cx=0.0, cy=0.0, rings=ri))
    return t


# ---------------------------------------------------------------- linking

def test_single_stationary_track():
    frames = [[det(100, 80)] for _ in range(100)]
    tracks = link(frames)
    assert len(tracks) == 1
    assert len(tracks[0].samples) == 100
    times = tracks[0].times
    assert np.all(np.diff(times) > 0)
    assert times[1] - times[0] == pytest.approx(1 / 15037.0)


def test_two_separated_tracks_never_swap():
    frames = [[det(60, 60, rings=2.0), det(250, 160, rings=8.0)] for _ in range(40)]
    tracks = link(frames)
    assert len(tracks) == 2
    for tr in tracks:
        rings = {s.rings for s in tr.samples}
        assert len(rings) == 1  # samples never mix antinodes


def test_track_survives_short_dropout():
    frames = [[det(100, 80)] for _ in range(10)]
    frames[4] = []
    frames[5] = []
    tracks = link(frames, TrackConfig(max_misses=3))
    assert len(tracks) == 1
    assert len(tracks[0].samples) == 8


def test_track_closes_after_max_misses():
    frames = [[det(100, 80)] for _ in range(4)]
    frames += [[] for _ in range(4)]
    frames += [[det(100, 80)] for _ in range(4)]
    tracks = link(frames, TrackConfig(max_misses=3))
    assert len(tracks) == 2


def test_gate_blocks_distant_jump():
    frames = [[det(100, 80)], [det(200, 80)]]
    tracks = link(frames, TrackConfig(gate=20.0))
    assert len(tracks) == 2


def test_within_frame_order_irrelevant():
    a, b = det(60, 60, score=0.9), det(250, 160, score=0.4)
    t1 = link([[a, b], [a, b]])
    t2 = link([[b, a], [b, a]])
    key = lambda tracks: sorted(tuple((s.cx, s.cy) for s in t.samples) for t in tracks)
    assert key(t1) == key(t2)


def test_auto_gate_follows_last_detection_size():
    big = det(100, 80, a=40.0, b=40.0)
    moved = det(118, 80, a=40.0, b=40.0)  # within 0.5*max(a,b)=20
    tracks = link([[big], [moved]], TrackConfig(gate="auto"))
    assert len(tracks) == 1


def test_tracks_csv_format():
    frames = [[det(100, 80, rings=2.5)]]
    text = tracks_to_csv(link(frames))
    lines = text.strip().splitlines()
    assert lines[0] == "track_id,frame,t,cx,cy,rings"
    assert lines[1].startswith("0,0,0,100,80,2.5")


# ---------------------------------------------------------------- rise fits

def test_fit_recovers_noiseless_parameters():
    fps = 15037.0
    a_max, tau, t0 = 3.0, 0.002, 0.0
    n = int(0.030 * fps)
    t = np.arange(n) / fps
    r = rise_model(t, a_max, tau, t0)
    fit = fit_rise(make_track(t, r))
    assert abs(fit.tau - tau) / tau <= 0.05
    assert abs(fit.a_max - a_max) / a_max <= 0.05
    assert fit.rmse < 1e-6
    assert not fit.degenerate


def test_fit_requires_six_samples():
    t = np.arange(5) / 100.0
    with pytest.raises(FitError):
        fit_rise(make_track(t, np.ones(5)))


def test_fit_constant_series_degenerate():
    t = np.arange(30) / 1000.0
    fit = fit_rise(make_track(t, np.full(30, 5.0)))
    assert fit.degenerate
    assert fit.a_max == pytest.approx(5.0, rel=0.05)


def test_fit_decaying_series_flagged_poor():
    t = np.arange(60) / 1000.0
    r = 4.0 * np.exp(-t / 0.01)
    fit = fit_rise(make_track(t, r))
    # a rise model cannot represent a decay: large residual relative to range
    assert fit.rmse > 0.1 * (r.max() - r.min())


def test_fit_residual_not_worse_than_pure_grid():
    rng = np.random.default_rng(4)
    t = np.arange(40) / 2000.0
    r = rise_model(t, 5.0, 0.004, 0.002) + rng.normal(0, 0.05, 40)
    fit = fit_rise(make_track(t, r))
    # refinement starts from the best grid point and never accepts a worse sse
    grid_rmse = math.sqrt(np.mean((r - rise_model(t, fit.a_max, fit.tau, fit.t0)) ** 2))
    assert fit.rmse <= grid_rmse + 1e-12


# ---------------------------------------------------------------- correlation

def test_correlation_identical_tracks():
    t = np.arange(20) / 15037.0
    r = np.linspace(1, 5, 20)
    assert series_correlation(make_track(t, r), make_track(t, r)) == pytest.approx(1.0)


def test_correlation_negated():
    t = np.arange(20) / 15037.0
    r = np.linspace(1, 5, 20)
    assert series_correlation(make_track(t, r), make_track(t, -r + 9)) == pytest.approx(-1.0)


def test_correlation_requires_alignment():
    t1 = np.arange(10) / 15037.0
    t2 = t1 + 0.5  # far outside the half-frame tolerance
    with pytest.raises(FitError):
        series_correlation(make_track(t1, np.ones(10)), make_track(t2, np.ones(10)))


def test_crop_and_map_pipelines_agree_on_clean_video():
    # the same frames counted two ways: detector crops vs quantized ring maps
    from fringekit.annot import EllipseAnnotation
    from fringekit.segmap import analyze_frame, map_to_counts, quantize_map
    from fringekit.synth import AntinodeSpec, SynthSpec, render_frame

    crop_frames = []
    map_frames = []
    rings_series = [1.5 + 0.5 * i for i in range(12)]
    for i, rings in enumerate(rings_series):
        e = EllipseAnnotation(cx=160.0, cy=120.0, a=34.0, b=28.0, theta=25.0, rings=rings)
        spec = SynthSpec(width=320, height=240, antinodes=(AntinodeSpec(ellipse=e),),
                         speckle_strength=0.0, seed=100 + i)
        image, _ = render_frame(spec)
        detections, ring_map = analyze_frame(image)
        assert len(detections) == 1
        crop_frames.append(detections)
        regions = map_to_counts(quantize_map(ring_map, 0.7).values)
        assert len(regions) == 1
        box, value = regions[0]
        me = EllipseAnnotation(cx=box.center[0], cy=box.center[1],
                               a=box.width / 2, b=min(box.height / 2, box.width / 2),
                               theta=0.0, rings=value)
        map_frames.append([Detection(bbox=box, score=1.0, ellipse=me)])
    crop_track = link(crop_frames)[0]
    map_track = link(map_frames)[0]
    assert len(crop_track.samples) == len(rings_series)
    assert series_correlation(crop_track, map_track) >= 0.99
