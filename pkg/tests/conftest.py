import hypothesis
import pytest

from fringekit.annot import EllipseAnnotation
from fringekit.synth import AntinodeSpec, SynthSpec, render_frame

hypothesis.settings.register_profile("ci", max_examples=60, deadline=None)
hypothesis.settings.load_profile("ci")


@pytest.fixture
def single_antinode_frame():
    """One clean-ish speckled frame with a known antinode."""
    ellipse = EllipseAnnotation(cx=160.0, cy=120.0, a=32.0, b=26.0, theta=40.0, rings=5.0)
    spec = SynthSpec(width=320, height=240, antinodes=(AntinodeSpec(ellipse=ellipse),), seed=7)
    image, truth = render_frame(spec, frame_id="one")
    return image, ellipse, truth


def render_single(rings, a=32.0, b=26.0, theta=40.0, speckle=0.35, seed=7, blur=0.5,
                  contrast=0.9, profile="cosine", width=320, height=240):
    ellipse = EllipseAnnotation(cx=width / 2, cy=height / 2, a=a, b=b, theta=theta, rings=rings)
    spec = SynthSpec(
        width=width, height=height,
        antinodes=(AntinodeSpec(ellipse=ellipse, contrast=contrast, profile=profile),),
        speckle_strength=speckle, blur_sigma=blur, seed=seed,
    )
    image, truth = render_frame(spec, frame_id="single")
    return image, ellipse


def assert_close(actual, expected, tol, label=""):
    assert abs(actual - expected) <= tol, f"{label}: {actual} vs {expected} (tol {tol})"
