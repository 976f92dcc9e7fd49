"""Grayscale PNG I/O helpers (8-bit frames, 16-bit ring maps)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


def save_png_u8(path, image: np.ndarray) -> None:
    """Write a float image in [0, 1] as an 8-bit grayscale PNG."""
    data = np.clip(np.round(np.asarray(image, dtype=float) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data, mode="L").save(Path(path), format="PNG")


def load_png_f(path) -> np.ndarray:
    """Load a grayscale PNG as floats in [0, 1]; color inputs are averaged."""
    with Image.open(Path(path)) as im:
        arr = np.asarray(im.convert("L"), dtype=float)
    return arr / 255.0


def save_png_u16(path, values: np.ndarray) -> None:
    data = np.asarray(values)
    if data.dtype != np.uint16:
        raise ValueError("expected uint16 values")
    Image.fromarray(data).save(Path(path), format="PNG")


def load_png_u16(path) -> np.ndarray:
    with Image.open(Path(path)) as im:
        return np.asarray(im, dtype=np.uint16)
