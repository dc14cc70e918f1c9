"""Deterministic synthetic image fixtures shared across the test suite."""

from __future__ import annotations

import io

import numpy as np
from PIL import Image, ImageDraw


def png_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(arr.astype(np.uint8), "RGB").save(buf, format="PNG")
    return buf.getvalue()


def jpeg_bytes(arr: np.ndarray, quality: int = 90) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(arr.astype(np.uint8), "RGB").save(buf, format="JPEG", quality=quality)
    return buf.getvalue()


def solid(rgb: tuple[int, int, int], size: tuple[int, int] = (32, 32)) -> bytes:
    w, h = size
    arr = np.zeros((h, w, 3), dtype=np.uint8)
    arr[:, :] = rgb
    return png_bytes(arr)


def vertical_split(
    left: tuple[int, int, int],
    right: tuple[int, int, int],
    size: tuple[int, int] = (32, 32),
) -> bytes:
    w, h = size
    arr = np.zeros((h, w, 3), dtype=np.uint8)
    arr[:, : w // 2] = left
    arr[:, w // 2 :] = right
    return png_bytes(arr)


def noisy_solid(
    rng: np.random.Generator,
    rgb: tuple[int, int, int],
    size: tuple[int, int] = (48, 48),
    noise: int = 12,
) -> bytes:
    w, h = size
    base = np.zeros((h, w, 3), dtype=np.int64)
    base[:, :] = rgb
    jitter = rng.integers(-noise, noise + 1, size=(h, w, 3))
    return png_bytes(np.clip(base + jitter, 0, 255))


def shape_image(
    kind: str,
    fg: tuple[int, int, int],
    bg: tuple[int, int, int] = (24, 24, 24),
    size: int = 48,
    rng: np.random.Generator | None = None,
    noise: int = 10,
) -> bytes:
    """A filled circle, square, or triangle with optional noise and jitter."""
    img = Image.new("RGB", (size, size), bg)
    draw = ImageDraw.Draw(img)
    margin = size // 5
    if rng is not None:
        margin += int(rng.integers(-2, 3))
    lo, hi = margin, size - margin
    if kind == "circle":
        draw.ellipse([lo, lo, hi, hi], fill=fg)
    elif kind == "square":
        draw.rectangle([lo, lo, hi, hi], fill=fg)
    elif kind == "triangle":
        draw.polygon([(size // 2, lo), (lo, hi), (hi, hi)], fill=fg)
    else:
        raise ValueError(f"unknown shape {kind!r}")
    arr = np.asarray(img, dtype=np.int64)
    if rng is not None and noise:
        arr = arr + rng.integers(-noise, noise + 1, size=arr.shape)
    return png_bytes(np.clip(arr, 0, 255))


def blend_images(data_a: bytes, data_b: bytes, t: float) -> bytes:
    """Pixel-space linear interpolation between two same-size images."""
    a = np.asarray(Image.open(io.BytesIO(data_a)).convert("RGB"), dtype=np.float64)
    b = np.asarray(Image.open(io.BytesIO(data_b)).convert("RGB"), dtype=np.float64)
    mixed = np.rint((1.0 - t) * a + t * b)
    return png_bytes(np.clip(mixed, 0, 255))


def transpose_image(data: bytes) -> bytes:
    arr = np.asarray(Image.open(io.BytesIO(data)).convert("RGB"), dtype=np.uint8)
    return png_bytes(arr.transpose(1, 0, 2))


def random_image(rng: np.random.Generator, size: tuple[int, int] | None = None) -> bytes:
    if size is None:
        size = (int(rng.integers(1, 80)), int(rng.integers(1, 80)))
    w, h = size
    return png_bytes(rng.integers(0, 256, size=(h, w, 3)).astype(np.uint8))
