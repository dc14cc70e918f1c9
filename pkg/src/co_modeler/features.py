"""Deterministic image -> 264-dim feature vector.

Layout: values[0:192] 8x8 RGB thumbnail (mean-pooled, scaled to [0,1]),
values[192:256] 4x4x4 joint RGB histogram (L1-normalized), values[256:264]
8-bin gradient-orientation histogram on luminance (magnitude-weighted,
L1-normalized, all-zero for gradient-free images).

Pipeline, fixed: decode to RGB, bilinear resize to 32x32 with half-pixel
center alignment, then the three blocks above. All accumulation orders are
fixed so identical bytes produce bit-identical vectors; the bilinear gather
is grouped so that transposing the input transposes the resized pixels
bit-exactly (two-operand float adds and multiplies commute).

Changing any dimension or bin count here is a format break and must bump
the model schema version.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image

from .errors import ImageDecodeError

FEATURE_DIM = 264
RESIZE_SIZE = 32
THUMB_CELLS = 8
COLOR_BINS_PER_CHANNEL = 4
GRAD_BINS = 8

THUMB_SLICE = slice(0, 192)
COLOR_SLICE = slice(192, 256)
GRAD_SLICE = slice(256, 264)

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
GRAD_TOTAL_EPS = 1e-12


def decode_rgb(data: bytes) -> np.ndarray:
    """Decode PNG or JPEG bytes to an HxWx3 uint8 array."""
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as exc:
        raise ImageDecodeError(f"cannot decode image bytes: {exc}") from exc
    if img.width < 1 or img.height < 1:
        raise ImageDecodeError("image has a zero dimension")
    return np.asarray(img.convert("RGB"), dtype=np.uint8)


def _axis_coords(src_size: int, out_size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Half-pixel centers: src = (dst + 0.5) * scale - 0.5, clamped to the image.
    scale = src_size / out_size
    pos = (np.arange(out_size, dtype=np.float64) + 0.5) * scale - 0.5
    pos = np.clip(pos, 0.0, float(src_size - 1))
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, src_size - 1)
    return lo, hi, pos - lo


def resize_bilinear(rgb: np.ndarray, out_h: int = RESIZE_SIZE, out_w: int = RESIZE_SIZE) -> np.ndarray:
    """Bilinear resize to float64 (out_h, out_w, 3), values in [0, 255]."""
    src = rgb.astype(np.float64)
    h, w = src.shape[0], src.shape[1]
    y0, y1, fy = _axis_coords(h, out_h)
    x0, x1, fx = _axis_coords(w, out_w)

    a = src[y0[:, None], x0[None, :], :]
    b = src[y0[:, None], x1[None, :], :]
    c = src[y1[:, None], x0[None, :], :]
    d = src[y1[:, None], x1[None, :], :]

    fy3 = fy[:, None, None]
    fx3 = fx[None, :, None]
    wa = (1.0 - fy3) * (1.0 - fx3)
    wb = (1.0 - fy3) * fx3
    wc = fy3 * (1.0 - fx3)
    wd = fy3 * fx3
    # Diagonal-pair grouping keeps the sum invariant under input transpose.
    return (wa * a + wd * d) + (wb * b + wc * c)


def _thumbnail_block(resized: np.ndarray) -> np.ndarray:
    pool = RESIZE_SIZE // THUMB_CELLS
    cells = resized.reshape(THUMB_CELLS, pool, THUMB_CELLS, pool, 3).mean(axis=(1, 3))
    return cells.reshape(-1) / 255.0  # row-major cells, channels interleaved


def _color_hist_block(resized: np.ndarray) -> np.ndarray:
    bins = np.minimum((resized // 64.0).astype(np.int64), COLOR_BINS_PER_CHANNEL - 1)
    idx = bins[..., 0] * 16 + bins[..., 1] * 4 + bins[..., 2]
    counts = np.bincount(idx.reshape(-1), minlength=64).astype(np.float64)
    return counts / float(resized.shape[0] * resized.shape[1])


def _grad_hist_block(resized: np.ndarray) -> np.ndarray:
    luma = (
        resized[..., 0] * LUMA_WEIGHTS[0]
        + resized[..., 1] * LUMA_WEIGHTS[1]
        + resized[..., 2] * LUMA_WEIGHTS[2]
    )
    # Central differences on interior pixels only.
    gx = (luma[1:-1, 2:] - luma[1:-1, :-2]) * 0.5
    gy = (luma[2:, 1:-1] - luma[:-2, 1:-1]) * 0.5
    mag = np.hypot(gx, gy)
    theta = np.arctan2(gy, gx)
    theta = np.where(theta < 0.0, theta + np.pi, theta)
    theta = np.where(theta >= np.pi, theta - np.pi, theta)
    which = np.minimum((theta / (np.pi / GRAD_BINS)).astype(np.int64), GRAD_BINS - 1)
    hist = np.bincount(which.reshape(-1), weights=mag.reshape(-1), minlength=GRAD_BINS)
    total = hist.sum()
    if total < GRAD_TOTAL_EPS:
        return np.zeros(GRAD_BINS, dtype=np.float64)
    return hist / total


def features_from_rgb(rgb: np.ndarray) -> np.ndarray:
    resized = resize_bilinear(rgb)
    return np.concatenate(
        [_thumbnail_block(resized), _color_hist_block(resized), _grad_hist_block(resized)]
    )


def extract_features(data: bytes) -> np.ndarray:
    """Extract the 264-dim feature vector; bit-identical for identical bytes."""
    return features_from_rgb(decode_rgb(data))
