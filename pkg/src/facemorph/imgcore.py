"""Image container helpers and stage-1 pre-processing.

Images are plain numpy ``uint8`` arrays: ``(H, W)`` for grayscale and
``(H, W, 3)`` for RGB. Coordinates are pixel indices, ``x`` along columns
and ``y`` along rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage, ImageOps

__all__ = [
    "BoundingBox",
    "as_image",
    "load_image",
    "save_image",
    "to_grayscale",
    "equalize_histogram",
    "median_filter",
    "preprocess",
    "crop_with_margin",
    "resize",
    "bilinear_sample",
    "integral_image",
    "rect_sum",
]


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box, top-left corner plus size, in pixels."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box must have positive size, got w={self.w}, h={self.h}")

    @property
    def x1(self) -> int:
        return self.x + self.w

    @property
    def y1(self) -> int:
        return self.y + self.h

    @classmethod
    def from_corners(cls, x0, y0, x1, y1) -> "BoundingBox":
        return cls(int(x0), int(y0), int(x1 - x0), int(y1 - y0))

    @classmethod
    def parse(cls, text: str) -> "BoundingBox":
        """Parse ``"x,y,w,h"``."""
        parts = [int(round(float(p))) for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError(f"expected x,y,w,h, got {text!r}")
        return cls(*parts)

    def iou(self, other: "BoundingBox") -> float:
        ix = max(0, min(self.x1, other.x1) - max(self.x, other.x))
        iy = max(0, min(self.y1, other.y1) - max(self.y, other.y))
        inter = ix * iy
        union = self.w * self.h + other.w * other.h - inter
        return inter / union

    def as_list(self) -> list[int]:
        return [self.x, self.y, self.w, self.h]


def as_image(data) -> np.ndarray:
    """Validate and convert array-like data to a uint8 image."""
    arr = np.asarray(data)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if not (arr.ndim == 2 or (arr.ndim == 3 and arr.shape[2] == 3)):
        raise ValueError(f"image must be HxW or HxWx3, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError("image is empty")
    if arr.dtype != np.uint8:
        if np.any(arr < 0) or np.any(arr > 255):
            raise ValueError("intensities must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


def load_image(path, auto_rotate: bool = False) -> np.ndarray:
    """Decode a JPEG or PNG file to an RGB (or grayscale) uint8 array."""
    with PILImage.open(path) as im:
        if auto_rotate:
            im = ImageOps.exif_transpose(im)
        if im.mode == "L":
            return np.array(im)
        return np.array(im.convert("RGB"))


def save_image(img: np.ndarray, path) -> Path:
    path = Path(path)
    PILImage.fromarray(as_image(img)).save(path)
    return path


def _round(x: np.ndarray) -> np.ndarray:
    # half-up rounding; np.round would round half to even
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5)


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """ITU-R 601 luma. Single-channel input passes through unchanged."""
    img = as_image(img)
    if img.ndim == 2:
        return img
    rgb = img.astype(np.float64)
    luma = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(_round(luma), 0, 255).astype(np.uint8)


def _equalize_gray(img: np.ndarray) -> np.ndarray:
    hist = np.bincount(img.ravel(), minlength=256)
    cdf = np.cumsum(hist)
    n = img.size
    cdf_min = cdf[hist > 0][0]
    if cdf_min == n:
        return img.copy()
    lut = _round((cdf - cdf_min) / (n - cdf_min) * 255.0)
    lut = np.clip(lut, 0, 255).astype(np.uint8)
    return lut[img]


def equalize_histogram(img: np.ndarray) -> np.ndarray:
    """Global histogram equalization through the cumulative histogram.

    RGB input is converted to YCbCr, the luma channel is equalized and the
    result converted back, so hue is left alone.
    """
    img = as_image(img)
    if img.ndim == 2:
        return _equalize_gray(img)
    rgb = img.astype(np.float64)
    y = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    cb = rgb[..., 2] - y
    cr = rgb[..., 0] - y
    y_eq = _equalize_gray(np.clip(_round(y), 0, 255).astype(np.uint8)).astype(np.float64)
    r = y_eq + cr
    b = y_eq + cb
    g = (y_eq - 0.299 * r - 0.114 * b) / 0.587
    out = np.stack([r, g, b], axis=-1)
    return np.clip(_round(out), 0, 255).astype(np.uint8)


def median_filter(img: np.ndarray, radius: int = 1) -> np.ndarray:
    """Median over the (2r+1)^2 neighbourhood with edge replication."""
    img = as_image(img)
    if radius < 1:
        raise ValueError("radius must be >= 1")
    if radius >= min(img.shape[0], img.shape[1]):
        raise ValueError("kernel larger than image")
    if img.ndim == 3:
        return np.stack([median_filter(img[..., c], radius) for c in range(3)], axis=-1)
    k = 2 * radius + 1
    padded = np.pad(img, radius, mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, (k, k))
    # odd window size, so the median is an actual sample value
    flat = windows.reshape(img.shape[0], img.shape[1], k * k)
    return np.partition(flat, k * k // 2, axis=-1)[..., k * k // 2].astype(np.uint8)


def preprocess(img: np.ndarray, radius: int = 1, median_first: bool = False) -> np.ndarray:
    """Equalize then median-filter (or the reverse with ``median_first``)."""
    if median_first:
        return equalize_histogram(median_filter(img, radius))
    return median_filter(equalize_histogram(img), radius)


def crop_with_margin(img: np.ndarray, box: BoundingBox, margin: int = 30) -> tuple[np.ndarray, BoundingBox]:
    """Crop ``box`` grown by ``margin`` on every side, clipped to the image.

    Returns the crop and the region actually cut, in source coordinates.
    """
    img = as_image(img)
    if margin < 0:
        raise ValueError("margin must be >= 0")
    h, w = img.shape[:2]
    x0 = max(box.x - margin, 0)
    y0 = max(box.y - margin, 0)
    x1 = min(box.x1 + margin, w)
    y1 = min(box.y1 + margin, h)
    if x1 <= x0 or y1 <= y0 or box.x1 <= 0 or box.y1 <= 0 or box.x >= w or box.y >= h:
        raise ValueError("box outside image")
    return img[y0:y1, x0:x1].copy(), BoundingBox.from_corners(x0, y0, x1, y1)


def bilinear_sample(img: np.ndarray, xs: np.ndarray, ys: np.ndarray, fill: float | None = None) -> np.ndarray:
    """Sample ``img`` at fractional pixel positions.

    Positions within half a pixel of the border are clamped to the edge.
    Positions further out get ``fill``, or are clamped too when ``fill`` is None.
    Returns float64 values (per channel for RGB).
    """
    h, w = img.shape[:2]
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    xc = np.clip(xs, 0.0, w - 1.0)
    yc = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xc).astype(np.intp)
    y0 = np.floor(yc).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xc - x0
    fy = yc - y0
    src = img.astype(np.float64)
    if src.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = src[y0, x0] * (1 - fx) + src[y0, x1] * fx
    bot = src[y1, x0] * (1 - fx) + src[y1, x1] * fx
    out = top * (1 - fy) + bot * fy
    if fill is not None:
        outside = (xs < -0.5) | (xs > w - 0.5) | (ys < -0.5) | (ys > h - 0.5)
        out[outside] = fill
    return out


def resize(img: np.ndarray, new_w: int, new_h: int) -> np.ndarray:
    """Bilinear resize with pixel-centre alignment; aspect ratio is not kept."""
    img = as_image(img)
    if new_w < 1 or new_h < 1:
        raise ValueError("target size must be >= 1")
    h, w = img.shape[:2]
    if (new_w, new_h) == (w, h):
        return img.copy()
    xs = (np.arange(new_w) + 0.5) * (w / new_w) - 0.5
    ys = (np.arange(new_h) + 0.5) * (h / new_h) - 0.5
    gx, gy = np.meshgrid(xs, ys)
    out = bilinear_sample(img, gx, gy)
    return np.clip(_round(out), 0, 255).astype(np.uint8)


def integral_image(img: np.ndarray) -> np.ndarray:
    """Summed-area table of shape (H+1, W+1) with a zero first row and column."""
    img = as_image(img)
    if img.ndim == 3:
        raise ValueError("integral image needs a single-channel image")
    ii = np.zeros((img.shape[0] + 1, img.shape[1] + 1), dtype=np.int64)
    np.cumsum(np.cumsum(img.astype(np.int64), axis=0), axis=1, out=ii[1:, 1:])
    return ii


def rect_sum(ii: np.ndarray, x: int, y: int, w: int, h: int) -> int:
    """Sum of pixels in columns [x, x+w) and rows [y, y+h)."""
    return int(ii[y + h, x + w] - ii[y, x + w] - ii[y + h, x] + ii[y, x])
