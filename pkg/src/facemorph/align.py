"""Five-point face alignment: level the eyes and resample to the working size."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imgcore import as_image, bilinear_sample

WORK_SIZE = 600


@dataclass(frozen=True)
class FivePointLandmarks:
    """Eye corners and nose tip; "left" is the eye on the image's left."""

    left_eye_outer: tuple[float, float]
    left_eye_inner: tuple[float, float]
    right_eye_inner: tuple[float, float]
    right_eye_outer: tuple[float, float]
    nose_tip: tuple[float, float]

    @classmethod
    def from_points(cls, pts) -> "FivePointLandmarks":
        pts = np.asarray(pts, dtype=np.float64)
        if pts.shape != (5, 2):
            raise ValueError(f"expected 5 points, got shape {pts.shape}")
        return cls(*(tuple(float(v) for v in p) for p in pts))

    @classmethod
    def from_68(cls, pts) -> "FivePointLandmarks":
        """Pick the eye corners and nose tip out of a 68-point set."""
        pts = np.asarray(pts, dtype=np.float64)
        return cls.from_points(pts[[36, 39, 42, 45, 33]])

    def as_array(self) -> np.ndarray:
        return np.array([self.left_eye_outer, self.left_eye_inner, self.right_eye_inner,
                         self.right_eye_outer, self.nose_tip], dtype=np.float64)


@dataclass(frozen=True)
class SimilarityTransform:
    """``p -> scale * R(rotation) @ p + translation`` in y-down pixel coordinates."""

    rotation: float = 0.0
    scale: float = 1.0
    translation: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @property
    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        return self.scale * np.array([[c, -s], [s, c]])

    def inverse(self) -> "SimilarityTransform":
        inv_scale = 1.0 / self.scale
        c, s = math.cos(-self.rotation), math.sin(-self.rotation)
        tx, ty = self.translation
        itx = -inv_scale * (c * tx - s * ty)
        ity = -inv_scale * (s * tx + c * ty)
        return SimilarityTransform(-self.rotation, inv_scale, (itx, ity))

    def compose(self, other: "SimilarityTransform") -> "SimilarityTransform":
        """Transform equal to applying ``other`` first, then ``self``."""
        t = map_points(self, [other.translation])[0]
        return SimilarityTransform(self.rotation + other.rotation, self.scale * other.scale, (t[0], t[1]))

    def to_dict(self) -> dict:
        return {"rotation": self.rotation, "scale": self.scale, "translation": list(self.translation)}


def map_points(t: SimilarityTransform, pts) -> np.ndarray:
    """Apply rotation, scale, then translation to an (N, 2) point array."""
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    return pts @ t.matrix.T + np.asarray(t.translation)


def eye_centroids(lm: FivePointLandmarks) -> tuple[np.ndarray, np.ndarray]:
    left = (np.asarray(lm.left_eye_outer) + np.asarray(lm.left_eye_inner)) / 2.0
    right = (np.asarray(lm.right_eye_inner) + np.asarray(lm.right_eye_outer)) / 2.0
    return left, right


def roll_angle(left, right) -> float:
    """Angle of the left-to-right eye line; positive is clockwise on screen."""
    dx = right[0] - left[0]
    dy = right[1] - left[1]
    if dx == 0 and dy == 0:
        raise ValueError("degenerate eye geometry")
    return math.atan2(dy, dx)


def align_face(img: np.ndarray, lm: FivePointLandmarks, size: int = WORK_SIZE):
    """Rotate about the inter-ocular midpoint to level the eyes and scale to ``size``.

    The face crop (the whole input) is scaled by ``size / max(H, W)``;
    pixels mapped from outside the input are black. Returns the aligned
    image and the transform from input to output pixel coordinates.
    """
    img = as_image(img)
    left, right = eye_centroids(lm)
    theta = roll_angle(left, right)
    h, w = img.shape[:2]
    s = size / max(h, w)
    inv_s = max(h, w) / size
    mid = (left + right) / 2.0

    # pixel centres sit at integer coordinates, continuous edges at -0.5
    qx, qy = np.meshgrid(np.arange(size, dtype=np.float64), np.arange(size, dtype=np.float64))
    if theta == 0.0:
        xs = (qx + 0.5) * inv_s - 0.5
        ys = (qy + 0.5) * inv_s - 0.5
        t = SimilarityTransform(0.0, s, (0.5 * s - 0.5, 0.5 * s - 0.5))
    else:
        m = mid + 0.5
        c, sn = math.cos(theta), math.sin(theta)
        ux = (qx + 0.5) * inv_s - m[0]
        uy = (qy + 0.5) * inv_s - m[1]
        xs = c * ux - sn * uy + m[0] - 0.5
        ys = sn * ux + c * uy + m[1] - 0.5
        fwd = SimilarityTransform(-theta, s, (0.0, 0.0))
        rm = map_points(fwd, [mid])[0]
        t = SimilarityTransform(-theta, s, (s * m[0] - rm[0] - 0.5, s * m[1] - rm[1] - 0.5))
    out = bilinear_sample(img, xs, ys, fill=0.0)
    out = np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)
    return out, t
