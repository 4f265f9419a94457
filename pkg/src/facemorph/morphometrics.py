"""The six geometric face features computed from a 68-point landmark set.

Three width ratios (eyes, nose and mouth over face-width baselines), the
nose apex angle from the law of cosines, and nose and mouth areas relative
to an elliptical face area.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, astuple, replace

import numpy as np

from .shaperegress import LandmarkSet

FEATURE_NAMES = ("r1_b1", "r2_b2", "r3_b3", "nose_angle", "r_nose", "r_mouth")
# display labels in table order
FEATURE_LABELS = ("R1/B1", "R2/B2", "R3/B3", "NoseAngle", "RNose", "RMouth")
CSV_HEADER = ("r1_b1", "r2_b2", "r3_b3", "nose_angle_deg", "r_nose", "r_mouth")


class DegenerateGeometry(ValueError):
    pass


@dataclass(frozen=True)
class LandmarkIndexMap:
    eyes: tuple[int, int] = (39, 40)
    nose: tuple[int, int] = (31, 35)
    mouth: tuple[int, int] = (48, 54)
    temples: tuple[int, int] = (0, 16)
    cheekbones: tuple[int, int] = (2, 14)
    jaw: tuple[int, int] = (4, 12)
    nose_apex: int = 27
    face_width: tuple[int, int] = (1, 15)
    chin: int = 8
    brow_left: int = 19
    brow_right: int = 24
    mouth_top: int = 51
    mouth_bottom: int = 57

    def __post_init__(self):
        for name, v in self.__dict__.items():
            vals = v if isinstance(v, tuple) else (v,)
            if any(not 0 <= i <= 67 for i in vals):
                raise ValueError(f"landmark index out of range in {name}: {v}")
            if isinstance(v, tuple) and (len(v) != 2 or v[0] == v[1]):
                raise ValueError(f"{name} must be a pair of distinct indices")

    @classmethod
    def from_dict(cls, d: dict) -> "LandmarkIndexMap":
        base = cls()
        kw = {k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()}
        return replace(base, **kw)

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


DEFAULT_MAP = LandmarkIndexMap()
# inner corners of the two eyes rather than two corners of one eye
CONVENTIONAL_EYE_MAP = LandmarkIndexMap(eyes=(39, 42))


@dataclass(frozen=True)
class FeatureVector:
    r1_b1: float
    r2_b2: float
    r3_b3: float
    nose_angle: float
    r_nose: float
    r_mouth: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self))

    def csv_row(self) -> str:
        return ",".join(repr(float(v)) for v in astuple(self))

    def to_dict(self) -> dict:
        return dict(zip(FEATURE_NAMES, astuple(self)))


def _points(lm) -> np.ndarray:
    pts = lm.points if isinstance(lm, LandmarkSet) else np.asarray(lm, dtype=np.float64)
    if pts.shape != (68, 2):
        raise ValueError(f"need a 68-point shape, got {pts.shape}")
    return pts


def _dist(pts, pair) -> float:
    a, b = pts[pair[0]], pts[pair[1]]
    return math.hypot(a[0] - b[0], a[1] - b[1])


def distance_ratios(lm, m: LandmarkIndexMap = DEFAULT_MAP) -> tuple[float, float, float]:
    pts = _points(lm)
    out = []
    for r, b in ((m.eyes, m.temples), (m.nose, m.cheekbones), (m.mouth, m.jaw)):
        base = _dist(pts, b)
        if base == 0:
            raise DegenerateGeometry(f"degenerate face geometry: zero baseline {b}")
        out.append(_dist(pts, r) / base)
    return tuple(out)


def triangle_angle(apex, p, q) -> float:
    """Angle at ``apex`` in degrees via the law of cosines."""
    b = math.hypot(p[0] - apex[0], p[1] - apex[1])
    c = math.hypot(q[0] - apex[0], q[1] - apex[1])
    a = math.hypot(p[0] - q[0], p[1] - q[1])
    if a == 0 or b == 0 or c == 0:
        raise DegenerateGeometry("degenerate triangle")
    cos_alpha = (b * b + c * c - a * a) / (2 * b * c)
    # rounding can push a valid cosine just past +-1
    cos_alpha = min(1.0, max(-1.0, cos_alpha))
    alpha = math.degrees(math.acos(cos_alpha))
    if alpha == 0.0 or alpha == 180.0 or polygon_area([apex, p, q]) == 0.0:
        raise DegenerateGeometry("degenerate triangle")
    return alpha


def nose_angle(lm, m: LandmarkIndexMap = DEFAULT_MAP) -> float:
    pts = _points(lm)
    return triangle_angle(pts[m.nose_apex], pts[m.nose[0]], pts[m.nose[1]])


def ellipse_area(major: float, minor: float) -> float:
    return math.pi * (major / 2) * (minor / 2)


def face_ellipse_area(lm, m: LandmarkIndexMap = DEFAULT_MAP) -> float:
    """Ellipse with the face width and brow-midpoint-to-chin height as axes."""
    pts = _points(lm)
    minor = _dist(pts, m.face_width)
    brow_mid = (pts[m.brow_left] + pts[m.brow_right]) / 2
    major = math.hypot(*(pts[m.chin] - brow_mid))
    if minor == 0 or major == 0:
        raise DegenerateGeometry("degenerate face geometry: zero face axis")
    return ellipse_area(major, minor)


def polygon_area(points) -> float:
    """Shoelace area, independent of vertex orientation."""
    p = np.asarray(points, dtype=np.float64)
    if p.ndim != 2 or len(p) < 3:
        raise ValueError("not a polygon")
    # shifting to the first vertex avoids cancellation far from the origin
    x, y = p[:, 0] - p[0, 0], p[:, 1] - p[0, 1]
    return abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))) / 2


def area_ratios(lm, m: LandmarkIndexMap = DEFAULT_MAP) -> tuple[float, float]:
    pts = _points(lm)
    face = face_ellipse_area(pts, m)
    nose = polygon_area(pts[[m.nose_apex, m.nose[0], m.nose[1]]])
    mouth = ellipse_area(_dist(pts, m.mouth), _dist(pts, (m.mouth_top, m.mouth_bottom)))
    return nose / face, mouth / face


def extract_features(lm, m: LandmarkIndexMap = DEFAULT_MAP) -> FeatureVector:
    try:
        r1, r2, r3 = distance_ratios(lm, m)
        angle = nose_angle(lm, m)
        rn, rm = area_ratios(lm, m)
    except DegenerateGeometry as exc:
        raise DegenerateGeometry(f"{exc} (index map {m.to_dict()})") from exc
    return FeatureVector(r1, r2, r3, angle, rn, rm)
