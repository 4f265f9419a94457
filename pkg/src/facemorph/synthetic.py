"""Synthetic 68-point faces: parametric shapes, cohorts and rendered images.

The template follows the usual 68-point numbering (jaw 0-16, brows 17-26,
nose 27-35, eyes 36-47, mouth 48-67) in a 600x600 frame. Faces are drawn
as flat-shaded polygons so that every landmark sits on a visible
intensity edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
from PIL import Image as PILImage, ImageDraw

from .align import SimilarityTransform, map_points
from .imgcore import BoundingBox
from .shaperegress import LandmarkSet, box_around, save_landmarks


@dataclass(frozen=True)
class FaceParams:
    """Face geometry in pixels of the 600x600 frame."""

    cx: float = 300.0
    eye_y: float = 250.0
    half_width: float = 190.0      # jaw ellipse semi-axis
    face_height: float = 300.0     # chin to brow-peak midpoint
    brow_rise: float = 45.0        # brow peak above the eye line
    eye_dx: float = 80.0           # eye centre offset from the midline
    eye_w: float = 30.0            # eye half-width
    eye_h: float = 11.0
    nose_top: float = 20.0         # bridge top below the eye line
    nose_len: float = 100.0        # bridge top to nostril base
    nose_w: float = 70.0           # nostril span (landmarks 31-35)
    mouth_w: float = 120.0
    mouth_h: float = 40.0          # outer lip height (51-57)
    mouth_gap: float = 40.0        # nostril base to mouth line


def face_shape(p: FaceParams = FaceParams()) -> np.ndarray:
    """68x2 landmark array for the given parameters."""
    pts = np.zeros((68, 2))
    brow_y = p.eye_y - p.brow_rise
    chin_y = brow_y + p.face_height
    jaw_top = p.eye_y + 0.15 * p.face_height
    for i in range(17):
        a = math.pi * i / 16
        pts[i] = (p.cx - p.half_width * math.cos(a), jaw_top + (chin_y - jaw_top) * math.sin(a))

    for side, start in ((-1, 17), (1, 22)):
        ex = p.cx + side * p.eye_dx
        xs = np.linspace(ex - 1.3 * p.eye_w, ex + 1.3 * p.eye_w, 5)
        for j, x in enumerate(xs):
            lift = 1.0 - ((x - ex) / (1.4 * p.eye_w)) ** 2
            pts[start + j] = (x, p.eye_y - p.brow_rise * (0.75 + 0.25 * lift))

    top = p.eye_y + p.nose_top
    base = top + p.nose_len
    for j in range(4):
        pts[27 + j] = (p.cx, top + (p.nose_len * 0.85) * j / 3)
    for j in range(5):
        x = p.cx - p.nose_w / 2 + p.nose_w * j / 4
        pts[31 + j] = (x, base + 6.0 * (1 - abs(j - 2) / 2))

    for side, start in ((-1, 36), (1, 42)):
        ex = p.cx + side * p.eye_dx
        # left corner, two upper, right corner, two lower
        for j, deg in enumerate((180, 120, 60, 0, 300, 240)):
            a = math.radians(deg)
            pts[start + j] = (ex + p.eye_w * math.cos(a), p.eye_y - p.eye_h * math.sin(a))

    my = base + p.mouth_gap + 0.45 * p.mouth_h
    hw = p.mouth_w / 2
    up = 0.45 * p.mouth_h
    lo = 0.55 * p.mouth_h
    outer = [(-hw, 0), (-0.65 * hw, -0.7 * up), (-0.3 * hw, -up), (0, -0.85 * up),
             (0.3 * hw, -up), (0.65 * hw, -0.7 * up), (hw, 0), (0.6 * hw, 0.8 * lo),
             (0.3 * hw, 0.97 * lo), (0, lo), (-0.3 * hw, 0.97 * lo), (-0.6 * hw, 0.8 * lo)]
    # 51 and 57 carry the full vertical extent
    outer[3] = (0, -up)
    for j, (dx, dy) in enumerate(outer):
        pts[48 + j] = (p.cx + dx, my + dy)
    inner = [(-0.8 * hw, 0), (-0.35 * hw, -0.3 * up), (0, -0.3 * up), (0.35 * hw, -0.3 * up),
             (0.8 * hw, 0), (0.35 * hw, 0.3 * lo), (0, 0.3 * lo), (-0.35 * hw, 0.3 * lo)]
    for j, (dx, dy) in enumerate(inner):
        pts[60 + j] = (p.cx + dx, my + dy)
    return pts


# relative standard deviation of each parameter within a cohort
PARAM_SD = {
    "half_width": 0.05, "face_height": 0.05, "brow_rise": 0.08, "eye_dx": 0.05,
    "eye_w": 0.06, "eye_h": 0.08, "nose_top": 0.1, "nose_len": 0.06, "nose_w": 0.07,
    "mouth_w": 0.07, "mouth_h": 0.08, "mouth_gap": 0.08,
}

# PTHS-like shift: shorter nose over a proportionally shorter face (wider nose
# angle, unchanged nose/face area ratio) and a taller mouth
PTHS_SHIFT = {"nose_len": 0.85, "face_height": 0.85, "mouth_h": 1.2}


def random_params(rng: np.random.Generator, shift: dict | None = None, base: FaceParams = FaceParams()) -> FaceParams:
    values = {}
    for f in fields(FaceParams):
        v = getattr(base, f.name)
        if shift and f.name in shift:
            v *= shift[f.name]
        sd = PARAM_SD.get(f.name)
        if sd:
            v *= 1.0 + sd * rng.standard_normal()
        values[f.name] = v
    return FaceParams(**values)


def random_similarity(rng, max_rot_deg=10.0, scale=(0.9, 1.1), shift=20.0, center=(300.0, 300.0)):
    """Random similarity about ``center`` (the template frame centre by default)."""
    theta = math.radians(rng.uniform(-max_rot_deg, max_rot_deg))
    s = rng.uniform(*scale)
    c = np.asarray(center)
    rot = SimilarityTransform(theta, s, (0.0, 0.0))
    t = c - map_points(rot, [c])[0] + rng.uniform(-shift, shift, size=2)
    return SimilarityTransform(theta, s, (float(t[0]), float(t[1])))


def random_face(rng, shift=None, jitter=1.5, pose=True) -> np.ndarray:
    pts = face_shape(random_params(rng, shift))
    pts = pts + jitter * rng.standard_normal(pts.shape)
    if pose:
        pts = map_points(random_similarity(rng), pts)
    return pts


def synthetic_cohorts(n_a: int = 71, n_b: int = 55, seed: int = 0, shift: dict | None = None,
                      pose: bool = True) -> tuple[list[LandmarkSet], list[LandmarkSet]]:
    """Two cohorts of 68-point shapes; the first gets ``shift`` (PTHS-like by default)."""
    rng = np.random.default_rng(seed)
    shift = PTHS_SHIFT if shift is None else shift
    a = [LandmarkSet("68pt", random_face(rng, shift, pose=pose)) for _ in range(n_a)]
    b = [LandmarkSet("68pt", random_face(rng, None, pose=pose)) for _ in range(n_b)]
    return a, b


# --------------------------------------------------------------------------
# Rendering
# --------------------------------------------------------------------------

SKIN, BACKGROUND, BROW, EYE, NOSE, LIP, MOUTH = 175, 60, 80, 30, 130, 95, 40


def _forehead(pts: np.ndarray) -> list[tuple[float, float]]:
    """Arc over the brows closing the face outline from point 16 back to 0."""
    left, right = pts[0], pts[16]
    c = (left + right) / 2
    r = np.linalg.norm(right - left) / 2
    top = min(pts[17:27, 1].min(), c[1]) - 0.35 * r
    a0 = math.atan2(right[1] - c[1], right[0] - c[0])
    a1 = math.atan2(left[1] - c[1], left[0] - c[0])
    if a1 > a0:
        a1 -= 2 * math.pi
    arc = []
    for a in np.linspace(a0, a1, 24)[1:-1]:
        ry = c[1] - top
        arc.append((c[0] + r * math.cos(a), c[1] + ry * math.sin(a)))
    return arc


def render_face(pts: np.ndarray, size: int = 600, scale: float = 1.0, noise: float = 4.0,
                rng: np.random.Generator | None = None) -> np.ndarray:
    """Draw a face from 68 landmarks (already in output pixel units after ``scale``)."""
    p = np.asarray(pts, dtype=np.float64) * scale
    im = PILImage.new("L", (size, size), BACKGROUND)
    d = ImageDraw.Draw(im)

    def poly(idx, fill):
        d.polygon([tuple(p[i]) for i in idx], fill=fill)

    outline = [tuple(q) for q in p[0:17]] + _forehead(p)
    d.polygon(outline, fill=SKIN)
    width = max(1, int(round(6 * scale)))
    for start in (17, 22):
        d.line([tuple(q) for q in p[start:start + 5]], fill=BROW, width=width)
    poly(range(36, 42), EYE)
    poly(range(42, 48), EYE)
    poly([27, 31, 32, 33, 34, 35], NOSE)
    d.line([tuple(q) for q in p[27:31]], fill=NOSE - 25, width=max(1, width // 2))
    poly(range(48, 60), LIP)
    poly(range(60, 68), MOUTH)
    img = np.asarray(im, dtype=np.float64)
    if noise > 0:
        rng = rng if rng is not None else np.random.default_rng(0)
        img = img + noise * rng.standard_normal(img.shape)
    return np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)


def face_box(pts: np.ndarray) -> BoundingBox:
    """Detector-style box around the inner face (brows down to the chin)."""
    return box_around(np.asarray(pts)[:27], pad=0.05)


def synthetic_dataset(n: int, size: int = 160, seed: int = 0, box_jitter: float = 0.03,
                      shift: dict | None = None):
    """Rendered faces with jittered face boxes, for training and evaluation.

    Returns a list of ``(image, box, LandmarkSet)`` with landmarks in image
    pixels. Box jitter is a fraction of the box size.
    """
    rng = np.random.default_rng(seed)
    k = size / 600.0
    out = []
    for _ in range(n):
        pts = random_face(rng, shift) * k
        img = render_face(pts, size=size, noise=4.0, rng=rng)
        box = face_box(pts)
        jx, jy = rng.uniform(-box_jitter, box_jitter, size=2) * np.array([box.w, box.h])
        box = BoundingBox(box.x + int(round(jx)), box.y + int(round(jy)), box.w, box.h)
        out.append((img, box, LandmarkSet("68pt", pts)))
    return out


def write_landmark_cohort(shapes, directory, prefix: str = "face") -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return [save_landmarks(s, directory / f"{prefix}_{i:03d}.json") for i, s in enumerate(shapes)]


def write_image_cohort(shapes, directory, prefix: str = "face", size: int = 600, seed: int = 0) -> list[Path]:
    """Render each 600-frame shape to a PNG in ``directory``."""
    from .imgcore import save_image

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = []
    for i, s in enumerate(shapes):
        img = render_face(s.points, size=size, scale=size / 600.0, rng=rng)
        paths.append(save_image(img, directory / f"{prefix}_{i:03d}.png"))
    return paths
