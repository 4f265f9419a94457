"""Face detection: Haar cascade evaluation and HOG + linear SVM scanning.

Haar cascades are evaluated over an integral image; the models are loaded
from a small JSON format (training a real cascade is not supported). The
HOG detector uses the standard pedestrian layout with 64x64 windows, 8x8 cells,
2x2-cell blocks and 9 unsigned orientation bins.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from .imgcore import BoundingBox, as_image, rect_sum, resize, to_grayscale

log = logging.getLogger(__name__)

NMS_IOU = 0.3


# --------------------------------------------------------------------------
# Haar features and cascades
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class HaarFeature:
    """Weighted rectangles in unit-window coordinates.

    Each rect is ``(fx, fy, fw, fh, weight)`` with the geometry given as
    fractions of the detection window.
    """

    rects: tuple[tuple[float, float, float, float, float], ...]

    def __post_init__(self):
        if len(self.rects) < 2:
            raise ValueError("a Haar feature needs at least 2 rects")
        for fx, fy, fw, fh, _ in self.rects:
            if fw <= 0 or fh <= 0 or fx < 0 or fy < 0 or fx + fw > 1 + 1e-9 or fy + fh > 1 + 1e-9:
                raise ValueError("invalid feature geometry")


@dataclass(frozen=True)
class Stump:
    feature: HaarFeature
    threshold: float
    left: float
    right: float


@dataclass(frozen=True)
class CascadeStage:
    stumps: tuple[Stump, ...]
    threshold: float


@dataclass(frozen=True)
class HaarCascade:
    """Ordered stages over a base window of ``window`` = (w, h) pixels.

    A stump compares the feature value divided by the window area (mean
    weighted intensity) against its threshold, so thresholds carry over
    between scales. A stage passes when its stump sum reaches the stage
    threshold.
    """

    window: tuple[int, int]
    stages: tuple[CascadeStage, ...]

    def to_dict(self) -> dict:
        return {
            "window": list(self.window),
            "stages": [
                {
                    "threshold": st.threshold,
                    "stumps": [
                        {
                            "feature": {"rects": [list(r) for r in s.feature.rects]},
                            "threshold": s.threshold,
                            "left": s.left,
                            "right": s.right,
                        }
                        for s in st.stumps
                    ],
                }
                for st in self.stages
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HaarCascade":
        stages = []
        for st in d["stages"]:
            stumps = tuple(
                Stump(
                    HaarFeature(tuple(tuple(float(v) for v in r) for r in s["feature"]["rects"])),
                    float(s["threshold"]),
                    float(s["left"]),
                    float(s["right"]),
                )
                for s in st["stumps"]
            )
            stages.append(CascadeStage(stumps, float(st["threshold"])))
        w, h = d["window"]
        return cls((int(w), int(h)), tuple(stages))


def save_cascade(cascade: HaarCascade, path) -> None:
    Path(path).write_text(json.dumps(cascade.to_dict(), indent=1))


def load_cascade(path) -> HaarCascade:
    return HaarCascade.from_dict(json.loads(Path(path).read_text()))


def _scaled_rect(rect, window: BoundingBox):
    fx, fy, fw, fh, weight = rect
    x = window.x + int(np.floor(fx * window.w + 0.5))
    y = window.y + int(np.floor(fy * window.h + 0.5))
    w = int(np.floor(fw * window.w + 0.5))
    h = int(np.floor(fh * window.h + 0.5))
    if w < 1 or h < 1 or x + w > window.x1 or y + h > window.y1:
        raise ValueError("invalid feature geometry")
    return x, y, w, h, weight


def haar_feature_value(ii: np.ndarray, feature: HaarFeature, window: BoundingBox) -> float:
    """Weighted sum of rectangle sums for ``feature`` placed in ``window``."""
    if window.x < 0 or window.y < 0 or window.y1 > ii.shape[0] - 1 or window.x1 > ii.shape[1] - 1:
        raise ValueError("window outside image")
    total = 0.0
    for rect in feature.rects:
        x, y, w, h, weight = _scaled_rect(rect, window)
        total += weight * rect_sum(ii, x, y, w, h)
    return total


def _evaluate_window(ii, cascade: HaarCascade, window: BoundingBox) -> float | None:
    """Sum of stage sums if every stage passes, else None."""
    area = window.w * window.h
    score = 0.0
    for stage in cascade.stages:
        s = 0.0
        for stump in stage.stumps:
            v = haar_feature_value(ii, stump.feature, window) / area
            s += stump.left if v < stump.threshold else stump.right
        if s < stage.threshold:
            return None
        score += s
    return score


def non_max_suppression(boxes: Sequence[BoundingBox], scores: Sequence[float], iou: float = NMS_IOU):
    """Greedy NMS; returns (box, score) pairs by descending score."""
    order = sorted(range(len(boxes)), key=lambda i: (-scores[i], i))
    kept: list[tuple[BoundingBox, float]] = []
    for i in order:
        if all(boxes[i].iou(k) <= iou for k, _ in kept):
            kept.append((boxes[i], float(scores[i])))
    return kept


def _scan_positions(img_w, img_h, win_w, win_h, step):
    for y in range(0, img_h - win_h + 1, step):
        for x in range(0, img_w - win_w + 1, step):
            yield x, y


def cascade_windows(ii: np.ndarray, cascade: HaarCascade, scales: Sequence[float], step: int = 2):
    """All windows that pass every stage, before NMS, as (box, score)."""
    if not cascade.stages:
        raise ValueError("empty cascade")
    if len(scales) == 0:
        raise ValueError("scale list is empty")
    img_h, img_w = ii.shape[0] - 1, ii.shape[1] - 1
    hits = []
    for s in scales:
        win_w = int(round(cascade.window[0] * s))
        win_h = int(round(cascade.window[1] * s))
        if win_w < 1 or win_h < 1 or win_w > img_w or win_h > img_h:
            continue
        for x, y in _scan_positions(img_w, img_h, win_w, win_h, step):
            box = BoundingBox(x, y, win_w, win_h)
            score = _evaluate_window(ii, cascade, box)
            if score is not None:
                hits.append((box, score))
    return hits


def cascade_detect(ii: np.ndarray, cascade: HaarCascade, scales: Sequence[float], step: int = 2,
                   iou: float = NMS_IOU) -> list[tuple[BoundingBox, float]]:
    """Scan all scales and return NMS-merged detections, best first."""
    hits = cascade_windows(ii, cascade, scales, step)
    return non_max_suppression([b for b, _ in hits], [s for _, s in hits], iou)


# --------------------------------------------------------------------------
# HOG descriptor
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class HogConfig:
    window: int = 64
    cell: int = 8
    block: int = 2
    stride: int = 1
    bins: int = 9

    @property
    def cells(self) -> int:
        return self.window // self.cell

    @property
    def blocks(self) -> int:
        return (self.cells - self.block) // self.stride + 1

    @property
    def length(self) -> int:
        return self.blocks ** 2 * self.block ** 2 * self.bins

    def validate(self):
        if self.window < self.cell * self.block:
            raise ValueError("window too small")


HOG_EPS = 1e-6
HOG_CLIP = 0.2


def _hog_batch(patches: np.ndarray, cfg: HogConfig) -> np.ndarray:
    """Descriptors for a stack of square patches, shape (N, window, window)."""
    p = patches.astype(np.float64)
    # centred differences, edge-replicated at the patch border
    padded = np.pad(p, ((0, 0), (1, 1), (1, 1)), mode="edge")
    gx = padded[:, 1:-1, 2:] - padded[:, 1:-1, :-2]
    gy = padded[:, 2:, 1:-1] - padded[:, :-2, 1:-1]
    mag = np.hypot(gx, gy)
    ang = np.mod(np.degrees(np.arctan2(gy, gx)), 180.0)
    pos = ang / (180.0 / cfg.bins)
    lo_f = np.floor(pos)
    frac = pos - lo_f
    lo = lo_f.astype(np.intp) % cfg.bins
    hi = (lo + 1) % cfg.bins

    n = p.shape[0]
    nc = cfg.cells
    c = cfg.cell
    # cell index of every pixel
    row_cell = (np.arange(cfg.window) // c)[:, None]
    col_cell = (np.arange(cfg.window) // c)[None, :]
    cell_idx = np.broadcast_to(row_cell * nc + col_cell, (cfg.window, cfg.window))
    base = (np.arange(n)[:, None, None] * nc * nc + cell_idx[None]) * cfg.bins
    hist = np.zeros(n * nc * nc * cfg.bins)
    hist += np.bincount((base + lo).ravel(), (mag * (1 - frac)).ravel(), minlength=hist.size)
    hist += np.bincount((base + hi).ravel(), (mag * frac).ravel(), minlength=hist.size)
    hist = hist.reshape(n, nc, nc, cfg.bins)

    nb = cfg.blocks
    blocks = np.empty((n, nb, nb, cfg.block, cfg.block, cfg.bins))
    for by in range(nb):
        for bx in range(nb):
            y0, x0 = by * cfg.stride, bx * cfg.stride
            blocks[:, by, bx] = hist[:, y0:y0 + cfg.block, x0:x0 + cfg.block]
    v = blocks.reshape(n, nb * nb, -1)
    v = v / np.sqrt(np.sum(v * v, axis=-1, keepdims=True) + HOG_EPS ** 2)
    v = np.minimum(v, HOG_CLIP)
    v = v / np.sqrt(np.sum(v * v, axis=-1, keepdims=True) + HOG_EPS ** 2)
    return v.reshape(n, -1)


def _window_patch(img: np.ndarray, window: BoundingBox, cfg: HogConfig) -> np.ndarray:
    h, w = img.shape[:2]
    if window.x < 0 or window.y < 0 or window.x1 > w or window.y1 > h:
        raise ValueError("window outside image")
    patch = img[window.y:window.y1, window.x:window.x1]
    if patch.shape != (cfg.window, cfg.window):
        if patch.dtype != np.uint8:
            raise ValueError("only uint8 windows can be resampled")
        patch = resize(patch, cfg.window, cfg.window)
    return patch


def hog_descriptor(img: np.ndarray, window: BoundingBox | None = None, cfg: HogConfig = HogConfig()) -> np.ndarray:
    """HOG vector of ``window`` (whole image if None), resampled to the configured size.

    ``img`` may be uint8 or float; float input must already match the window size.
    """
    cfg.validate()
    img = np.asarray(img)
    if img.ndim == 3:
        img = to_grayscale(img)
    if window is None:
        window = BoundingBox(0, 0, img.shape[1], img.shape[0])
    if window.w < cfg.cell * cfg.block or window.h < cfg.cell * cfg.block:
        raise ValueError("window too small")
    patch = _window_patch(img, window, cfg)
    return _hog_batch(patch[None], cfg)[0]


@dataclass
class LinearSvmModel:
    weights: np.ndarray
    bias: float
    descriptor_config: HogConfig | None = None
    train_accuracy: float | None = None

    def decision(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) @ self.weights + self.bias

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.where(self.decision(x) > 0, 1, -1)

    def to_dict(self) -> dict:
        return {
            "weights": [float(v) for v in self.weights],
            "bias": float(self.bias),
            "descriptor_config": asdict(self.descriptor_config) if self.descriptor_config else None,
            "train_accuracy": self.train_accuracy,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearSvmModel":
        cfg = d.get("descriptor_config")
        return cls(
            np.asarray(d["weights"], dtype=np.float64),
            float(d["bias"]),
            HogConfig(**cfg) if cfg else None,
            d.get("train_accuracy"),
        )


def save_svm(model: LinearSvmModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict()))


def load_svm(path) -> LinearSvmModel:
    return LinearSvmModel.from_dict(json.loads(Path(path).read_text()))


def hog_scan(img: np.ndarray, model: LinearSvmModel, stride: int = 8, scales: Sequence[float] = (1.0,),
             iou: float = NMS_IOU, chunk: int = 512) -> list[tuple[BoundingBox, float]]:
    """Slide the HOG window over an image pyramid and score with ``model``.

    At scale ``s`` the image is shrunk by ``1/s`` so the window covers
    ``window*s`` source pixels. Positive-score windows are merged by NMS and
    returned best first, in source coordinates.
    """
    cfg = model.descriptor_config or HogConfig()
    cfg.validate()
    if model.weights.shape != (cfg.length,):
        raise ValueError("model/descriptor mismatch")
    img = to_grayscale(as_image(img))
    H, W = img.shape
    boxes, scores = [], []
    for s in scales:
        sw, sh = int(round(W / s)), int(round(H / s))
        if sw < cfg.window or sh < cfg.window:
            continue
        scaled = resize(img, sw, sh)
        positions = list(_scan_positions(sw, sh, cfg.window, cfg.window, stride))
        for i in range(0, len(positions), chunk):
            part = positions[i:i + chunk]
            patches = np.stack([scaled[y:y + cfg.window, x:x + cfg.window] for x, y in part])
            desc = _hog_batch(patches, cfg)
            for (x, y), d in zip(part, desc):
                v = float(np.dot(model.weights, d)) + model.bias
                if v > 0:
                    boxes.append(BoundingBox(int(round(x * s)), int(round(y * s)),
                                             int(round(cfg.window * s)), int(round(cfg.window * s))))
                    scores.append(float(v))
    return non_max_suppression(boxes, scores, iou)


def train_linear_svm(positives, negatives, C: float = 1.0, iterations: int = 2000,
                     descriptor_config: HogConfig | None = None, tol: float = 1e-6) -> LinearSvmModel:
    """Soft-margin linear SVM ``0.5*|w|^2 + C * sum(hinge)`` by dual coordinate descent.

    Features are centred and augmented with a constant column so the bias
    is solved jointly with ``w``; centring keeps the small bias penalty from
    pulling the boundary. ``iterations`` caps the number of sweeps, and the
    sweep order comes from a fixed seed so training is deterministic.
    """
    pos = np.atleast_2d(np.asarray(positives, dtype=np.float64))
    neg = np.atleast_2d(np.asarray(negatives, dtype=np.float64))
    if pos.shape[0] < 1 or neg.shape[0] < 1:
        raise ValueError("need at least one positive and one negative")
    if pos.shape[1] != neg.shape[1]:
        raise ValueError("positives and negatives differ in dimension")
    if np.array_equal(np.unique(pos, axis=0), np.unique(neg, axis=0)):
        raise ValueError("inseparable degenerate data")
    X = np.vstack([pos, neg])
    y = np.concatenate([np.ones(len(pos)), -np.ones(len(neg))])
    n, d = X.shape
    mu = X.mean(axis=0)
    Xa = np.hstack([X - mu, np.ones((n, 1))])
    q = np.einsum("ij,ij->i", Xa, Xa)
    alpha = np.zeros(n)
    w = np.zeros(d + 1)
    order = np.arange(n)
    rng = np.random.default_rng(0)
    for sweep in range(iterations):
        rng.shuffle(order)
        pg_max, pg_min = -np.inf, np.inf
        for i in order:
            g = y[i] * (w @ Xa[i]) - 1.0
            # projected gradient on the box [0, C]
            pg = min(g, 0.0) if alpha[i] == 0 else max(g, 0.0) if alpha[i] == C else g
            pg_max, pg_min = max(pg_max, pg), min(pg_min, pg)
            if pg != 0.0:
                old = alpha[i]
                alpha[i] = min(max(old - g / q[i], 0.0), C)
                w += (alpha[i] - old) * y[i] * Xa[i]
        if pg_max - pg_min < tol:
            break
    weights, b = w[:d], float(w[d])
    model = LinearSvmModel(weights, float(b - weights @ mu), descriptor_config)
    model.train_accuracy = float(np.mean(model.predict(X) == y))
    log.info("linear SVM trained in %d sweeps, accuracy %.4f", sweep + 1, model.train_accuracy)
    return model
