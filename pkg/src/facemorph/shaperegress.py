"""Landmark localisation with a cascade of boosted regression-tree ensembles.

Shapes are handled in box-normalised coordinates: ``(u, v)`` in the unit
square maps to ``(box.x + u*box.w, box.y + v*box.h)``. Each cascade stage
samples a fixed set of pixels anchored to the current shape estimate and
refines the estimate with a sum of regression trees that split on the
difference of two sampled intensities.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from .imgcore import BoundingBox, to_grayscale

log = logging.getLogger(__name__)

SCHEMES = {"5pt": 5, "68pt": 68}


# --------------------------------------------------------------------------
# Landmark sets
# --------------------------------------------------------------------------

@dataclass
class LandmarkSet:
    scheme: str
    points: np.ndarray

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if len(self.points) != SCHEMES[self.scheme]:
            raise ValueError(f"{self.scheme} needs {SCHEMES[self.scheme]} points, got {len(self.points)}")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("landmark coordinates must be finite")

    def __len__(self):
        return len(self.points)

    def to_dict(self) -> dict:
        return {"scheme": self.scheme, "points": [[float(x), float(y)] for x, y in self.points]}

    @classmethod
    def from_dict(cls, d: dict) -> "LandmarkSet":
        return cls(d["scheme"], np.asarray(d["points"], dtype=np.float64))


def save_landmarks(lm: LandmarkSet, path, bbox: BoundingBox | None = None) -> Path:
    d = lm.to_dict()
    if bbox is not None:
        d["bbox"] = bbox.as_list()
    path = Path(path)
    path.write_text(json.dumps(d) + "\n")
    return path


def load_landmarks(path) -> tuple[LandmarkSet, BoundingBox | None]:
    """Read a landmark file; returns the set and its optional face box."""
    d = json.loads(Path(path).read_text())
    box = BoundingBox(*d["bbox"]) if d.get("bbox") else None
    return LandmarkSet.from_dict(d), box


def mean_shape(shapes: Sequence[LandmarkSet]) -> LandmarkSet:
    """Per-landmark arithmetic mean of shapes sharing one scheme."""
    if not shapes:
        raise ValueError("need at least one shape")
    schemes = {s.scheme for s in shapes}
    if len(schemes) != 1:
        raise ValueError("scheme mismatch")
    return LandmarkSet(shapes[0].scheme, np.mean([s.points for s in shapes], axis=0))


def to_box(norm: np.ndarray, box: BoundingBox) -> np.ndarray:
    return np.column_stack([box.x + norm[:, 0] * box.w, box.y + norm[:, 1] * box.h])


def from_box(pts: np.ndarray, box: BoundingBox) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.float64)
    return np.column_stack([(pts[:, 0] - box.x) / box.w, (pts[:, 1] - box.y) / box.h])


def box_around(pts: np.ndarray, pad: float = 0.1) -> BoundingBox:
    """Integer box enclosing ``pts`` with ``pad`` of its size added per side."""
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    ext = hi - lo
    x0, y0 = np.floor(lo - pad * ext).astype(int)
    x1, y1 = np.ceil(hi + pad * ext).astype(int)
    return BoundingBox(int(x0), int(y0), max(int(x1 - x0), 1), max(int(y1 - y0), 1))


# --------------------------------------------------------------------------
# Model
# --------------------------------------------------------------------------

@dataclass
class RegressionTree:
    """Complete binary tree in heap order.

    Internal node ``i`` sends a sample left (child ``2i+1``) when
    ``I[feat_a[i]] - I[feat_b[i]] > thresh[i]``. ``leaves`` has shape
    ``(2**depth, n_points, 2)``.
    """

    feat_a: np.ndarray
    feat_b: np.ndarray
    thresh: np.ndarray
    leaves: np.ndarray

    @property
    def depth(self) -> int:
        return int(np.log2(len(self.leaves)))

    def leaf_index(self, intensities: np.ndarray) -> np.ndarray:
        """Leaf reached by each row of an (N, P) intensity matrix."""
        intensities = np.atleast_2d(intensities)
        node = np.zeros(len(intensities), dtype=np.intp)
        rows = np.arange(len(intensities))
        for _ in range(self.depth):
            diff = intensities[rows, self.feat_a[node]] - intensities[rows, self.feat_b[node]]
            node = np.where(diff > self.thresh[node], 2 * node + 1, 2 * node + 2)
        return node - (len(self.leaves) - 1)

    def to_dict(self) -> dict:
        return {
            "splits": [[int(a), int(b), float(t)] for a, b, t in zip(self.feat_a, self.feat_b, self.thresh)],
            "leaves": self.leaves.reshape(len(self.leaves), -1).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict, n_points: int) -> "RegressionTree":
        splits = d["splits"]
        return cls(
            np.array([s[0] for s in splits], dtype=np.intp),
            np.array([s[1] for s in splits], dtype=np.intp),
            np.array([s[2] for s in splits], dtype=np.float64),
            np.asarray(d["leaves"], dtype=np.float64).reshape(-1, n_points, 2),
        )


@dataclass
class Stage:
    """Pixel anchors (landmark index + offset in mean-shape units) and trees."""

    anchor_landmark: np.ndarray
    anchor_offset: np.ndarray
    trees: list[RegressionTree]

    def to_dict(self) -> dict:
        return {
            "anchors": [[int(k), float(dx), float(dy)]
                        for k, (dx, dy) in zip(self.anchor_landmark, self.anchor_offset)],
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict, n_points: int) -> "Stage":
        anchors = d["anchors"]
        return cls(
            np.array([a[0] for a in anchors], dtype=np.intp),
            np.array([[a[1], a[2]] for a in anchors], dtype=np.float64).reshape(-1, 2),
            [RegressionTree.from_dict(t, n_points) for t in d["trees"]],
        )


@dataclass
class ShapeModel:
    scheme: str
    mean_shape: np.ndarray
    nu: float = 0.1
    stages: list[Stage] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)

    @property
    def n_points(self) -> int:
        return len(self.mean_shape)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "mean_shape": self.mean_shape.tolist(),
            "nu": self.nu,
            "stages": [s.to_dict() for s in self.stages],
            "train_loss": list(self.train_loss),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ShapeModel":
        mean = np.asarray(d["mean_shape"], dtype=np.float64)
        return cls(
            d["scheme"],
            mean,
            float(d["nu"]),
            [Stage.from_dict(s, len(mean)) for s in d["stages"]],
            list(d.get("train_loss", [])),
        )


def save_model(model: ShapeModel, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(model.to_dict()))
    return path


def load_model(path) -> ShapeModel:
    return ShapeModel.from_dict(json.loads(Path(path).read_text()))


# --------------------------------------------------------------------------
# Pixel sampling
# --------------------------------------------------------------------------

def similarity_to(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """2x2 rotation-and-scale matrix best mapping centred ``src`` onto centred ``dst``."""
    a = src - src.mean(axis=0)
    b = dst - dst.mean(axis=0)
    denom = np.sum(a * a)
    if denom == 0:
        return np.eye(2)
    c = np.sum(a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1]) / denom
    s = np.sum(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]) / denom
    return np.array([[c, -s], [s, c]])


def anchor_positions(shape_norm: np.ndarray, mean_norm: np.ndarray,
                     anchor_landmark: np.ndarray, anchor_offset: np.ndarray) -> np.ndarray:
    """Normalised positions of the anchors on the current shape estimate."""
    A = similarity_to(mean_norm, shape_norm)
    return shape_norm[anchor_landmark] + anchor_offset @ A.T


def sample_indexed_pixels(img: np.ndarray, box: BoundingBox, shape_norm: np.ndarray, mean_norm: np.ndarray,
                          anchor_landmark: np.ndarray, anchor_offset: np.ndarray) -> np.ndarray:
    """Nearest-pixel intensities at the anchors; reads outside the image give 0."""
    pos = anchor_positions(shape_norm, mean_norm, anchor_landmark, anchor_offset)
    # box corner is integral, so shifting box and image together reads the same pixels
    xi = box.x + np.floor(pos[:, 0] * box.w + 0.5).astype(np.intp)
    yi = box.y + np.floor(pos[:, 1] * box.h + 0.5).astype(np.intp)
    h, w = img.shape[:2]
    inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
    out = np.zeros(len(pos), dtype=np.float64)
    out[inside] = img[yi[inside], xi[inside]]
    return out


# --------------------------------------------------------------------------
# Inference
# --------------------------------------------------------------------------

def predict_normalized(img: np.ndarray, box: BoundingBox, model: ShapeModel) -> np.ndarray:
    img = to_grayscale(img)
    shape = model.mean_shape.copy()
    for stage in model.stages:
        x = sample_indexed_pixels(img, box, shape, model.mean_shape, stage.anchor_landmark, stage.anchor_offset)
        delta = np.zeros_like(shape)
        for tree in stage.trees:
            delta += tree.leaves[tree.leaf_index(x[None])[0]]
        shape = shape + model.nu * delta
    return shape


def predict_shape(img: np.ndarray, box: BoundingBox, model: ShapeModel) -> LandmarkSet:
    """Run the cascade from the mean shape placed in ``box``."""
    return LandmarkSet(model.scheme, to_box(predict_normalized(img, box, model), box))


# --------------------------------------------------------------------------
# Training
# --------------------------------------------------------------------------

@dataclass
class TrainConfig:
    stages: int = 10
    trees: int = 500
    depth: int = 4
    nu: float = 0.1
    pool_size: int = 400
    lam: float = 0.1
    candidates: int = 20
    oversampling: int = 20
    seed: int = 0

    @classmethod
    def desk(cls, **kw) -> "TrainConfig":
        """Small configuration that trains in seconds."""
        base = dict(stages=5, trees=50, pool_size=64)
        base.update(kw)
        return cls(**base)

    def to_dict(self) -> dict:
        return asdict(self)


def _pair_weights(pos_px: np.ndarray, lam: float) -> np.ndarray:
    d = np.sqrt(np.sum((pos_px[:, None, :] - pos_px[None, :, :]) ** 2, axis=-1))
    wgt = np.exp(-lam * d)
    np.fill_diagonal(wgt, 0.0)
    return (wgt / wgt.sum()).ravel()


def _grow_tree(X, R, depth, pair_p, n_pool, n_candidates, rng):
    """Greedy variance-reduction tree on intensities ``X`` (N, P) and residuals ``R`` (N, 2n)."""
    n_internal = 2 ** depth - 1
    feat_a = np.zeros(n_internal, dtype=np.intp)
    feat_b = np.zeros(n_internal, dtype=np.intp)
    thresh = np.zeros(n_internal)
    node_of = np.zeros(len(X), dtype=np.intp)
    for i in range(n_internal):
        idx = np.flatnonzero(node_of == i)
        pairs = rng.choice(len(pair_p), size=n_candidates, p=pair_p)
        a, b = np.divmod(pairs, n_pool)
        if len(idx) == 0:
            feat_a[i], feat_b[i], thresh[i] = a[0], b[0], 0.0
            continue
        D = X[idx][:, a] - X[idx][:, b]
        # thresholds drawn from the differences observed in this node
        tau = D[rng.integers(0, len(idx), size=n_candidates), np.arange(n_candidates)]
        tau = tau - rng.uniform(0.0, 1.0, size=n_candidates)
        left = D > tau
        Ri = R[idx]
        n_l = left.sum(axis=0)
        n_r = len(idx) - n_l
        s_l = left.T.astype(np.float64) @ Ri
        s_r = Ri.sum(axis=0) - s_l
        with np.errstate(divide="ignore", invalid="ignore"):
            score = np.where(n_l > 0, np.sum(s_l ** 2, axis=1) / n_l, 0.0)
            score += np.where(n_r > 0, np.sum(s_r ** 2, axis=1) / n_r, 0.0)
        best = int(np.argmax(score))
        feat_a[i], feat_b[i], thresh[i] = a[best], b[best], tau[best]
        go_left = left[:, best]
        node_of[idx[go_left]] = 2 * i + 1
        node_of[idx[~go_left]] = 2 * i + 2
    leaf = node_of - n_internal
    n_leaves = 2 ** depth
    leaves = np.zeros((n_leaves, R.shape[1]))
    counts = np.bincount(leaf, minlength=n_leaves)
    np.add.at(leaves, leaf, R)
    nz = counts > 0
    leaves[nz] /= counts[nz, None]
    return (feat_a, feat_b, thresh, leaves), leaf


def train_shape_model(dataset: Sequence[tuple[np.ndarray, BoundingBox, LandmarkSet]],
                      config: TrainConfig = TrainConfig()) -> ShapeModel:
    """Fit a regression cascade to (image, face box, landmarks) triples.

    Each stage samples ``pool_size`` pixels around the mean shape, indexed
    to their nearest mean landmark, then fits ``trees`` trees to the
    current residuals. Split pixel pairs are drawn with probability
    proportional to ``exp(-lam * distance)``, distance measured in pixels of
    the mean shape at the average training box size.
    """
    if len(dataset) < 2:
        raise ValueError("insufficient data")
    schemes = {lm.scheme for _, _, lm in dataset}
    if len(schemes) != 1:
        raise ValueError("scheme mismatch")
    scheme = schemes.pop()
    rng = np.random.default_rng(config.seed)

    images = [to_grayscale(img) for img, _, _ in dataset]
    boxes = [box for _, box, _ in dataset]
    targets = np.stack([from_box(lm.points, box) for _, box, lm in dataset])
    n_pts = targets.shape[1]
    mean = targets.mean(axis=0)
    ref_size = float(np.mean([(b.w + b.h) / 2.0 for b in boxes]))

    # oversampling: extra copies start from other examples' shapes
    sample_of = np.repeat(np.arange(len(dataset)), config.oversampling)
    current = np.repeat(mean[None], len(sample_of), axis=0)
    for j in range(len(sample_of)):
        if j % config.oversampling:
            other = rng.integers(0, len(dataset) - 1)
            other += other >= sample_of[j]
            current[j] = targets[other]
    goal = targets[sample_of]

    lo = mean.min(axis=0)
    hi = mean.max(axis=0)
    ext = hi - lo
    lo, hi = lo - 0.1 * ext, hi + 0.1 * ext

    def loss(cur):
        return float(np.mean(np.sum((goal - cur) ** 2, axis=-1)))

    model = ShapeModel(scheme, mean, config.nu)
    model.train_loss.append(loss(current))
    for t in range(config.stages):
        pos = rng.uniform(lo, hi, size=(config.pool_size, 2))
        nearest = np.argmin(np.sum((pos[:, None, :] - mean[None]) ** 2, axis=-1), axis=1)
        offset = pos - mean[nearest]
        pair_p = _pair_weights(pos * ref_size, config.lam)

        X = np.stack([
            sample_indexed_pixels(images[s], boxes[s], current[j], mean, nearest, offset)
            for j, s in enumerate(sample_of)
        ])
        residual = (goal - current).reshape(len(goal), -1)
        trees = []
        for _ in range(config.trees):
            (fa, fb, th, leaves), leaf = _grow_tree(X, residual, config.depth, pair_p,
                                                    config.pool_size, config.candidates, rng)
            residual = residual - config.nu * leaves[leaf]
            trees.append(RegressionTree(fa, fb, th, leaves.reshape(len(leaves), n_pts, 2)))
        current = goal - residual.reshape(goal.shape)
        model.stages.append(Stage(nearest, offset, trees))
        model.train_loss.append(loss(current))
        log.info("stage %d/%d: train loss %.6g", t + 1, config.stages, model.train_loss[-1])
    return model
