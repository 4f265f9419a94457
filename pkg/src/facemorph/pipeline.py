"""Batch orchestration: images or landmark files in, cohort report out.

Per image: pre-process, detect, crop with margin and resize, align on five
points, localise 68 landmarks, extract features. A landmark JSON file
stands in for stages 1-4 of the image sharing its file stem. Failures are
recorded per file and never abort the run.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import align as _align
from .cohortstats import Cohort, CohortReport, compare_cohorts
from .facedetect import cascade_detect, hog_scan, load_cascade, load_svm
from .imgcore import BoundingBox, crop_with_margin, integral_image, load_image, preprocess, resize, to_grayscale
from .morphometrics import DEFAULT_MAP, LandmarkIndexMap, extract_features
from .shaperegress import (LandmarkSet, box_around, load_landmarks, load_model, predict_shape,
                           save_landmarks)

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png"}
DETECTORS = ("haar", "hog", "external-bbox")


class CohortTooSmall(ValueError):
    pass


class PipelineError(ValueError):
    """Per-image failure with a machine-readable ``reason``."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail


@dataclass
class PipelineConfig:
    margin: int = 30
    work_size: int = 600
    detector: str = "external-bbox"
    bbox: BoundingBox | None = None
    cascade_model: str | None = None
    svm_model: str | None = None
    shape5_model: str | None = None
    shape68_model: str | None = None
    landmark_map: dict = field(default_factory=dict)
    median_radius: int = 1
    median_first: bool = False
    equal_var: bool = False
    out_dir: str | None = None
    haar_scales: list = field(default_factory=lambda: [1.0, 1.5, 2.0, 3.0, 4.0])
    haar_step: int = 4
    hog_scales: list = field(default_factory=lambda: [1.0, 1.5, 2.0, 3.0, 4.0, 6.0])
    hog_stride: int = 8
    label_a: str = "PTHS"
    label_b: str = "control"
    min_cohort: int = 2
    landmarks_only: bool = False
    train: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError("margin must be >= 0")
        if self.detector not in DETECTORS:
            raise ValueError(f"detector must be one of {DETECTORS}")
        if isinstance(self.bbox, (list, tuple)):
            self.bbox = BoundingBox(*self.bbox)
        elif isinstance(self.bbox, str):
            self.bbox = BoundingBox.parse(self.bbox)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    @property
    def index_map(self) -> LandmarkIndexMap:
        return LandmarkIndexMap.from_dict(self.landmark_map) if self.landmark_map else DEFAULT_MAP

    def check_models(self):
        """Every model path needed by an enabled stage must exist."""
        needed = {"shape68_model": self.shape68_model}
        if self.detector == "haar":
            needed["cascade_model"] = self.cascade_model
        if self.detector == "hog":
            needed["svm_model"] = self.svm_model
        for key in ("svm_model", "shape5_model"):
            if getattr(self, key):
                needed[key] = getattr(self, key)
        for key, path in needed.items():
            if not path:
                raise ValueError(f"{key} is required for the image path")
            if not Path(path).exists():
                raise FileNotFoundError(f"{key} not found: {path}")


class Models:
    """Lazily loaded, read-only models shared by all images of a run."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self._cache = {}

    def _get(self, key, loader):
        path = getattr(self.config, key)
        if not path:
            return None
        if key not in self._cache:
            self._cache[key] = loader(path)
        return self._cache[key]

    @property
    def cascade(self):
        return self._get("cascade_model", load_cascade)

    @property
    def svm(self):
        return self._get("svm_model", load_svm)

    @property
    def shape5(self):
        return self._get("shape5_model", load_model)

    @property
    def shape68(self):
        return self._get("shape68_model", load_model)


@dataclass
class ImageRecord:
    cohort: str
    path: str
    status: str = "pending"
    stages: dict = field(default_factory=dict)
    bbox: list | None = None
    landmark_path: str | None = None
    features: dict | None = None
    reason: str | None = None
    detail: str | None = None

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("cohort", "path", "status", "stages", "bbox", "landmark_path", "features", "reason", "detail")}


@dataclass
class RunManifest:
    records: list[ImageRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"records": [r.to_dict() for r in self.records]}

    def failed(self) -> list[ImageRecord]:
        return [r for r in self.records if r.status == "failed"]


# --------------------------------------------------------------------------
# single image
# --------------------------------------------------------------------------

def _map_box(box: BoundingBox, t: _align.SimilarityTransform) -> BoundingBox:
    corners = np.array([[box.x, box.y], [box.x1, box.y], [box.x, box.y1], [box.x1, box.y1]], dtype=np.float64)
    return box_around(_align.map_points(t, corners), pad=0.0)


def _detect(pre: np.ndarray, config: PipelineConfig, models: Models, stages: dict) -> BoundingBox:
    h, w = pre.shape
    if config.detector == "external-bbox":
        stages["detect"] = "external"
        return config.bbox or BoundingBox(0, 0, w, h)
    if config.detector == "haar":
        hits = cascade_detect(integral_image(pre), models.cascade, config.haar_scales, config.haar_step)
    else:
        hits = hog_scan(pre, models.svm, config.hog_stride, config.hog_scales)
    if not hits:
        raise PipelineError("no_face_detected", config.detector)
    if len(hits) > 1:
        log.info("%d extra detections ignored: %s", len(hits) - 1, [b.as_list() for b, _ in hits[1:]])
    stages["detect"] = f"{config.detector}:{len(hits)}"
    return hits[0][0]


def localize(img: np.ndarray, config: PipelineConfig, models: Models, stages: dict | None = None):
    """Stages 1-4 for one image.

    Returns the 68-point LandmarkSet in the aligned working frame and the
    face box used for localisation in that frame.
    """
    stages = {} if stages is None else stages
    gray = to_grayscale(img)
    try:
        pre = preprocess(gray, config.median_radius, config.median_first)
    except ValueError as exc:
        raise PipelineError("preprocess_failed", str(exc)) from exc
    stages["preprocess"] = "ok"

    box = _detect(pre, config, models, stages)
    try:
        crop, region = crop_with_margin(pre, box, config.margin)
    except ValueError as exc:
        raise PipelineError("crop_failed", str(exc)) from exc
    size = config.work_size
    frame = resize(crop, size, size)
    sx, sy = size / region.w, size / region.h
    face = BoundingBox.from_corners(
        round((box.x - region.x) * sx), round((box.y - region.y) * sy),
        round((box.x1 - region.x) * sx), round((box.y1 - region.y) * sy))
    stages["crop"] = "ok"

    if config.detector == "haar" and models.svm is not None:
        hits = hog_scan(frame, models.svm, config.hog_stride, config.hog_scales)
        if hits:
            face = hits[0][0]
            stages["refine"] = "hog"
        else:
            stages["refine"] = "no_hog_hit"

    if models.shape5 is not None:
        five = predict_shape(frame, face, models.shape5)
        try:
            frame, t = _align.align_face(frame, _align.FivePointLandmarks.from_points(five.points), size)
        except ValueError as exc:
            raise PipelineError("align_failed", str(exc)) from exc
        face = _map_box(face, t)
        stages["align"] = "ok"
    else:
        stages["align"] = "skipped"

    if models.shape68 is None:
        raise PipelineError("no_landmark_model")
    lm = predict_shape(frame, face, models.shape68)
    stages["landmarks"] = "ok"
    return lm, face


# --------------------------------------------------------------------------
# batch
# --------------------------------------------------------------------------

def _features_or_fail(lm: LandmarkSet, config: PipelineConfig, record: ImageRecord):
    if lm.scheme != "68pt":
        raise PipelineError("wrong_scheme", lm.scheme)
    try:
        fv = extract_features(lm, config.index_map)
    except ValueError as exc:
        raise PipelineError("degenerate_geometry", str(exc)) from exc
    record.stages["features"] = "ok"
    record.features = fv.to_dict()
    return fv


def _process_dir(directory: Path, label: str, config: PipelineConfig, models: Models,
                 manifest: RunManifest, out_dir: Path | None):
    if not directory.is_dir():
        raise FileNotFoundError(f"cohort directory not found: {directory}")
    files = sorted(p for p in directory.iterdir() if p.is_file())
    stems_with_json = {p.stem for p in files if p.suffix.lower() == ".json"}
    features, shapes = [], []
    for path in files:
        rec = ImageRecord(label, str(path))
        manifest.records.append(rec)
        suffix = path.suffix.lower()
        try:
            if suffix == ".json":
                try:
                    lm, box = load_landmarks(path)
                except (ValueError, KeyError, TypeError) as exc:
                    raise PipelineError("bad_landmark_file", str(exc)) from exc
                rec.stages["landmarks"] = "from_file"
                rec.landmark_path = str(path)
                rec.bbox = box.as_list() if box else None
            elif suffix in IMAGE_SUFFIXES:
                if path.stem in stems_with_json:
                    rec.status = "skipped"
                    rec.reason = "landmarks_supplied"
                    rec.detail = path.with_suffix(".json").name
                    continue
                if config.landmarks_only:
                    rec.status = "skipped"
                    rec.reason = "landmarks_only"
                    continue
                try:
                    img = load_image(path)
                except Exception as exc:  # any decoder failure
                    raise PipelineError("decode_error", f"{type(exc).__name__}: {exc}") from exc
                lm, box = localize(img, config, models, rec.stages)
                rec.bbox = box.as_list()
                if out_dir is not None:
                    lm_dir = out_dir / "landmarks" / label
                    lm_dir.mkdir(parents=True, exist_ok=True)
                    save_landmarks(lm, lm_dir / f"{path.stem}.json", box)
                    rec.landmark_path = str(Path("landmarks") / label / f"{path.stem}.json")
            else:
                raise PipelineError("unsupported_format", suffix or "no suffix")
            fv = _features_or_fail(lm, config, rec)
        except PipelineError as exc:
            rec.status = "failed"
            rec.reason = exc.reason
            rec.detail = exc.detail or None
            log.warning("%s: %s", path, exc)
            continue
        rec.status = "ok"
        features.append(fv)
        shapes.append(lm)
    if len(features) < config.min_cohort:
        raise CohortTooSmall(f"cohort too small: {label!r} has {len(features)} usable inputs in {directory}")
    return Cohort(label, features, shapes)


def run_pipeline(cohort_a, cohort_b, config: PipelineConfig = PipelineConfig()):
    """Process two cohort directories and compare them.

    Writes all report files when ``config.out_dir`` is set. Returns the
    report and the manifest.
    """
    dir_a, dir_b = Path(cohort_a), Path(cohort_b)
    out_dir = Path(config.out_dir) if config.out_dir else None
    models = Models(config)
    manifest = RunManifest()
    needs_images = not config.landmarks_only and any(
        p.suffix.lower() in IMAGE_SUFFIXES and not p.with_suffix(".json").exists()
        for d in (dir_a, dir_b) if d.is_dir() for p in d.iterdir())
    if needs_images:
        config.check_models()
    a = _process_dir(dir_a, config.label_a, config, models, manifest, out_dir)
    b = _process_dir(dir_b, config.label_b, config, models, manifest, out_dir)
    report = compare_cohorts(a, b, equal_var=config.equal_var)
    if out_dir is not None:
        export_reports(report, manifest, out_dir)
    return report, manifest


# --------------------------------------------------------------------------
# export
# --------------------------------------------------------------------------

def _num(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def table1_csv(report: CohortReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["feature", "p_value", "t", "df", "n_a", "mean_a", "sd_a", "n_b", "mean_b", "sd_b", "error"])
    for r in report.rows:
        t = r.test
        w.writerow([r.label, _num(t and t.p), _num(t and t.t), _num(t and t.df),
                    report.n_a, _num(r.mean_a), _num(r.sd_a), report.n_b, _num(r.mean_b), _num(r.sd_b),
                    r.error or ""])
    return buf.getvalue()


def boxplots_tsv(report: CohortReport) -> str:
    cols = ["feature", "cohort", "n", "min", "whisker_low", "q1", "median", "q3", "whisker_high", "max", "outliers"]
    lines = ["\t".join(cols)]
    for r in report.rows:
        for label, n, box in ((report.label_a, report.n_a, r.box_a), (report.label_b, report.n_b, r.box_b)):
            if box is None:
                continue
            vals = [box.minimum, box.whisker_low, box.q1, box.median, box.q3, box.whisker_high, box.maximum]
            lines.append("\t".join([r.label, label, str(n)] + [_num(v) for v in vals]
                                   + [";".join(_num(v) for v in box.outliers)]))
    return "\n".join(lines) + "\n"


def meanface_json(report: CohortReport) -> str | None:
    if report.mean_face_a is None or report.mean_face_b is None:
        return None
    d = {
        "cohorts": [
            {"label": report.label_a, "n": report.n_a, **report.mean_face_a.to_dict()},
            {"label": report.label_b, "n": report.n_b, **report.mean_face_b.to_dict()},
        ]
    }
    return json.dumps(d, indent=1) + "\n"


def export_reports(report: CohortReport, manifest: RunManifest, directory) -> list[Path]:
    """Write table1.csv, boxplots.tsv, meanface.json (when mean faces exist) and manifest.json."""
    directory = Path(directory)
    files = {
        "table1.csv": table1_csv(report),
        "boxplots.tsv": boxplots_tsv(report),
        "meanface.json": meanface_json(report),
        "manifest.json": json.dumps(manifest.to_dict(), indent=1, sort_keys=True) + "\n",
    }
    written = []
    try:
        directory.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            if text is None:
                continue
            path = directory / name
            path.write_text(text)
            written.append(path)
    except OSError as exc:
        raise OSError(f"cannot write reports to {directory}: {exc}") from exc
    return written
