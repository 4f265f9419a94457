"""Command line entry point: ``analyze``, ``train-shape`` and ``extract``.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .imgcore import BoundingBox, load_image
from .morphometrics import extract_features
from .pipeline import IMAGE_SUFFIXES, Models, PipelineConfig, localize, run_pipeline
from .shaperegress import TrainConfig, box_around, load_landmarks, save_model, train_shape_model

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _bbox(text: str) -> BoundingBox:
    try:
        return BoundingBox.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="facemorph", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="compare two cohorts of face images or landmark files")
    a.add_argument("--cohort-a", required=True, type=Path)
    a.add_argument("--cohort-b", required=True, type=Path)
    a.add_argument("--config", type=Path)
    a.add_argument("--bbox", type=_bbox, help="x,y,w,h face box; bypasses detection")
    a.add_argument("--landmarks-only", action="store_true", help="use landmark JSON files only")
    a.add_argument("--out", required=True, type=Path)

    t = sub.add_parser("train-shape", help="train a landmark regression cascade")
    t.add_argument("--data", required=True, type=Path,
                   help="directory of images with same-stem landmark JSON files")
    t.add_argument("--config", type=Path)
    t.add_argument("--out", required=True, type=Path)

    e = sub.add_parser("extract", help="localise landmarks and features on one image")
    e.add_argument("--image", required=True, type=Path)
    e.add_argument("--config", type=Path)
    e.add_argument("--bbox", type=_bbox)
    e.add_argument("--out", required=True, type=Path)
    return p


def _config(args) -> PipelineConfig:
    config = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if getattr(args, "bbox", None) is not None:
        config.bbox = args.bbox
        config.detector = "external-bbox"
    TrainConfig(**config.train)
    return config


def cmd_analyze(args, config: PipelineConfig) -> int:
    config.out_dir = str(args.out)
    if args.landmarks_only:
        config.landmarks_only = True
    report, manifest = run_pipeline(args.cohort_a, args.cohort_b, config)
    for r in report.rows:
        p = f"{r.test.p:.4g}" if r.test else f"n/a ({r.error})"
        print(f"{r.label:10s} p = {p}")
    failed = manifest.failed()
    if failed:
        print(f"{len(failed)} input(s) failed; see {args.out / 'manifest.json'}", file=sys.stderr)
    return EXIT_OK


def cmd_train_shape(args, config: PipelineConfig) -> int:
    data = []
    for lm_path in sorted(args.data.glob("*.json")):
        images = sorted(p for p in args.data.glob(lm_path.stem + ".*") if p.suffix.lower() in IMAGE_SUFFIXES)
        if not images:
            continue
        lm, box = load_landmarks(lm_path)
        data.append((load_image(images[0]), box or box_around(lm.points, pad=0.1), lm))
    model = train_shape_model(data, TrainConfig(**config.train))
    save_model(model, args.out)
    print(f"trained on {len(data)} examples; stage losses {['%.4g' % v for v in model.train_loss]}")
    return EXIT_OK


def cmd_extract(args, config: PipelineConfig) -> int:
    config.check_models()
    lm, box = localize(load_image(args.image), config, Models(config))
    out = lm.to_dict()
    out["bbox"] = box.as_list()
    if lm.scheme == "68pt":
        out["features"] = extract_features(lm, config.index_map).to_dict()
    args.out.write_text(json.dumps(out) + "\n")
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "train-shape": cmd_train_shape, "extract": cmd_extract}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _config(args)
    except (OSError, ValueError, TypeError) as exc:
        print(f"facemorph: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, config)
    except (OSError, ValueError, TypeError, KeyError) as exc:
        print(f"facemorph: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
