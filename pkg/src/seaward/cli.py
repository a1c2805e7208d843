"""Command-line surface: synth, classify, segment, detect, eval, ablate.

Each pipeline stage is independently invokable and file-mediated, so every
intermediate product (scene labels, masks, detections) can be inspected or
swapped. Exit codes: 0 success, 1 missing/broken input or unwritable output,
2 bad configuration or usage. All outputs are written atomically (temp file
plus rename) and are byte-identical across reruns with the same seeds.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import re
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import attention, backbone, imagery, metrics, otsu, scenes, synth
from .detector import Detection, DetectorConfig, detect
from .errors import ConfigError, SeawardError

_IMG_KEY = re.compile(r"^img_(\d+)\.(pgm|png)$")


@dataclass
class PipelineConfig:
    seed: int = 0
    backbone_weights: str | None = None
    suppression_weights: str | None = None
    score_threshold: float = DetectorConfig.score_threshold
    nms_iou: float = DetectorConfig.nms_iou
    level: int = DetectorConfig.level
    min_area: int = DetectorConfig.min_area
    fixed_lambda: float | None = None
    clamp_lambda_nonneg: bool = False
    invert_polarity: bool = False
    no_kmeans: bool = False

    def detector_config(self) -> DetectorConfig:
        try:
            return DetectorConfig(self.score_threshold, self.nms_iou,
                                  self.level, self.min_area)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


_CONFIG_PARSERS = {
    "seed": int,
    "backbone_weights": str,
    "suppression_weights": str,
    "score_threshold": float,
    "nms_iou": float,
    "level": int,
    "min_area": int,
    "fixed_lambda": float,
    "clamp_lambda_nonneg": _parse_bool,
    "invert_polarity": _parse_bool,
    "no_kmeans": _parse_bool,
}


def load_config(path) -> PipelineConfig:
    """Parse a key=value config file; unknown keys and bad values are rejected."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"no such config file: {path}")
    cfg = PipelineConfig()
    for ln, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_PARSERS:
            raise ConfigError(f"{path}:{ln}: unknown key {key!r}")
        try:
            setattr(cfg, key, _CONFIG_PARSERS[key](raw.strip()))
        except ValueError as exc:
            raise ConfigError(f"{path}:{ln}: bad value for {key}: {exc}") from exc
    cfg.detector_config()  # validate ranges now, not at first use
    return cfg


def _merge_args(cfg: PipelineConfig, args: argparse.Namespace) -> PipelineConfig:
    cfg = dataclasses.replace(cfg)
    for field in dataclasses.fields(PipelineConfig):
        cli_value = getattr(args, field.name, None)
        if cli_value is not None and cli_value is not False:
            setattr(cfg, field.name, cli_value)
    cfg.detector_config()
    return cfg


def _resolve_backbone(cfg: PipelineConfig) -> backbone.BackboneWeights:
    if cfg.backbone_weights:
        return backbone.load_weights(cfg.backbone_weights)
    packaged = resources.files("seaward").joinpath("data/backbone_default.w")
    if packaged.is_file():
        return backbone.load_weights(str(packaged))
    return backbone.default_weights()


def _resolve_suppression(cfg: PipelineConfig) -> attention.SuppressionWeights:
    if cfg.suppression_weights:
        return attention.load_suppression_weights(cfg.suppression_weights)
    return attention.default_suppression_weights()


def _sorted_images(dir_path: Path, pattern: str) -> list[Path]:
    if not dir_path.is_dir():
        raise ConfigError(f"no such image directory: {dir_path}")
    return sorted(dir_path.glob(pattern))


def image_key(value):
    """Join key for detection/ground-truth records: canonical image names and
    bare integer indices refer to the same image."""
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        m = _IMG_KEY.match(value)
        if m:
            return int(m.group(1))
        if value.isdigit():
            return int(value)
    return value


def _read_scenes_file(path: Path) -> list[tuple[str, str]]:
    if not path.is_file():
        raise ConfigError(f"no such scenes file: {path}")
    out = []
    for ln, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2 or parts[1] not in (scenes.INSHORE, scenes.OFFSHORE):
            raise ConfigError(f"{path}:{ln}: bad scene line {line!r}")
        name = parts[0]
        if name.isdigit():
            name = synth.image_name(int(name))
        out.append((name, parts[1]))
    return out


def _find_mask(masks_dir: Path, name: str) -> Path:
    candidates = [masks_dir / name]
    m = _IMG_KEY.match(name)
    if m:
        candidates.append(masks_dir / synth.mask_name(int(m.group(1))))
    for c in candidates:
        if c.is_file():
            return c
    raise ConfigError(f"no mask for {name} under {masks_dir}")


# --- subcommands -----------------------------------------------------------


def cmd_synth(cfg: PipelineConfig, args) -> int:
    template = synth.SceneSpec(
        width=args.width, height=args.height, n_ships=args.ships,
        speckle_looks=args.looks, seed=cfg.seed,
    )
    samples = synth.generate_dataset(template, args.n, args.inshore_fraction, cfg.seed)
    synth.write_dataset(samples, args.out)
    print(f"wrote {len(samples)} scenes to {args.out}")
    return 0


def cmd_classify(cfg: PipelineConfig, args) -> int:
    paths = _sorted_images(Path(args.images), args.pattern)
    images = [imagery.load_image(p) for p in paths]
    labels = scenes.classify_images(images, seed=cfg.seed)
    lines = [f"{p.name}\t{label}" for p, label in zip(paths, labels)]
    imagery.atomic_write_text(args.out, "".join(l + "\n" for l in lines))
    print(f"classified {len(paths)} images -> {args.out}")
    return 0


def cmd_segment(cfg: PipelineConfig, args) -> int:
    in_dir = Path(args.images)
    out_dir = Path(args.out)
    if out_dir.resolve() == in_dir.resolve():
        raise ConfigError("segment output directory must differ from the image directory")
    paths = _sorted_images(in_dir, args.pattern)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for p in paths:
        img = imagery.load_image(p)
        result = otsu.otsu_threshold(imagery.histogram(img))
        mask = otsu.segment(img, invert_polarity=cfg.invert_polarity)
        imagery.save_mask(mask, out_dir / p.name)
        rows.append(f"{p.name}\t{result.threshold}\t{int(result.no_separation)}")
    imagery.atomic_write_text(out_dir / "thresholds.tsv", "".join(r + "\n" for r in rows))
    print(f"segmented {len(paths)} images -> {out_dir}")
    return 0


def cmd_detect(cfg: PipelineConfig, args) -> int:
    bw = _resolve_backbone(cfg)
    sw = None if cfg.fixed_lambda is not None else _resolve_suppression(cfg)
    det_cfg = cfg.detector_config()
    scene_list = _read_scenes_file(Path(args.scenes))
    images_dir = Path(args.images)
    masks_dir = Path(args.masks) if args.masks else None
    lines = []
    for name, kind in scene_list:
        img = imagery.load_image(images_dir / name)
        inshore = cfg.no_kmeans or kind == scenes.INSHORE
        mask = None
        if inshore:
            if masks_dir is None:
                raise ConfigError("inshore scenes present but no --masks directory given")
            mask = imagery.load_mask(_find_mask(masks_dir, name))
        dets = detect(img, scenes.INSHORE if inshore else scenes.OFFSHORE, mask,
                      bw, sw, det_cfg, fixed_lambda=cfg.fixed_lambda,
                      clamp_nonneg=cfg.clamp_lambda_nonneg)
        for d in dets:
            lines.append(json.dumps({"image": name, "x": d.x, "y": d.y,
                                     "w": d.w, "h": d.h, "score": d.score}))
    imagery.atomic_write_text(args.out, "".join(l + "\n" for l in lines))
    print(f"wrote {len(lines)} detections -> {args.out}")
    return 0


def _read_detections_jsonl(path: Path) -> dict:
    if not path.is_file():
        raise ConfigError(f"no such detections file: {path}")
    dets: dict = {}
    for ln, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            d = Detection(int(rec["x"]), int(rec["y"]), int(rec["w"]),
                          int(rec["h"]), float(rec["score"]))
            dets.setdefault(image_key(rec["image"]), []).append(d)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{path}:{ln}: bad detection record ({exc})") from exc
    return dets


def _format_report(report: metrics.MetricsReport) -> str:
    rows = [("map", report.map), ("map50", report.map50), ("map75", report.map75),
            ("map_s", report.map_s), ("map_m", report.map_m), ("map_l", report.map_l)]
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {v:.6f}" for k, v in rows)


def cmd_eval(cfg: PipelineConfig, args) -> int:
    dets = _read_detections_jsonl(Path(args.detections))
    gt_boxes = synth.read_gt_jsonl(args.gt)
    gts = {image_key(i): [b for b in boxes if not b.on_land]
           for i, boxes in gt_boxes.items()}
    report = metrics.coco_map(dets, gts)
    imagery.atomic_write_text(args.out, json.dumps(report.as_dict(), indent=2) + "\n")
    print(_format_report(report))
    print(f"wrote metrics -> {args.out}")
    return 0


def cmd_ablate(cfg: PipelineConfig, args) -> int:
    samples = synth.read_dataset(args.dataset)
    bw = _resolve_backbone(cfg)
    sw = None if cfg.fixed_lambda is not None else _resolve_suppression(cfg)
    report = metrics.run_ablation(
        samples, bw, sw, cfg.detector_config(),
        fixed_lambda=cfg.fixed_lambda, clamp_nonneg=cfg.clamp_lambda_nonneg,
        invert_polarity=cfg.invert_polarity, seed=cfg.seed)
    lines = ["id\tkmeans\tmap\tmap50"]
    for i, row in enumerate(report.rows, 1):
        lines.append(f"{i}\t{'yes' if row.kmeans_gating else 'no'}"
                     f"\t{row.metrics.map:.6f}\t{row.metrics.map50:.6f}")
    imagery.atomic_write_text(args.out, "".join(l + "\n" for l in lines))
    print("\n".join(lines))
    return 0


# --- argument parsing ------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seaward",
        description="Scene-aware ship detection on SAR-style grayscale imagery.",
    )
    parser.add_argument("--config", help="key=value configuration file")
    parser.add_argument("--seed", type=int, help="master RNG seed")
    parser.add_argument("--fixed-lambda", type=float, dest="fixed_lambda",
                        help="bypass the learned suppression weight with a constant")
    parser.add_argument("--clamp-lambda-nonneg", action="store_true",
                        dest="clamp_lambda_nonneg",
                        help="floor the suppression weight at 0")
    parser.add_argument("--invert-polarity", action="store_true",
                        dest="invert_polarity",
                        help="swap sea/land classes in threshold masks (dark-sea imagery)")
    parser.add_argument("--backbone-weights", dest="backbone_weights",
                        help="backbone weight tensor file")
    parser.add_argument("--suppression-weights", dest="suppression_weights",
                        help="suppression weight tensor file")
    parser.add_argument("--score-threshold", type=float, dest="score_threshold")
    parser.add_argument("--nms-iou", type=float, dest="nms_iou")
    parser.add_argument("--level", type=int, help="pyramid level used for scoring")
    parser.add_argument("--min-area", type=int, dest="min_area")
    parser.add_argument("--no-kmeans", action="store_true", dest="no_kmeans",
                        help="ignore scene labels: mask and suppress every image")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset with ground truth")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=40)
    p.add_argument("--inshore-fraction", type=float, default=0.3,
                   dest="inshore_fraction")
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--ships", type=int, default=2)
    p.add_argument("--looks", type=int, default=4)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("classify", help="cluster images into inshore/offshore")
    p.add_argument("--images", required=True)
    p.add_argument("--pattern", default="img_*.pgm")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("segment", help="threshold images into sea-land masks")
    p.add_argument("--images", required=True)
    p.add_argument("--pattern", default="img_*.pgm")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("detect", help="run the detection pipeline")
    p.add_argument("--images", required=True)
    p.add_argument("--scenes", required=True)
    p.add_argument("--masks")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="score detections against ground truth")
    p.add_argument("--detections", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="compare scene-gated vs mask-everywhere")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)

    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else PipelineConfig()
        cfg = _merge_args(cfg, args)
    except ConfigError as exc:
        print(f"seaward: config error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"seaward: config error: {exc}", file=sys.stderr)
        return 2
    except SeawardError as exc:
        print(f"seaward: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"seaward: i/o error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
