"""Detection metrics and the scene-gating ablation harness.

Average precision follows the COCO conventions: greedy score-ordered
matching at a fixed IoU threshold, 101-point interpolated precision, the
headline mAP averaged over IoU 0.50:0.05:0.95, and size strata cut at 32^2
and 96^2 pixels of ground-truth box area. In a size stratum, ground truths
outside the stratum are "ignore" regions: detections matched to them are
excluded from scoring rather than counted as false positives.

Images with no ground truth score AP 1 with no detections and 0 otherwise
(synthetic offshore scenes can be ship-free, so the convention matters).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import otsu
from .attention import SuppressionWeights, suppress_pyramid
from .backbone import BackboneWeights, build_pyramid
from .detector import Detection, DetectorConfig, iou, nms, propose, score_map
from .scenes import INSHORE, classify_images
from .synth import SceneSample

IOU_SWEEP = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))
RECALL_POINTS = np.linspace(0.0, 1.0, 101)
SMALL_CUT = 32 * 32
LARGE_CUT = 96 * 96

GATING_KMEANS = "kmeans"  # masks + suppression only on cluster-labeled inshore
GATING_ALWAYS = "otsu_everywhere"  # masks + suppression on every image
GATING_OFF = "off"  # suppression disabled entirely


@dataclass
class MetricsReport:
    map: float
    map50: float
    map75: float
    map_s: float
    map_m: float
    map_l: float
    ap_per_threshold: list[float]

    def as_dict(self) -> dict:
        return {
            "map": self.map, "map50": self.map50, "map75": self.map75,
            "map_s": self.map_s, "map_m": self.map_m, "map_l": self.map_l,
            "ap_per_threshold": self.ap_per_threshold,
        }


@dataclass
class AblationRow:
    kmeans_gating: bool
    metrics: MetricsReport


@dataclass
class AblationReport:
    rows: list[AblationRow]


def _box_area(b) -> float:
    return float(b[2]) * float(b[3])


def _normalize_boxes(boxes) -> list[tuple[float, float, float, float]]:
    out = []
    for b in boxes:
        if hasattr(b, "x"):
            out.append((float(b.x), float(b.y), float(b.w), float(b.h)))
        else:
            x, y, w, h = b
            out.append((float(x), float(y), float(w), float(h)))
    return out


def _match(dets_by_image, gts_by_image, ignore_by_image, iou_thresh):
    """Score-ordered greedy matching.

    Returns (flags, n_gt): one True/False-per-kept-detection TP flag list in
    descending score order; detections whose best remaining overlap is an
    ignore box are dropped from scoring entirely.
    """
    keys = sorted(set(dets_by_image) | set(gts_by_image) | set(ignore_by_image),
                  key=repr)
    records = []  # (score, key, det index, box)
    for key in keys:
        for di, d in enumerate(dets_by_image.get(key, [])):
            box = (float(d.x), float(d.y), float(d.w), float(d.h))
            records.append((-d.score, repr(key), di, key, box))
    records.sort(key=lambda r: (r[0], r[1], r[2]))

    gts = {k: _normalize_boxes(gts_by_image.get(k, [])) for k in keys}
    ignores = {k: _normalize_boxes(ignore_by_image.get(k, [])) for k in keys}
    taken = {k: [False] * len(gts[k]) for k in keys}
    flags = []
    for _, _, _, key, box in records:
        best_iou, best_gi = 0.0, -1
        for gi, gt in enumerate(gts[key]):
            if taken[key][gi]:
                continue
            v = iou(box, gt)
            if v > best_iou:
                best_iou, best_gi = v, gi
        if best_gi >= 0 and best_iou >= iou_thresh:
            taken[key][best_gi] = True
            flags.append(True)
            continue
        if any(iou(box, ig) >= iou_thresh for ig in ignores[key]):
            continue  # matched an ignore region: excluded from scoring
        flags.append(False)
    n_gt = sum(len(v) for v in gts.values())
    return flags, n_gt


def _ap_from_flags(flags, n_gt) -> float:
    if n_gt == 0:
        return 1.0 if not flags else 0.0
    if not flags:
        return 0.0
    tp = np.cumsum([1.0 if f else 0.0 for f in flags])
    fp = np.cumsum([0.0 if f else 1.0 for f in flags])
    recall = tp / n_gt
    precision = tp / (tp + fp)
    ap = 0.0
    for r in RECALL_POINTS:
        mask = recall >= r - 1e-12
        ap += precision[mask].max() if mask.any() else 0.0
    return ap / len(RECALL_POINTS)


def average_precision(dets_by_image, gts_by_image, iou_thresh: float,
                      ignore_by_image=None) -> float:
    """101-point interpolated AP at one IoU threshold across a dataset."""
    flags, n_gt = _match(dets_by_image, gts_by_image, ignore_by_image or {}, iou_thresh)
    return _ap_from_flags(flags, n_gt)


def _stratum_split(gts_by_image, lo: float, hi: float):
    inside, outside = {}, {}
    for key, boxes in gts_by_image.items():
        norm = _normalize_boxes(boxes)
        inside[key] = [b for b in norm if lo <= _box_area(b) < hi]
        outside[key] = [b for b in norm if not lo <= _box_area(b) < hi]
    return inside, outside


def coco_map(dets_by_image, gts_by_image) -> MetricsReport:
    """mAP over the IoU sweep plus fixed-threshold and size-stratified APs."""
    per_threshold = [average_precision(dets_by_image, gts_by_image, t)
                     for t in IOU_SWEEP]
    strata = {}
    for name, (lo, hi) in {
        "s": (0.0, SMALL_CUT),
        "m": (SMALL_CUT, LARGE_CUT + 1.0),
        "l": (LARGE_CUT + 1.0, np.inf),
    }.items():
        inside, outside = _stratum_split(gts_by_image, lo, hi)
        aps = [average_precision(dets_by_image, inside, t, ignore_by_image=outside)
               for t in IOU_SWEEP]
        strata[name] = float(np.mean(aps))
    return MetricsReport(
        map=float(np.mean(per_threshold)),
        map50=per_threshold[0],
        map75=per_threshold[5],
        map_s=strata["s"],
        map_m=strata["m"],
        map_l=strata["l"],
        ap_per_threshold=per_threshold,
    )


def ship_ground_truth(samples: list[SceneSample]) -> dict[int, list]:
    """Per-image ship boxes; on-land clutter is not ship ground truth."""
    return {i: [b for b in s.boxes if not b.on_land] for i, s in enumerate(samples)}


def land_false_positives(dets_by_image, gts_by_image, masks_by_image,
                         iou_thresh: float = 0.5) -> int:
    """Detections that match no ship and whose center pixel is land."""
    count = 0
    for key, dets in dets_by_image.items():
        gts = _normalize_boxes(gts_by_image.get(key, []))
        mask = masks_by_image[key]
        taken = [False] * len(gts)
        for d in sorted(dets, key=lambda d: -d.score):
            box = (float(d.x), float(d.y), float(d.w), float(d.h))
            best_iou, best_gi = 0.0, -1
            for gi, gt in enumerate(gts):
                if taken[gi]:
                    continue
                v = iou(box, gt)
                if v > best_iou:
                    best_iou, best_gi = v, gi
            if best_gi >= 0 and best_iou >= iou_thresh:
                taken[best_gi] = True
                continue
            cy = min(int(d.y + d.h // 2), mask.shape[0] - 1)
            cx = min(int(d.x + d.w // 2), mask.shape[1] - 1)
            if mask[cy, cx] == 0:
                count += 1
    return count


def run_detection_passes(samples: list[SceneSample], gatings,
                         backbone_weights: BackboneWeights,
                         suppression_weights: SuppressionWeights | None,
                         config: DetectorConfig = DetectorConfig(),
                         fixed_lambda: float | None = None,
                         clamp_nonneg: bool = False,
                         invert_polarity: bool = False,
                         seed: int = 0) -> dict[str, dict[int, list[Detection]]]:
    """Detections per gating mode, sharing one pyramid build per image.

    Feature extraction dominates the runtime, so pyramids are computed once
    and each gating mode only redoes suppression and the cheap head.
    """
    labels = classify_images([s.image for s in samples], seed=seed)
    masks = [otsu.segment(s.image, invert_polarity=invert_polarity) for s in samples]
    strides = backbone_weights.level_strides
    results: dict[str, dict[int, list[Detection]]] = {g: {} for g in gatings}
    for i, sample in enumerate(samples):
        pyramid = build_pyramid(sample.image, backbone_weights)
        for gating in gatings:
            if gating == GATING_KMEANS:
                mask = masks[i] if labels[i] == INSHORE else None
            elif gating == GATING_ALWAYS:
                mask = masks[i]
            elif gating == GATING_OFF:
                mask = None
            else:
                raise ValueError(f"unknown gating mode {gating!r}")
            sup = suppress_pyramid(pyramid, mask, suppression_weights,
                                   fixed_lambda=fixed_lambda,
                                   clamp_nonneg=clamp_nonneg)
            scores = score_map(sup[config.level])
            dets = nms(propose(scores, config, strides[config.level]), config.nms_iou)
            results[gating][i] = dets
    return results


def run_ablation(samples: list[SceneSample],
                 backbone_weights: BackboneWeights,
                 suppression_weights: SuppressionWeights | None,
                 config: DetectorConfig = DetectorConfig(),
                 fixed_lambda: float | None = None,
                 clamp_nonneg: bool = False,
                 invert_polarity: bool = False,
                 seed: int = 0) -> AblationReport:
    """Two-row comparison: scene-gated suppression vs masks-everywhere."""
    passes = run_detection_passes(
        samples, (GATING_KMEANS, GATING_ALWAYS), backbone_weights,
        suppression_weights, config, fixed_lambda, clamp_nonneg,
        invert_polarity, seed)
    gts = ship_ground_truth(samples)
    rows = [
        AblationRow(True, coco_map(passes[GATING_KMEANS], gts)),
        AblationRow(False, coco_map(passes[GATING_ALWAYS], gts)),
    ]
    return AblationReport(rows)
