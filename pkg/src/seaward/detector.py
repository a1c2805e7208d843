"""Minimal detection head: score map -> thresholded blobs -> greedy NMS.

Deliberately training-free plumbing. One pyramid level is standardized and
averaged across channels into a sigmoid score grid; above-threshold cells are
grouped into 4-connected components; each sufficiently large component
becomes a box in image coordinates (grid cell extents scaled by the level
stride) scored by its peak cell. Greedy NMS keeps the highest-scoring boxes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import label as cc_label

from .attention import SuppressionWeights, suppress_pyramid
from .backbone import BackboneWeights, build_pyramid, pad_to_stride
from .errors import DimensionError

FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class Detection:
    x: int
    y: int
    w: int
    h: int
    score: float


@dataclass(frozen=True)
class DetectorConfig:
    score_threshold: float = 0.62
    nms_iou: float = 0.5
    level: int = 0  # pyramid level used for scoring; 0 = finest stride
    min_area: int = 2  # grid cells; smaller components are dropped

    def __post_init__(self):
        if not 0.0 < self.score_threshold < 1.0:
            raise ValueError("score_threshold must be in (0, 1)")
        if not 0.0 < self.nms_iou < 1.0:
            raise ValueError("nms_iou must be in (0, 1)")
        if self.level < 0:
            raise ValueError("level must be >= 0")
        if self.min_area < 1:
            raise ValueError("min_area must be >= 1")


def score_map(fm: np.ndarray) -> np.ndarray:
    """Per-cell sigmoid score from a standardized feature map.

    The whole (C, H, W) tensor is standardized (its mean subtracted, its
    stddev divided out), the channels are averaged, and a sigmoid maps the
    result into (0, 1). A constant map has zero stddev and scores 0.5
    everywhere.
    """
    fm = np.asarray(fm, dtype=np.float64)
    if fm.ndim != 3 or fm.shape[0] < 1:
        raise DimensionError(f"expected a (C, H, W) map, got shape {fm.shape}")
    std = fm.std()
    if std == 0.0:
        return np.full(fm.shape[1:], 0.5)
    z = (fm - fm.mean()) / std
    return 1.0 / (1.0 + np.exp(-z.mean(axis=0)))


def propose(scores: np.ndarray, config: DetectorConfig, stride: int) -> list[Detection]:
    """Boxes for every 4-connected above-threshold component of enough cells.

    Component bounding boxes are scaled by the level stride into image
    coordinates; each box carries its component's peak cell score.
    """
    hot = scores > config.score_threshold
    labels, count = cc_label(hot, structure=FOUR_CONNECTED)
    out = []
    for ci in range(1, count + 1):
        ys, xs = np.nonzero(labels == ci)
        if len(ys) < config.min_area:
            continue
        out.append(Detection(
            x=int(xs.min()) * stride,
            y=int(ys.min()) * stride,
            w=(int(xs.max()) - int(xs.min()) + 1) * stride,
            h=(int(ys.max()) - int(ys.min()) + 1) * stride,
            score=float(scores[ys, xs].max()),
        ))
    return out


def _as_box(v) -> tuple[float, float, float, float]:
    if isinstance(v, Detection):
        return v.x, v.y, v.w, v.h
    if hasattr(v, "x"):  # GroundTruthBox and friends
        return v.x, v.y, v.w, v.h
    x, y, w, h = v
    return x, y, w, h


def iou(a, b) -> float:
    """Intersection over union of two (x, y, w, h) boxes; disjoint -> 0."""
    ax, ay, aw, ah = _as_box(a)
    bx, by, bw, bh = _as_box(b)
    ix = min(ax + aw, bx + bw) - max(ax, bx)
    iy = min(ay + ah, by + bh) - max(ay, by)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = float(ix) * float(iy)
    union = float(aw) * float(ah) + float(bw) * float(bh) - inter
    return inter / union


def nms(dets: list[Detection], nms_iou: float) -> list[Detection]:
    """Greedy suppression: keep best score, drop overlaps above nms_iou.

    Score ties break toward the smaller (y, x) corner so the result never
    depends on input order.
    """
    pending = sorted(dets, key=lambda d: (-d.score, d.y, d.x))
    kept: list[Detection] = []
    while pending:
        best = pending.pop(0)
        kept.append(best)
        pending = [d for d in pending if iou(best, d) <= nms_iou]
    return kept


def detect(img: np.ndarray, scene_kind: str, mask: np.ndarray | None,
           backbone_weights: BackboneWeights,
           suppression_weights: SuppressionWeights | None,
           config: DetectorConfig = DetectorConfig(),
           fixed_lambda: float | None = None,
           clamp_nonneg: bool = False) -> list[Detection]:
    """Full single-image pipeline: pyramid, land suppression, head.

    `mask` must be given exactly for inshore scenes. Images whose dims do not
    divide the deepest stride are replicate-padded bottom/right (the mask
    likewise) before feature extraction.
    """
    inshore = scene_kind == "inshore"
    if inshore and mask is None:
        raise ValueError("inshore detection needs a sea-land mask")
    if not inshore:
        mask = None
    stride = backbone_weights.level_strides[-1]
    img = pad_to_stride(np.asarray(img), stride)
    if mask is not None and mask.shape != img.shape:
        mask = np.pad(mask, ((0, img.shape[0] - mask.shape[0]),
                             (0, img.shape[1] - mask.shape[1])), mode="edge")
    pyramid = build_pyramid(img, backbone_weights)
    pyramid = suppress_pyramid(pyramid, mask, suppression_weights,
                               fixed_lambda=fixed_lambda, clamp_nonneg=clamp_nonneg)
    if config.level >= len(pyramid):
        raise DimensionError(f"pyramid has no level {config.level}")
    scores = score_map(pyramid[config.level])
    level_stride = backbone_weights.level_strides[config.level]
    return nms(propose(scores, config, level_stride), config.nms_iou)
