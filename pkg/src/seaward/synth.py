"""Synthetic SAR-like scene generator with ground truth.

Scenes are built on a dark-sea convention (sea darker than land and ships,
the usual radar backscatter situation): a flat sea floor, an optional
connected land mass grown from a random walk anchored at an image edge,
bright elliptical ship targets on open water, bright clutter spots on land,
and multiplicative gamma speckle applied last. Every output is a pure
function of the scene spec and its seed.

A dataset directory holds ``img_%05d.pgm``, the true mask as
``mask_%05d.pgm``, ``gt.jsonl`` (one JSON object per box: image, x, y, w, h,
on_land) and ``scenes.tsv`` (image index, inshore|offshore).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import binary_dilation

from . import imagery
from .errors import FormatError, InputError, PlacementError

INSHORE = "inshore"
OFFSHORE = "offshore"

LAND_FRACTION_RANGE = (0.15, 0.6)


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of one synthetic scene."""

    width: int = 128
    height: int = 128
    scene_kind: str = OFFSHORE
    n_ships: int = 2
    sea_level: int = 40
    land_level: int = 150
    ship_level: int = 220
    speckle_looks: int = 4
    seed: int = 0
    n_clutter: int = 3  # bright on-land spots per inshore scene

    def __post_init__(self):
        if self.scene_kind not in (INSHORE, OFFSHORE):
            raise ValueError(f"unknown scene kind {self.scene_kind!r}")
        if not (0 <= self.sea_level < min(self.land_level, self.ship_level) <= 255):
            raise ValueError("sea must be darker than both land and ships")
        if self.speckle_looks < 1:
            raise ValueError("speckle_looks must be >= 1")
        if min(self.width, self.height) < 16:
            raise ValueError("scene dims must be at least 16 pixels")


@dataclass(frozen=True)
class GroundTruthBox:
    """Axis-aligned box; on_land marks clutter objects that are not ships."""

    x: int
    y: int
    w: int
    h: int
    on_land: bool = False


@dataclass
class SceneSample:
    image: np.ndarray  # (H, W) uint8
    scene_kind: str
    boxes: list[GroundTruthBox]
    true_mask: np.ndarray  # (H, W) uint8, 1 = sea


def apply_speckle(img: np.ndarray, looks: int, seed: int) -> np.ndarray:
    """Multiplicative unit-mean gamma speckle: v -> clamp(round(v*g), 0, 255).

    g is drawn per pixel from Gamma(shape=looks, scale=1/looks), mean 1 and
    variance 1/looks; fewer looks means rougher speckle.
    """
    if looks < 1:
        raise ValueError("looks must be >= 1")
    img = np.asarray(img, dtype=np.float64)
    rng = np.random.default_rng(seed)
    g = rng.gamma(float(looks), 1.0 / looks, size=img.shape)
    return np.clip(np.rint(img * g), 0, 255).astype(np.uint8)


def _grow_land(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Connected land blob anchored at an image edge via walk + dilation."""
    land = np.zeros((h, w), dtype=bool)
    edge = rng.integers(4)
    if edge == 0:
        y, x = 0, int(rng.integers(w))
    elif edge == 1:
        y, x = h - 1, int(rng.integers(w))
    elif edge == 2:
        y, x = int(rng.integers(h)), 0
    else:
        y, x = int(rng.integers(h)), w - 1
    land[y, x] = True
    steps = rng.integers([-1, -1], [2, 2], size=(h + w, 2))
    for dy, dx in steps:
        y = min(max(y + int(dy), 0), h - 1)
        x = min(max(x + int(dx), 0), w - 1)
        land[y, x] = True
    target = rng.uniform(0.2, 0.45)
    struct = np.ones((3, 3), dtype=bool)
    while land.mean() < target:
        land = binary_dilation(land, structure=struct)
    frac = land.mean()
    assert LAND_FRACTION_RANGE[0] <= frac <= LAND_FRACTION_RANGE[1], frac
    return land


def _paint_ellipse(canvas: np.ndarray, cy: int, cx: int, ry: int, rx: int,
                   level: int) -> None:
    yy, xx = np.ogrid[: canvas.shape[0], : canvas.shape[1]]
    inside = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
    canvas[inside] = level


def _boxes_overlap(a: GroundTruthBox, b: GroundTruthBox, gap: int = 2) -> bool:
    return not (
        a.x + a.w + gap <= b.x
        or b.x + b.w + gap <= a.x
        or a.y + a.h + gap <= b.y
        or b.y + b.h + gap <= a.y
    )


def _place_blob(rng: np.random.Generator, canvas: np.ndarray, sea: np.ndarray,
                boxes: list[GroundTruthBox], level: int, on_land: bool) -> GroundTruthBox:
    """Drop one bright ellipse; ships sit fully on sea, clutter centers on land."""
    h, w = canvas.shape
    for _ in range(100):
        ry = int(rng.integers(2, 5))
        rx = int(rng.integers(3, 8))
        cy = int(rng.integers(ry, h - ry))
        cx = int(rng.integers(rx, w - rx))
        box = GroundTruthBox(cx - rx, cy - ry, 2 * rx + 1, 2 * ry + 1, on_land)
        region = sea[box.y : box.y + box.h, box.x : box.x + box.w]
        if on_land:
            if sea[cy, cx]:
                continue
        elif not region.all():
            continue
        if any(_boxes_overlap(box, other) for other in boxes):
            continue
        _paint_ellipse(canvas, cy, cx, ry, rx, level)
        return box
    raise PlacementError(
        f"could not place a {'clutter' if on_land else 'ship'} blob in 100 attempts"
    )


def generate_scene(spec: SceneSpec) -> tuple[np.ndarray, list[GroundTruthBox], np.ndarray]:
    """Render one scene.

    Returns the speckled uint8 image, the ground-truth boxes (ships plus, for
    inshore scenes, on_land clutter spots), and the exact sea-land mask used
    during synthesis (1 = sea).
    """
    rng = np.random.default_rng(spec.seed)
    h, w = spec.height, spec.width
    if spec.scene_kind == INSHORE:
        land = _grow_land(rng, h, w)
    else:
        land = np.zeros((h, w), dtype=bool)
    sea = ~land

    canvas = np.full((h, w), spec.sea_level, dtype=np.int32)
    canvas[land] = spec.land_level

    boxes: list[GroundTruthBox] = []
    for _ in range(spec.n_ships):
        boxes.append(_place_blob(rng, canvas, sea, boxes, spec.ship_level, on_land=False))
    if spec.scene_kind == INSHORE:
        for _ in range(spec.n_clutter):
            boxes.append(_place_blob(rng, canvas, sea, boxes, spec.ship_level, on_land=True))

    speckle_seed = int(rng.integers(np.iinfo(np.int64).max))
    img = apply_speckle(canvas, spec.speckle_looks, speckle_seed)
    return img, boxes, sea.astype(np.uint8)


def generate_dataset(template: SceneSpec, n_images: int, inshore_fraction: float,
                     seed: int) -> list[SceneSample]:
    """n_images scenes; the first round(n*fraction) are inshore, the rest offshore.

    Image i is generated from the template with its seed set to seed + i, so
    any sub-range of the dataset is reproducible independently.
    """
    if n_images < 1:
        raise ValueError("n_images must be >= 1")
    if not 0.0 <= inshore_fraction <= 1.0:
        raise ValueError("inshore_fraction must lie in [0, 1]")
    n_inshore = round(n_images * inshore_fraction)
    samples = []
    for i in range(n_images):
        kind = INSHORE if i < n_inshore else OFFSHORE
        spec = dataclasses.replace(template, scene_kind=kind, seed=seed + i)
        img, boxes, mask = generate_scene(spec)
        samples.append(SceneSample(img, kind, boxes, mask))
    return samples


def image_name(index: int) -> str:
    return f"img_{index:05d}.pgm"


def mask_name(index: int) -> str:
    return f"mask_{index:05d}.pgm"


def write_dataset(samples: list[SceneSample], out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    gt_lines = []
    scene_lines = []
    for i, s in enumerate(samples):
        imagery.save_image(s.image, out_dir / image_name(i))
        imagery.save_mask(s.true_mask, out_dir / mask_name(i))
        for b in s.boxes:
            gt_lines.append(json.dumps(
                {"image": i, "x": b.x, "y": b.y, "w": b.w, "h": b.h,
                 "on_land": b.on_land}))
        scene_lines.append(f"{i}\t{s.scene_kind}")
    imagery.atomic_write_text(out_dir / "gt.jsonl", "".join(l + "\n" for l in gt_lines))
    imagery.atomic_write_text(out_dir / "scenes.tsv", "".join(l + "\n" for l in scene_lines))


def read_gt_jsonl(path) -> dict[int, list[GroundTruthBox]]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"no such ground-truth file: {path}")
    boxes: dict[int, list[GroundTruthBox]] = {}
    for ln, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            box = GroundTruthBox(int(rec["x"]), int(rec["y"]), int(rec["w"]),
                                 int(rec["h"]), bool(rec["on_land"]))
            boxes.setdefault(int(rec["image"]), []).append(box)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}:{ln}: bad ground-truth record ({exc})") from exc
    return boxes


def read_dataset(dir_path) -> list[SceneSample]:
    dir_path = Path(dir_path)
    scenes_file = dir_path / "scenes.tsv"
    if not scenes_file.is_file():
        raise InputError(f"{dir_path} is not a dataset directory (no scenes.tsv)")
    kinds: list[str] = []
    for ln, line in enumerate(scenes_file.read_text().splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2 or parts[1] not in (INSHORE, OFFSHORE):
            raise FormatError(f"{scenes_file}:{ln}: bad scene line {line!r}")
        kinds.append(parts[1])
    gt = read_gt_jsonl(dir_path / "gt.jsonl")
    samples = []
    for i, kind in enumerate(kinds):
        img = imagery.load_image(dir_path / image_name(i))
        mask = imagery.load_mask(dir_path / mask_name(i))
        samples.append(SceneSample(img, kind, gt.get(i, []), mask))
    return samples
