"""Feature-level land suppression.

For an inshore scene, each pyramid level is summarized to a scalar
suppression weight lam: the level is projected to 256 channels by a 1x1
convolution, adaptively average-pooled to 7x7, flattened to a 12544-vector,
and passed through two fully connected layers with a tanh after each, the
final output halved. That bounds |lam| below 0.5. The sea-land mask is then
turned into a per-cell attention map

    A = 1          on sea cells
    A = 1 - lam    on land cells

resized (nearest-neighbor, so it stays two-valued) to the level's spatial
dims, and multiplied into the original feature map across all channels. Sea
features are preserved bitwise; land features are scaled by exactly 1 - lam.
Offshore scenes bypass the module entirely.

Masking happens at the feature level rather than by filtering detector
output, so an imperfect mask attenuates land evidence instead of deleting
boxes outright.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, FormatError
from .imagery import resize_nearest
from .kernels import conv2d
from .tensorio import load_named_tensors, save_named_tensors

PROJECTED_CHANNELS = 256
POOLED_SIZE = 7
FLAT_SIZE = PROJECTED_CHANNELS * POOLED_SIZE * POOLED_SIZE  # 12544
DEFAULT_SEED = 77031

LAMBDA_BOUND = 0.5  # |tanh(x)/2| < 0.5 for every finite x


@dataclass
class SuppressionWeights:
    projections: dict[int, tuple[np.ndarray, np.ndarray]]  # cin -> (kernel, bias)
    fc1_weight: np.ndarray  # (hidden, 12544)
    fc1_bias: np.ndarray  # (hidden,)
    fc2_weight: np.ndarray  # (hidden,) -> scalar
    fc2_bias: float

    def __post_init__(self):
        for cin, (k, b) in self.projections.items():
            if k.shape != (PROJECTED_CHANNELS, cin, 1, 1):
                raise FormatError(f"projection for {cin} channels has shape {k.shape}")
            if b.shape != (PROJECTED_CHANNELS,):
                raise FormatError(f"projection bias shape {b.shape}")
        if self.fc1_weight.shape[1] != FLAT_SIZE:
            raise FormatError(
                f"fc1 must take {FLAT_SIZE} inputs, takes {self.fc1_weight.shape[1]}"
            )
        hidden = self.fc1_weight.shape[0]
        if self.fc1_bias.shape != (hidden,) or self.fc2_weight.shape != (hidden,):
            raise FormatError("fc layer shapes are inconsistent")


def init_suppression_weights(seed: int, channel_counts=(64, 128, 256),
                             hidden: int = 256) -> SuppressionWeights:
    rng = np.random.default_rng(seed)
    projections = {}
    for cin in channel_counts:
        s = np.sqrt(1.0 / cin)
        projections[cin] = (
            rng.uniform(-s, s, size=(PROJECTED_CHANNELS, cin, 1, 1)),
            np.zeros(PROJECTED_CHANNELS),
        )
    s1 = np.sqrt(1.0 / FLAT_SIZE)
    s2 = np.sqrt(1.0 / hidden)
    return SuppressionWeights(
        projections,
        rng.uniform(-s1, s1, size=(hidden, FLAT_SIZE)),
        np.zeros(hidden),
        rng.uniform(-s2, s2, size=hidden),
        0.0,
    )


def zero_suppression_weights(channel_counts=(64, 128, 256),
                             hidden: int = 256) -> SuppressionWeights:
    """All-zero weights: lam comes out exactly 0 for any input."""
    projections = {
        cin: (np.zeros((PROJECTED_CHANNELS, cin, 1, 1)), np.zeros(PROJECTED_CHANNELS))
        for cin in channel_counts
    }
    return SuppressionWeights(projections, np.zeros((hidden, FLAT_SIZE)),
                              np.zeros(hidden), np.zeros(hidden), 0.0)


def default_suppression_weights() -> SuppressionWeights:
    return init_suppression_weights(DEFAULT_SEED)


def project_channels(fm: np.ndarray, weights: SuppressionWeights) -> np.ndarray:
    """1x1-convolve a level to the uniform 256-channel width."""
    cin = fm.shape[0]
    if cin not in weights.projections:
        raise DimensionError(f"no projection defined for {cin} input channels")
    kernel, bias = weights.projections[cin]
    return conv2d(fm, kernel, bias)


def pool_flatten(fm: np.ndarray) -> np.ndarray:
    """Adaptive-average-pool a (256, H, W) map to 7x7 and flatten channel-major.

    Pool cell (r, c) averages input rows [floor(r*H/7), floor((r+1)*H/7)) and
    the analogous column span, so it works for any H, W >= 7.
    """
    if fm.ndim != 3 or fm.shape[0] != PROJECTED_CHANNELS:
        raise DimensionError(f"expected a ({PROJECTED_CHANNELS}, H, W) map, got {fm.shape}")
    _, h, w = fm.shape
    if h < POOLED_SIZE or w < POOLED_SIZE:
        raise DimensionError(f"pooling to 7x7 needs dims >= 7, got {h}x{w}")
    rb = [(r * h) // POOLED_SIZE for r in range(POOLED_SIZE + 1)]
    cb = [(c * w) // POOLED_SIZE for c in range(POOLED_SIZE + 1)]
    pooled = np.empty((PROJECTED_CHANNELS, POOLED_SIZE, POOLED_SIZE))
    for r in range(POOLED_SIZE):
        for c in range(POOLED_SIZE):
            pooled[:, r, c] = fm[:, rb[r] : rb[r + 1], cb[c] : cb[c + 1]].mean(axis=(1, 2))
    return pooled.ravel()


def compute_lambda(vec: np.ndarray, weights: SuppressionWeights) -> float:
    """Scalar suppression weight: tanh(fc2(tanh(fc1(vec)))) / 2, so |lam| < 0.5."""
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (FLAT_SIZE,):
        raise DimensionError(f"expected a {FLAT_SIZE}-vector, got shape {vec.shape}")
    hidden = np.tanh(weights.fc1_weight @ vec + weights.fc1_bias)
    return float(np.tanh(weights.fc2_weight @ hidden + weights.fc2_bias) / 2.0)


def attention_map(mask: np.ndarray, lam: float, out_h: int, out_w: int) -> np.ndarray:
    """Two-valued weight map: sea cells exactly 1.0, land cells exactly 1 - lam,
    nearest-resized to the requested dims."""
    if not np.isfinite(lam):
        raise ValueError("lam must be finite")
    mask = np.asarray(mask)
    land_value = 1.0 - lam
    amap = np.where(mask == 0, land_value, 1.0)
    return resize_nearest(amap, out_h, out_w)


def modulate(fm: np.ndarray, amap: np.ndarray) -> np.ndarray:
    """Scale every channel of a feature map by the per-cell attention weights."""
    fm = np.asarray(fm, dtype=np.float64)
    if fm.shape[1:] != amap.shape:
        raise DimensionError(
            f"attention dims {amap.shape} do not match feature dims {fm.shape[1:]}"
        )
    return fm * amap[None, :, :]


def suppress_pyramid(pyramid: list[np.ndarray], mask: np.ndarray | None,
                     weights: SuppressionWeights | None,
                     fixed_lambda: float | None = None,
                     clamp_nonneg: bool = False) -> list[np.ndarray]:
    """Apply land suppression to every level of an inshore pyramid.

    mask is None for offshore scenes, which pass through untouched. Each
    level gets its own lam computed from its own features, unless
    fixed_lambda short-circuits the computation (reproducible suppression
    without trained weights). clamp_nonneg floors lam at 0 so land can never
    be amplified.
    """
    if mask is None:
        return pyramid
    out = []
    for fm in pyramid:
        if fixed_lambda is not None:
            lam = float(fixed_lambda)
        else:
            if weights is None:
                raise ValueError("need suppression weights when lam is not fixed")
            lam = compute_lambda(pool_flatten(project_channels(fm, weights)), weights)
        if clamp_nonneg:
            lam = max(lam, 0.0)
        amap = attention_map(mask, lam, fm.shape[1], fm.shape[2])
        out.append(modulate(fm, amap))
    return out


def save_suppression_weights(weights: SuppressionWeights, path) -> None:
    tensors: dict[str, np.ndarray] = {}
    for cin in sorted(weights.projections):
        kernel, bias = weights.projections[cin]
        tensors[f"proj{cin}.kernel"] = kernel
        tensors[f"proj{cin}.bias"] = bias
    tensors["fc1.weight"] = weights.fc1_weight
    tensors["fc1.bias"] = weights.fc1_bias
    tensors["fc2.weight"] = weights.fc2_weight
    tensors["fc2.bias"] = np.array([weights.fc2_bias])
    save_named_tensors(path, tensors)


def load_suppression_weights(path) -> SuppressionWeights:
    tensors = load_named_tensors(path)
    projections = {}
    for name in sorted(t for t in tensors if t.startswith("proj") and t.endswith(".kernel")):
        cin = int(name[len("proj") : -len(".kernel")])
        bias_name = f"proj{cin}.bias"
        if bias_name not in tensors:
            raise FormatError(f"{path}: {name} has no matching bias")
        projections[cin] = (tensors.pop(name), tensors.pop(bias_name))
    try:
        fc1_w = tensors.pop("fc1.weight")
        fc1_b = tensors.pop("fc1.bias")
        fc2_w = tensors.pop("fc2.weight")
        fc2_b = tensors.pop("fc2.bias")
    except KeyError as exc:
        raise FormatError(f"{path}: missing tensor {exc}") from exc
    if tensors:
        raise FormatError(f"{path}: unexpected tensors {sorted(tensors)}")
    if fc2_b.shape != (1,):
        raise FormatError(f"{path}: fc2.bias must be a single value")
    return SuppressionWeights(projections, fc1_w, fc1_b, fc2_w, float(fc2_b[0]))
