"""Fixed (untrained) convolutional feature-pyramid extractor.

The pyramid is a chain of conv -> ReLU -> 2x2 average-pool stages; selected
stage outputs ("taps") form the pyramid levels. The default plan produces
three levels at strides 4, 8 and 16 with 64, 128 and 256 channels. Weights
are seeded-random or file-loaded, never trained: the pipeline's value is in
the masking and suppression stages, and the detection head only needs
features in which bright targets stay localizable. To that end the default
weights hard-wire channel 0 of every stage as a local average of the raw
image, so each level carries a strided intensity channel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, FormatError
from .kernels import avg_pool2, conv2d
from .tensorio import load_named_tensors, save_named_tensors

# channel plan: (out_channels, kernel_size) per stage; taps index the stages
# whose outputs become pyramid levels
DEFAULT_STAGES = ((8, 3), (64, 3), (128, 1), (256, 1))
DEFAULT_TAPS = (1, 2, 3)
DEFAULT_SEED = 20240817


@dataclass
class BackboneWeights:
    kernels: list[np.ndarray]  # stage kernels, (Cout, Cin, k, k)
    biases: list[np.ndarray]  # per-stage (Cout,)
    pool_strides: list[int]  # 2 pools after the stage conv, 1 skips pooling
    level_taps: list[int]  # stage indices exported as pyramid levels

    def __post_init__(self):
        n = len(self.kernels)
        if not (len(self.biases) == len(self.pool_strides) == n):
            raise FormatError("stage kernel/bias/pool lists differ in length")
        cin = self.kernels[0].shape[1]
        for i, (k, b) in enumerate(zip(self.kernels, self.biases)):
            if k.ndim != 4 or k.shape[2] != k.shape[3] or k.shape[2] % 2 == 0:
                raise FormatError(f"stage {i}: kernel must be square with odd size")
            if k.shape[1] != cin:
                raise FormatError(
                    f"stage {i}: expects {k.shape[1]} input channels, gets {cin}"
                )
            if b.shape != (k.shape[0],):
                raise FormatError(f"stage {i}: bias shape {b.shape} mismatch")
            cin = k.shape[0]
        if any(s not in (1, 2) for s in self.pool_strides):
            raise FormatError("pool strides must be 1 or 2")
        if not self.level_taps or sorted(set(self.level_taps)) != list(self.level_taps):
            raise FormatError("level taps must be strictly increasing")
        if self.level_taps[-1] >= n:
            raise FormatError("level tap beyond last stage")

    @property
    def level_strides(self) -> list[int]:
        out, stride = [], 1
        for i, p in enumerate(self.pool_strides):
            stride *= p
            if i in self.level_taps:
                out.append(stride)
        return out

    @property
    def level_channels(self) -> list[int]:
        return [self.kernels[i].shape[0] for i in self.level_taps]


def init_weights(seed: int, stages=DEFAULT_STAGES, taps=DEFAULT_TAPS) -> BackboneWeights:
    """Seeded uniform(-s, s) kernels with s = sqrt(1/fan_in); zero biases."""
    rng = np.random.default_rng(seed)
    kernels, biases = [], []
    cin = 1
    for cout, ksize in stages:
        s = np.sqrt(1.0 / (cin * ksize * ksize))
        kernels.append(rng.uniform(-s, s, size=(cout, cin, ksize, ksize)))
        biases.append(np.zeros(cout))
        cin = cout
    return BackboneWeights(kernels, biases, [2] * len(kernels), list(taps))


def inject_intensity_channel(weights: BackboneWeights) -> BackboneWeights:
    """Overwrite channel 0 of every stage with an input-averaging filter.

    Channel 0 then propagates a local mean of the (nonnegative) image through
    every stage untouched by the random weights, so each pyramid level keeps
    a strided intensity map and bright targets survive to the detection head.
    """
    kernels = [k.copy() for k in weights.kernels]
    biases = [b.copy() for b in weights.biases]
    for k, b in zip(kernels, biases):
        ksize = k.shape[2]
        k[0] = 0.0
        k[0, 0] = 1.0 / (ksize * ksize)
        b[0] = 0.0
    return BackboneWeights(kernels, biases, list(weights.pool_strides),
                           list(weights.level_taps))


def default_weights() -> BackboneWeights:
    return inject_intensity_channel(init_weights(DEFAULT_SEED))


def build_pyramid(img: np.ndarray, weights: BackboneWeights) -> list[np.ndarray]:
    """Feature maps for every declared level, shallowest (finest) first.

    The image dims must divide by the deepest level's total stride; callers
    holding arbitrary images pad up to the next multiple first.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise DimensionError(f"expected a 2-D image, got shape {img.shape}")
    deepest = weights.level_strides[-1]
    if img.shape[0] % deepest or img.shape[1] % deepest:
        raise DimensionError(
            f"image dims {img.shape} not divisible by total stride {deepest}"
        )
    x = img[None, :, :]
    levels = []
    for i, (k, b, p) in enumerate(zip(weights.kernels, weights.biases,
                                      weights.pool_strides)):
        x = conv2d(x, k, b, stride=1, pad=(k.shape[2] - 1) // 2)
        x = np.maximum(x, 0.0)
        if p == 2:
            x = avg_pool2(x)
        if i in weights.level_taps:
            levels.append(x)
    return levels


def pad_to_stride(img: np.ndarray, stride: int) -> np.ndarray:
    """Replicate-pad bottom/right so both dims are multiples of `stride`."""
    h, w = img.shape
    ph = (-h) % stride
    pw = (-w) % stride
    if ph == 0 and pw == 0:
        return img
    return np.pad(img, ((0, ph), (0, pw)), mode="edge")


def save_weights(weights: BackboneWeights, path) -> None:
    tensors: dict[str, np.ndarray] = {}
    for i, (k, b) in enumerate(zip(weights.kernels, weights.biases)):
        tensors[f"stage{i}.kernel"] = k
        tensors[f"stage{i}.bias"] = b
    tensors["pool_strides"] = np.array(weights.pool_strides, dtype=np.float64)
    tensors["level_taps"] = np.array(weights.level_taps, dtype=np.float64)
    save_named_tensors(path, tensors)


def load_weights(path) -> BackboneWeights:
    tensors = load_named_tensors(path)
    try:
        pool = [int(v) for v in tensors.pop("pool_strides")]
        taps = [int(v) for v in tensors.pop("level_taps")]
    except KeyError as exc:
        raise FormatError(f"{path}: missing tensor {exc}") from exc
    kernels, biases = [], []
    for i in range(len(pool)):
        try:
            kernels.append(tensors.pop(f"stage{i}.kernel"))
            biases.append(tensors.pop(f"stage{i}.bias"))
        except KeyError as exc:
            raise FormatError(f"{path}: missing tensor {exc}") from exc
    if tensors:
        raise FormatError(f"{path}: unexpected tensors {sorted(tensors)}")
    return BackboneWeights(kernels, biases, pool, taps)
