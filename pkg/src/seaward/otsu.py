"""Global-threshold sea-land segmentation via between-class variance.

All computation happens in histogram space (256 bins), so scanning every
candidate threshold exhaustively is exact and cheap. The separation measure
for threshold k is

    sigma2(k) = (mean_total * omega(k) - mu(k))^2 / (omega(k) * (1 - omega(k)))

with omega(k) the cumulative probability of gray levels <= k and mu(k) the
cumulative first moment; it is defined as 0 where omega is 0 or 1, so the
degenerate ends can never win the argmax on a non-constant image.

Default mask polarity maps pixels above the chosen threshold to 1 (sea) and
the rest to 0 (land). On dark-sea imagery, where water is the dark class,
pass ``invert_polarity=True`` to swap the labels (the synthetic scenes in
this package are dark-sea).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyImageError
from .imagery import histogram


@dataclass
class OtsuResult:
    threshold: int  # smallest maximizer of the variance curve
    variance_curve: np.ndarray  # 256 values
    global_mean: float
    no_separation: bool  # constant image: every threshold scores 0


def global_mean(hist: np.ndarray) -> float:
    """Mean gray level implied by a histogram: sum of i * p_i."""
    return float(np.sum(np.arange(256) * np.asarray(hist, dtype=np.float64)))


def _variance_curve(hist: np.ndarray) -> tuple[np.ndarray, float]:
    p = np.asarray(hist, dtype=np.float64)
    levels = np.arange(256, dtype=np.float64)
    omega = np.cumsum(p)
    mu = np.cumsum(levels * p)
    mu_total = mu[-1]
    curve = np.zeros(256)
    ok = (omega > 0.0) & (omega < 1.0)
    curve[ok] = (mu_total * omega[ok] - mu[ok]) ** 2 / (omega[ok] * (1.0 - omega[ok]))
    return curve, mu_total


def class_variance(hist: np.ndarray, k: int) -> float:
    """Between-class variance at threshold k; 0 when a class is empty."""
    if not 0 <= k <= 255:
        raise ValueError(f"threshold {k} outside [0, 255]")
    curve, _ = _variance_curve(hist)
    return float(curve[k])


def otsu_threshold(hist: np.ndarray) -> OtsuResult:
    """Smallest k maximizing the between-class variance.

    A constant image scores 0 everywhere; it is flagged no_separation with
    threshold 0 rather than treated as an error.
    """
    curve, mu_total = _variance_curve(hist)
    best = int(np.argmax(curve))  # argmax returns the smallest maximizer
    if curve[best] == 0.0:
        return OtsuResult(0, curve, mu_total, True)
    return OtsuResult(best, curve, mu_total, False)


def segment(img: np.ndarray, invert_polarity: bool = False) -> np.ndarray:
    """Binary sea-land mask for one image (1 = sea, 0 = land).

    Default polarity: above-threshold pixels are sea. A no-separation image
    is treated as open water (all-sea) before the optional inversion.
    """
    img = np.asarray(img)
    if img.size == 0:
        raise EmptyImageError("cannot segment an empty image")
    result = otsu_threshold(histogram(img))
    if result.no_separation:
        mask = np.ones(img.shape, dtype=np.uint8)
    else:
        mask = (img > result.threshold).astype(np.uint8)
    if invert_polarity:
        mask = (1 - mask).astype(np.uint8)
    return mask
