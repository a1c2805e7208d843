"""Hot numeric kernels: 2-D convolution and 2x2 average pooling.

Two interchangeable backends. The numba-jitted loops are the default; a pure
numpy path (sliding windows + tensordot) is kept both as a fallback when numba
is absent and as an independent reference. Set ``SEAWARD_DISABLE_NUMBA=1`` in
the environment before import to force the numpy path. ``benchmarks/
bench_kernels.py`` times the two against each other.

Feature maps are float64 arrays of shape (channels, height, width); kernels
are (out_channels, in_channels, kh, kw). Convolution is cross-correlation
with zero padding, matching the usual CNN convention.
"""

from __future__ import annotations

import os

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("SEAWARD_DISABLE_NUMBA", "") != "1"


def _conv2d_numpy(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray,
                  stride: int, pad: int) -> np.ndarray:
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(x, kernel.shape[2:], axis=(1, 2))
    win = win[:, ::stride, ::stride]
    out = np.tensordot(kernel, win, axes=([1, 2, 3], [0, 3, 4]))
    return out + bias[:, None, None]


def _avg_pool2_numpy(x: np.ndarray) -> np.ndarray:
    c, h, w = x.shape
    return x.reshape(c, h // 2, 2, w // 2, 2).mean(axis=(2, 4))


if HAVE_NUMBA:

    @njit(cache=True)
    def _conv2d_numba(x, kernel, bias, stride, pad):  # pragma: no cover - jitted
        cin, h, w = x.shape
        cout, _, kh, kw = kernel.shape
        oh = (h + 2 * pad - kh) // stride + 1
        ow = (w + 2 * pad - kw) // stride + 1
        out = np.empty((cout, oh, ow), dtype=np.float64)
        for co in range(cout):
            for oy in range(oh):
                for ox in range(ow):
                    acc = bias[co]
                    y0 = oy * stride - pad
                    x0 = ox * stride - pad
                    for ci in range(cin):
                        for ky in range(kh):
                            yy = y0 + ky
                            if yy < 0 or yy >= h:
                                continue
                            for kx in range(kw):
                                xx = x0 + kx
                                if xx < 0 or xx >= w:
                                    continue
                                acc += x[ci, yy, xx] * kernel[co, ci, ky, kx]
                    out[co, oy, ox] = acc
        return out

    @njit(cache=True)
    def _avg_pool2_numba(x):  # pragma: no cover - jitted
        c, h, w = x.shape
        out = np.empty((c, h // 2, w // 2), dtype=np.float64)
        for ci in range(c):
            for y in range(h // 2):
                for xo in range(w // 2):
                    out[ci, y, xo] = 0.25 * (
                        x[ci, 2 * y, 2 * xo]
                        + x[ci, 2 * y, 2 * xo + 1]
                        + x[ci, 2 * y + 1, 2 * xo]
                        + x[ci, 2 * y + 1, 2 * xo + 1]
                    )
        return out


def conv2d(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray | None = None,
           stride: int = 1, pad: int = 0) -> np.ndarray:
    """Cross-correlate a (Cin, H, W) map with a (Cout, Cin, kh, kw) kernel.

    Zero padding of `pad` on each spatial side; output spatial dims are
    floor((in + 2*pad - k) / stride) + 1.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    kernel = np.ascontiguousarray(kernel, dtype=np.float64)
    if x.ndim != 3 or kernel.ndim != 4:
        raise DimensionError(
            f"conv2d needs (C,H,W) input and (O,C,kh,kw) kernel, "
            f"got {x.shape} and {kernel.shape}"
        )
    if kernel.shape[1] != x.shape[0]:
        raise DimensionError(
            f"kernel expects {kernel.shape[1]} input channels, map has {x.shape[0]}"
        )
    if stride < 1:
        raise DimensionError("stride must be >= 1")
    kh, kw = kernel.shape[2:]
    if x.shape[1] + 2 * pad < kh or x.shape[2] + 2 * pad < kw:
        raise DimensionError("kernel larger than padded input")
    if bias is None:
        bias = np.zeros(kernel.shape[0])
    bias = np.ascontiguousarray(bias, dtype=np.float64)
    if bias.shape != (kernel.shape[0],):
        raise DimensionError(f"bias shape {bias.shape} != ({kernel.shape[0]},)")
    if USE_NUMBA:
        return _conv2d_numba(x, kernel, bias, stride, pad)
    return _conv2d_numpy(x, kernel, bias, stride, pad)


def avg_pool2(x: np.ndarray) -> np.ndarray:
    """Non-overlapping 2x2 mean pooling; spatial dims must be even."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise DimensionError(f"avg_pool2 needs a (C,H,W) map, got {x.shape}")
    if x.shape[1] % 2 or x.shape[2] % 2:
        raise DimensionError(f"pooling needs even spatial dims, got {x.shape}")
    if USE_NUMBA:
        return _avg_pool2_numba(x)
    return _avg_pool2_numpy(x)
