"""Grayscale raster I/O and the small grid utilities every other module shares.

Array conventions used across the package:

* gray image -- ``uint8`` array of shape ``(H, W)``
* sea-land mask -- ``uint8`` array of shape ``(H, W)`` with 1 = sea, 0 = land
* real grid -- ``float64`` array of shape ``(H, W)``
* histogram -- ``float64`` array of 256 per-gray-level probabilities

PGM (P5, 8-bit) is the canonical interchange format: the header is the exact
bytes ``P5\\n<width> <height>\\n255\\n`` followed by ``width*height`` raw pixel
bytes in row-major order. Masks are stored as PGM with land = 0, sea = 255.
PNG is accepted read-only as a convenience.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .errors import EmptyImageError, FormatError, InputError, OutputError


def as_image(pixels, width: int | None = None, height: int | None = None) -> np.ndarray:
    """Coerce `pixels` into a validated (H, W) uint8 image array.

    Accepts a 2-D array, or a flat row-major sequence together with
    `width`/`height`.
    """
    arr = np.asarray(pixels)
    if arr.ndim == 1:
        if width is None or height is None:
            raise FormatError("flat pixel list needs explicit width and height")
        if arr.size != width * height:
            raise FormatError(
                f"expected {width * height} pixels, got {arr.size}"
            )
        arr = arr.reshape(height, width)
    if arr.ndim != 2:
        raise FormatError(f"image must be 2-D, got shape {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise FormatError("pixel values must lie in [0, 255]")
    return arr.astype(np.uint8)


def _read_pgm(data: bytes, path: Path) -> np.ndarray:
    pos = 0

    def token() -> bytes:
        # skips whitespace and '#' comment lines between header fields
        nonlocal pos
        while pos < len(data):
            c = data[pos : pos + 1]
            if c == b"#":
                nl = data.find(b"\n", pos)
                if nl < 0:
                    raise FormatError(f"{path}: unterminated comment in header")
                pos = nl + 1
            elif c.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PGM header")
        return data[start:pos]

    magic = token()
    if magic != b"P5":
        raise FormatError(f"{path}: not a binary PGM (magic {magic!r})")
    try:
        width = int(token())
        height = int(token())
        maxval = int(token())
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric PGM header field") from exc
    if width < 1 or height < 1:
        raise FormatError(f"{path}: bad dimensions {width}x{height}")
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit PGM supported (maxval {maxval})")
    pos += 1  # single whitespace byte separates header from payload
    payload = data[pos:]
    if len(payload) != width * height:
        raise FormatError(
            f"{path}: payload has {len(payload)} bytes, expected {width * height}"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()


def load_image(path) -> np.ndarray:
    """Read an 8-bit grayscale image (PGM P5 or PNG) as a (H, W) uint8 array."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"no such image file: {path}")
    data = path.read_bytes()
    if data[:2] == b"P5":
        return _read_pgm(data, path)
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        from PIL import Image

        try:
            with Image.open(path) as im:
                if im.mode != "L":
                    raise FormatError(f"{path}: PNG must be 8-bit grayscale (mode L)")
                return np.asarray(im, dtype=np.uint8).copy()
        except FormatError:
            raise
        except Exception as exc:
            raise FormatError(f"{path}: broken PNG ({exc})") from exc
    raise FormatError(f"{path}: neither PGM (P5) nor PNG")


def save_image(img: np.ndarray, path) -> None:
    """Write a uint8 image as binary PGM (P5); bit-exact round trip."""
    img = np.ascontiguousarray(as_image(img))
    h, w = img.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    try:
        atomic_write_bytes(path, header + img.tobytes())
    except OSError as exc:
        raise OutputError(f"cannot write image to {path}: {exc}") from exc


def save_mask(mask: np.ndarray, path) -> None:
    """Write a binary sea-land mask as PGM with land = 0 and sea = 255."""
    mask = np.asarray(mask)
    if mask.ndim != 2 or not np.isin(mask, (0, 1)).all():
        raise FormatError("mask must be a 2-D grid of 0/1 values")
    save_image(mask.astype(np.uint8) * 255, path)


def load_mask(path) -> np.ndarray:
    """Read a mask PGM written by :func:`save_mask` back to a 0/1 grid."""
    img = load_image(path)
    if not np.isin(img, (0, 255)).all():
        raise FormatError(f"{path}: mask image has values other than 0 and 255")
    return (img // 255).astype(np.uint8)


def histogram(img: np.ndarray) -> np.ndarray:
    """Per-gray-level probabilities: bin i = fraction of pixels equal to i."""
    img = np.asarray(img)
    if img.size == 0:
        raise EmptyImageError("cannot build a histogram of an empty image")
    counts = np.bincount(img.ravel().astype(np.int64), minlength=256)
    return counts / img.size


def resize_nearest(grid: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbor resample to (out_h, out_w).

    Output cell (r, c) copies input cell (floor(r*in_h/out_h),
    floor(c*in_w/out_w)); exact integer arithmetic, works both up and down.
    """
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise FormatError(f"resize expects a 2-D grid, got shape {grid.shape}")
    if out_h < 1 or out_w < 1:
        raise FormatError("output dimensions must be >= 1")
    in_h, in_w = grid.shape
    rows = (np.arange(out_h, dtype=np.int64) * in_h) // out_h
    cols = (np.arange(out_w, dtype=np.int64) * in_w) // out_w
    return grid[np.ix_(rows, cols)]


def atomic_write_bytes(path, data: bytes) -> None:
    """Write a file via a temporary name + rename so readers never see partials."""
    path = Path(path)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    try:
        tmp.write_bytes(data)
        os.replace(tmp, path)
    except OSError:
        tmp.unlink(missing_ok=True)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))
