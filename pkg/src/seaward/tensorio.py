"""Plain-text container for named float tensors.

Grammar, bit-exact on round trip:

    name <identifier>
    tensor <ndim> <d1> ... <dn>
    <d1*...*dn whitespace-separated decimal reals, row-major>

repeated once per tensor. Values are written with shortest-round-trip float
formatting, so save followed by load reproduces every float64 exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import FormatError, InputError, OutputError
from .imagery import atomic_write_text


def save_named_tensors(path, tensors: dict[str, np.ndarray]) -> None:
    chunks = []
    for name, t in tensors.items():
        t = np.asarray(t, dtype=np.float64)
        dims = " ".join(str(d) for d in t.shape)
        values = " ".join(repr(v) for v in t.ravel())
        chunks.append(f"name {name}\ntensor {t.ndim} {dims}\n{values}\n")
    try:
        atomic_write_text(path, "".join(chunks))
    except OSError as exc:
        raise OutputError(f"cannot write tensors to {path}: {exc}") from exc


def load_named_tensors(path) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"no such weights file: {path}")
    tokens = path.read_text().split()
    pos = 0
    out: dict[str, np.ndarray] = {}

    def take(n: int) -> list[str]:
        nonlocal pos
        if pos + n > len(tokens):
            raise FormatError(f"{path}: truncated tensor file")
        chunk = tokens[pos : pos + n]
        pos += n
        return chunk

    while pos < len(tokens):
        kw, name = take(2)
        if kw != "name":
            raise FormatError(f"{path}: expected 'name', found {kw!r}")
        kw, ndim = take(2)
        if kw != "tensor":
            raise FormatError(f"{path}: expected 'tensor', found {kw!r}")
        try:
            ndim = int(ndim)
            shape = tuple(int(d) for d in take(ndim))
            if ndim < 0 or any(d < 1 for d in shape):
                raise ValueError(shape)
            count = int(np.prod(shape)) if shape else 1
            values = np.array([float(v) for v in take(count)], dtype=np.float64)
        except ValueError as exc:
            raise FormatError(f"{path}: bad tensor header or value ({exc})") from exc
        if name in out:
            raise FormatError(f"{path}: duplicate tensor name {name!r}")
        out[name] = values.reshape(shape)
    return out
