"""Run-length codec for binary masks on the wire.

Row-major pixel order. The string is a comma-separated list of run
lengths alternating background/foreground, always starting with a
background run (possibly 0). The grid shape travels separately in the
message, so the string alone does not identify a mask.
"""

from __future__ import annotations

import numpy as np


def encode(data: np.ndarray) -> str:
    flat = np.asarray(data, dtype=bool).ravel()
    if flat.size == 0:
        return "0"
    changes = np.flatnonzero(np.diff(flat.astype(np.int8)))
    bounds = np.concatenate(([0], changes + 1, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return ",".join(str(r) for r in runs)


def decode(rle: str, shape: tuple[int, int]) -> np.ndarray:
    total = int(shape[0]) * int(shape[1])
    try:
        runs = [int(tok) for tok in rle.split(",")]
    except ValueError as exc:
        raise ValueError(f"malformed RLE string: {rle!r}") from exc
    if any(r < 0 for r in runs):
        raise ValueError("malformed RLE string: negative run")
    if sum(runs) != total:
        raise ValueError(f"RLE covers {sum(runs)} pixels, grid has {total}")
    flat = np.zeros(total, dtype=bool)
    pos = 0
    value = False
    for run in runs:
        if value:
            flat[pos:pos + run] = True
        pos += run
        value = not value
    return flat.reshape(shape)
