"""2-D instance masks on a fixed pixel grid, plus mask algebra and an RLE codec.

A mask is a non-empty set of (row, col) pixels stored as a read-only boolean
array. Masks are value objects: equality and hashing are content-based, so
they can key dictionaries and deduplicate across independently built copies.
"""

from __future__ import annotations

import enum
import hashlib

import numpy as np


class EmptyMaskError(ValueError):
    """Raised when an operation would produce or consume an empty mask."""


class MaskSource(enum.Enum):
    """Provenance of a mask: which kind of query produced it."""

    BOTTOM_UP = "bottom_up"
    TOP_DOWN = "top_down"
    TRACKED = "tracked"


class Mask:
    """Non-empty boolean pixel mask over an HxW grid.

    Attributes:
        data: read-only (H, W) boolean array.
        source: MaskSource tag, carried through set operations.
    """

    __slots__ = ("data", "source", "_area", "_digest")

    def __init__(self, data: np.ndarray, source: MaskSource = MaskSource.BOTTOM_UP):
        arr = np.asarray(data, dtype=bool)
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {arr.shape}")
        area = int(arr.sum())
        if area == 0:
            raise EmptyMaskError("empty mask")
        arr = arr.copy()
        arr.setflags(write=False)
        self.data = arr
        self.source = source
        self._area = area
        self._digest = hashlib.sha1(
            arr.shape[0].to_bytes(4, "little")
            + arr.shape[1].to_bytes(4, "little")
            + np.packbits(arr).tobytes()
        ).digest()

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def area(self) -> int:
        return self._area

    def pixel_array(self) -> np.ndarray:
        """Pixels as an (N, 2) int array of (row, col), row-major order."""
        return np.argwhere(self.data)

    def pixels(self) -> set[tuple[int, int]]:
        return {(int(r), int(c)) for r, c in self.pixel_array()}

    def contains(self, pixel: tuple[int, int]) -> bool:
        return bool(self.data[pixel[0], pixel[1]])

    def with_data(self, data: np.ndarray) -> "Mask":
        """New mask on the same grid with the same source tag."""
        return Mask(data, self.source)

    def intersect(self, other: "Mask") -> np.ndarray:
        _check_same_grid(self, other)
        return self.data & other.data

    def union(self, other: "Mask") -> "Mask":
        _check_same_grid(self, other)
        return Mask(self.data | other.data, self.source)

    def minus(self, other: "Mask") -> np.ndarray:
        """Set difference as a raw boolean array (may be empty)."""
        _check_same_grid(self, other)
        return self.data & ~other.data

    def key(self) -> bytes:
        """Content digest, stable across processes; suitable for dedup."""
        return self._digest

    def to_rle(self) -> str:
        return rle_encode(self.data)

    @classmethod
    def from_rle(cls, rle: str, shape: tuple[int, int],
                 source: MaskSource = MaskSource.BOTTOM_UP) -> "Mask":
        return cls(rle_decode(rle, shape), source)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Mask):
            return NotImplemented
        return self._digest == other._digest

    def __hash__(self) -> int:
        return hash(self._digest)

    def __repr__(self) -> str:
        return f"Mask(area={self._area}, shape={self.data.shape}, source={self.source.value})"


def _check_same_grid(a, b) -> None:
    if _grid_of(a) != _grid_of(b):
        raise ValueError(f"mask grids differ: {_grid_of(a)} vs {_grid_of(b)}")


def _grid_of(m) -> tuple[int, int]:
    return m.shape if isinstance(m, Mask) else np.asarray(m).shape


def _as_bool(m) -> np.ndarray:
    arr = m.data if isinstance(m, Mask) else np.asarray(m, dtype=bool)
    if arr.ndim != 2:
        raise ValueError("mask must be 2-D")
    return arr


def mask_iou(a, b) -> float:
    """Intersection over union of two masks (Mask or boolean array).

    Raises:
        EmptyMaskError: if either mask has no pixels.
        ValueError: if the masks live on different grids.
    """
    da, db = _as_bool(a), _as_bool(b)
    _check_same_grid_arrays(da, db)
    na, nb = int(da.sum()), int(db.sum())
    if na == 0 or nb == 0:
        raise EmptyMaskError("empty mask")
    inter = int((da & db).sum())
    return inter / (na + nb - inter)


def mask_iom(a, b) -> float:
    """Intersection over the smaller mask's area (containment-style overlap)."""
    da, db = _as_bool(a), _as_bool(b)
    _check_same_grid_arrays(da, db)
    na, nb = int(da.sum()), int(db.sum())
    if na == 0 or nb == 0:
        raise EmptyMaskError("empty mask")
    inter = int((da & db).sum())
    return inter / min(na, nb)


def _check_same_grid_arrays(da: np.ndarray, db: np.ndarray) -> None:
    if da.shape != db.shape:
        raise ValueError(f"mask grids differ: {da.shape} vs {db.shape}")


def rle_encode(data: np.ndarray) -> str:
    """Run-length encode a boolean grid over row-major pixel order.

    The string is a comma-separated list of run lengths, alternating
    background/foreground and always starting with a background run
    (possibly 0). Decoding with the same grid shape is an exact inverse.
    """
    flat = np.asarray(data, dtype=bool).ravel()
    if flat.size == 0:
        return "0"
    changes = np.flatnonzero(np.diff(flat.astype(np.int8)))
    bounds = np.concatenate(([0], changes + 1, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs = [0] + runs
    return ",".join(str(r) for r in runs)


def rle_decode(rle: str, shape: tuple[int, int]) -> np.ndarray:
    """Inverse of rle_encode for a given grid shape."""
    total = shape[0] * shape[1]
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
