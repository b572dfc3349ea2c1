"""Segmentation query interface and stochastic ground-truth oracles.

Oracles answer point-prompt, dense-seed, and high-precision queries from
registered frames, injecting configurable structured errors: part-level
over-segmentation, merges with touching neighbors, and morphological
boundary noise. Queries take an explicit rng so results are reproducible
and the oracle itself holds no mutable state beyond its frame registry
(and an optional event log used by calibration tests).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np
from scipy import ndimage

from .masks import Mask, MaskSource
from .render import Observation, rasterize
from .scene import Scene, bodies_in_contact

# gap under which two bodies are close enough for prompts to merge them.
# Learned segmenters confuse adjacent boundaries well before actual contact,
# so the merge neighborhood is wider than the physical contact tolerance.
MERGE_RANGE = 0.05


class StaleFrameError(KeyError):
    """Raised for queries against an unregistered or expired frame handle."""


@runtime_checkable
class Segmenter(Protocol):
    """Structural interface every segmentation backend implements."""

    def seed_all(self, handle: str, rng: np.random.Generator) -> list[Mask]:
        """Dense bottom-up proposals over the whole frame."""

    def prompt_point(self, handle: str, pixel: tuple[int, int],
                     rng: np.random.Generator) -> Mask:
        """Single mask containing the prompt pixel."""

    def high_precision(self, handle: str, rng: np.random.Generator) -> list[Mask]:
        """One slower, higher-quality full-frame segmentation pass."""


@dataclass(frozen=True)
class OracleConfig:
    """Error model for the stochastic oracle.

    p_part: probability a point prompt returns only the visible part under
        the pixel instead of the whole body.
    p_merge: probability a point prompt returns the body merged with one
        uniformly chosen touching neighbor.
    boundary_noise: maximum morphological dilation/erosion radius (pixels).
    td_recall: probability each body appears in a high-precision pass.
    td_merge: probability a recalled body is merged with a touching neighbor.
    seeds_per_body: prompts per body in seed_all.
    """

    p_part: float = 0.0
    p_merge: float = 0.0
    boundary_noise: int = 0
    td_recall: float = 1.0
    td_merge: float = 0.0
    seeds_per_body: int = 3

    def __post_init__(self):
        for name in ("p_part", "p_merge", "td_recall", "td_merge"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.p_part + self.p_merge > 1.0:
            raise ValueError("p_part + p_merge must not exceed 1")
        if self.boundary_noise < 0:
            raise ValueError("boundary_noise must be non-negative")
        if self.seeds_per_body < 1:
            raise ValueError("seeds_per_body must be at least 1")


@dataclass
class OracleEventLog:
    """Counters of realized oracle events, for calibration ground truth."""

    prompts: int = 0
    part_masks: int = 0
    merged_masks: int = 0
    td_masks: int = 0
    td_merged_masks: int = 0


@dataclass
class _FrameData:
    labels: np.ndarray
    part_idx: np.ndarray
    body_ids: list[int]
    neighbors: dict[int, list[int]]
    background: np.ndarray


def _disk(radius: int) -> np.ndarray:
    r = np.arange(-radius, radius + 1)
    return (r[:, None] ** 2 + r[None, :] ** 2) <= radius ** 2


def boundary_noise(data: np.ndarray, max_radius: int, rng: np.random.Generator,
                   protect: tuple[int, int] | None = None) -> np.ndarray:
    """Randomly dilate or erode by a radius up to max_radius.

    The protected pixel is never eroded away, and noise never empties a
    mask (the unnoised mask is returned instead).
    """
    if max_radius <= 0:
        return data
    k = int(rng.integers(0, max_radius + 1))
    if k == 0:
        return data
    dilate = rng.random() < 0.5
    selem = _disk(k)
    if dilate:
        out = ndimage.binary_dilation(data, structure=selem)
    else:
        out = ndimage.binary_erosion(data, structure=selem)
        if protect is not None:
            out = out.copy()
            out[protect] = True
    if not out.any():
        return data
    return out


class OracleSegmenter:
    """Ground-truth-backed segmenter with structured stochastic errors.

    Frames are registered from the ground-truth scene plus its rendered
    observation; queries then see only the frame handle.
    """

    def __init__(self, config: OracleConfig, log: OracleEventLog | None = None):
        self.config = config
        self.log = log
        self._frames: dict[str, _FrameData] = {}

    def register(self, scene: Scene, obs: Observation) -> str:
        """Register a frame; returns the observation handle."""
        _, labels, part_idx = rasterize(scene, obs.resolution)
        if labels.shape != obs.shape:
            raise ValueError("scene raster does not match the observation grid")
        ids = sorted(b.id for b in scene.bodies)
        by_id = {b.id: b for b in scene.bodies}
        neighbors = {i: sorted(j for j in ids if j != i
                               and bodies_in_contact(by_id[i], by_id[j], MERGE_RANGE))
                     for i in ids}
        self._frames[obs.handle] = _FrameData(
            labels=labels, part_idx=part_idx, body_ids=ids,
            neighbors=neighbors, background=labels == 0)
        return obs.handle

    def forget(self, handle: str) -> None:
        self._frames.pop(handle, None)

    def _frame(self, handle: str) -> _FrameData:
        try:
            return self._frames[handle]
        except KeyError:
            raise StaleFrameError("stale frame") from None

    # -- queries ------------------------------------------------------------

    def prompt_point(self, handle: str, pixel: tuple[int, int],
                     rng: np.random.Generator) -> Mask:
        frame = self._frame(handle)
        r, c = int(pixel[0]), int(pixel[1])
        h, w = frame.labels.shape
        if not (0 <= r < h and 0 <= c < w):
            raise ValueError(f"prompt pixel {pixel} outside the {h}x{w} grid")
        if self.log is not None:
            self.log.prompts += 1
        body = int(frame.labels[r, c])
        if body == 0:
            return Mask(frame.background, MaskSource.BOTTOM_UP)

        cfg = self.config
        u = float(rng.random())
        if u < cfg.p_part:
            part = int(frame.part_idx[r, c])
            data = (frame.labels == body) & (frame.part_idx == part)
            if self.log is not None:
                self.log.part_masks += 1
        elif u < cfg.p_part + cfg.p_merge and frame.neighbors[body]:
            other = _choose(frame.neighbors[body], rng)
            data = (frame.labels == body) | (frame.labels == other)
            if self.log is not None:
                self.log.merged_masks += 1
        else:
            data = frame.labels == body
        data = boundary_noise(data, cfg.boundary_noise, rng, protect=(r, c))
        return Mask(data, MaskSource.BOTTOM_UP)

    def seed_all(self, handle: str, rng: np.random.Generator) -> list[Mask]:
        frame = self._frame(handle)
        masks: list[Mask] = []
        for body in frame.body_ids:
            footprint = np.argwhere(frame.labels == body)
            if footprint.shape[0] == 0:
                continue  # fully occluded body yields no seeds
            for _ in range(self.config.seeds_per_body):
                idx = int(rng.integers(0, footprint.shape[0]))
                px = (int(footprint[idx, 0]), int(footprint[idx, 1]))
                masks.append(self.prompt_point(handle, px, rng))
        return masks

    def high_precision(self, handle: str, rng: np.random.Generator) -> list[Mask]:
        frame = self._frame(handle)
        cfg = self.config
        masks: list[Mask] = []
        for body in frame.body_ids:
            if not (frame.labels == body).any():
                continue
            if rng.random() >= cfg.td_recall:
                continue
            data = frame.labels == body
            if rng.random() < cfg.td_merge and frame.neighbors[body]:
                other = _choose(frame.neighbors[body], rng)
                data = data | (frame.labels == other)
                if self.log is not None:
                    self.log.td_merged_masks += 1
            data = boundary_noise(data, cfg.boundary_noise, rng)
            masks.append(Mask(data, MaskSource.TOP_DOWN))
            if self.log is not None:
                self.log.td_masks += 1
        return masks


def _choose(items: list[int], rng: np.random.Generator) -> int:
    return items[int(rng.integers(0, len(items)))]


class SeededSegmenter:
    """Adapter that owns its random stream and ignores caller-passed rngs.

    Useful when the noise source must live with the segmenter itself, e.g.
    a backend served behind a process boundary where no rng crosses the
    wire: pairing two SeededSegmenters with equal seeds makes an in-process
    and a remote run consume identical streams for identical query orders.
    """

    def __init__(self, inner, seed: int):
        self.inner = inner
        self._rng = np.random.default_rng(seed)

    def seed_all(self, handle: str, rng=None) -> list[Mask]:
        return self.inner.seed_all(handle, self._rng)

    def prompt_point(self, handle: str, pixel: tuple[int, int], rng=None) -> Mask:
        return self.inner.prompt_point(handle, pixel, self._rng)

    def high_precision(self, handle: str, rng=None) -> list[Mask]:
        return self.inner.high_precision(handle, self._rng)
