"""Mask tracking across frames and rigidity-based belief updates.

After an interaction, every hypothesized object's mask is tracked into the
new frame, the object's accumulated cloud is registered against the newly
observed masked cloud, and the registration inlier fraction becomes the
interaction's rigidity score: objects wrongly merged from independently
moving parts score low, whole rigid objects score high. Scores are folded
into wholeness weighted by how much the object actually moved.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Protocol

import numpy as np

from .belief import Belief, BeliefHypothesis, BeliefRegion, ObjectHypothesis
from .geometry import PointSet, register_rigid_ransac
from .masks import Mask, MaskSource
from .render import Observation
from .segmenter import boundary_noise


@dataclass(frozen=True)
class TrackResult:
    """Tracked mask plus the surviving pixel correspondences behind it."""

    mask: Mask
    prev_pixels: np.ndarray  # (N, 2) pixels in the previous frame
    new_pixels: np.ndarray   # (N, 2) matching pixels in the new frame


class Tracker(Protocol):
    def track(self, prev_obs: Observation, prev_mask: Mask, new_obs: Observation,
              rng: np.random.Generator) -> TrackResult | None:
        """Propagate a mask into the new frame, or None when fully lost."""


class SimTracker:
    """Tracker driven by the simulator's ground-truth correspondence map,
    with optional pixel dropout and boundary jitter standing in for the
    failure modes of a learned video tracker."""

    def __init__(self, correspondence: np.ndarray, dropout: float = 0.0,
                 jitter: int = 0):
        if correspondence.ndim != 3 or correspondence.shape[2] != 2:
            raise ValueError("correspondence must be (H, W, 2)")
        if not 0.0 <= dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        self.correspondence = correspondence
        self.dropout = dropout
        self.jitter = jitter

    def track(self, prev_obs: Observation, prev_mask: Mask, new_obs: Observation,
              rng: np.random.Generator) -> TrackResult | None:
        px = prev_mask.pixel_array()
        targets = self.correspondence[px[:, 0], px[:, 1]]
        alive = targets[:, 0] >= 0
        if self.dropout > 0.0:
            alive = alive & (rng.random(px.shape[0]) >= self.dropout)
        if not alive.any():
            return None
        src = px[alive]
        dst = targets[alive]
        data = np.zeros(new_obs.shape, dtype=bool)
        data[dst[:, 0], dst[:, 1]] = True
        if self.jitter > 0:
            data = boundary_noise(data, self.jitter, rng)
            keep = data[dst[:, 0], dst[:, 1]]
            src, dst = src[keep], dst[keep]
            if src.shape[0] == 0:
                return None
        return TrackResult(Mask(data, MaskSource.TRACKED), src, dst)


@dataclass(frozen=True)
class RegistrationParams:
    """RANSAC registration settings; inlier_dist None means
    0.5 * resolution * sqrt(2), the pixel-center quantization radius."""

    iters: int = 256
    inlier_dist: float | None = None

    def resolved_inlier_dist(self, resolution: float) -> float:
        if self.inlier_dist is not None:
            return self.inlier_dist
        return 0.5 * resolution * np.sqrt(2.0)


def recompute_wholeness(history, p0: float, min_weight: float) -> float:
    """Displacement-weighted mean of rigidity scores, with the prior as a
    virtual entry of weight min_weight and every displacement floored at
    min_weight so zero-motion evidence cannot erase the prior."""
    num = min_weight * p0
    den = min_weight
    for _, score, disp in history:
        w = max(disp, min_weight)
        num += w * score
        den += w
    return num / den


def _voxel_merge(fresh: PointSet, carried: np.ndarray, cell: float) -> PointSet:
    """Union of fresh (provenance-bearing) and carried points, deduplicated
    on a voxel hash; fresh points win shared cells."""
    pts = np.vstack([fresh.points, carried])
    pix = np.vstack([fresh.pixels,
                     np.full((carried.shape[0], 2), -1, dtype=np.int64)])
    keys = np.floor(pts / cell).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    keep = np.sort(first)
    return PointSet(pts[keep], pix[keep])


def _update_object(obj: ObjectHypothesis, step: int, prev_obs: Observation,
                   new_obs: Observation, tracker: Tracker,
                   reg: RegistrationParams, params, rng: np.random.Generator
                   ) -> ObjectHypothesis:
    tracked = tracker.track(prev_obs, obj.mask, new_obs, rng)
    if tracked is None:
        history = obj.score_history + ((step, obj.wholeness, params.min_weight),)
        return replace(obj, score_history=history,
                       wholeness=recompute_wholeness(history, params.prior_wholeness,
                                                     params.min_weight))

    # index maps: previous-frame pixel -> row in the object cloud,
    # new-frame pixel -> row in the freshly observed cloud
    new_px = tracked.mask.pixel_array()
    fresh_points = new_obs.cloud[new_px[:, 0], new_px[:, 1]]
    fresh = PointSet(fresh_points, new_px)

    width = new_obs.shape[1]
    dst_row = {int(r) * width + int(c): i for i, (r, c) in enumerate(new_px)}
    src_row: dict[int, int] = {}
    if obj.cloud.pixels is not None:
        for i, (r, c) in enumerate(obj.cloud.pixels):
            if r >= 0:
                src_row[int(r) * width + int(c)] = i
    pairs = []
    for (pr, pc), (nr, nc) in zip(tracked.prev_pixels, tracked.new_pixels):
        s = src_row.get(int(pr) * width + int(pc))
        d = dst_row.get(int(nr) * width + int(nc))
        if s is not None and d is not None:
            pairs.append((s, d))

    if len(pairs) < 3:
        # under-determined registration: keep the cloud, still adopt the
        # tracked mask so later tracking stays on the current frame
        history = obj.score_history + ((step, 0.0, params.min_weight),)
        return replace(obj, mask=tracked.mask, score_history=history,
                       wholeness=recompute_wholeness(history, params.prior_wholeness,
                                                     params.min_weight))

    pair_idx = np.asarray(pairs, dtype=np.int64)
    inlier_dist = reg.resolved_inlier_dist(new_obs.resolution)
    transform, fraction = register_rigid_ransac(
        obj.cloud, fresh, pair_idx, inlier_dist, reg.iters, rng)
    # evidence weight: how much the tracked points moved. The fitted motion
    # understates this exactly when registration refutes rigidity (the
    # consensus part of a broken object may stand still while the rest
    # moves), so take the larger of fitted and mean apparent displacement.
    fitted = float(np.linalg.norm(transform.translation)) \
        + params.rotation_weight * transform.rotation_angle()
    apparent = float(np.mean(np.linalg.norm(
        fresh.points[pair_idx[:, 1]] - obj.cloud.points[pair_idx[:, 0]],
        axis=1)))
    displacement = max(fitted, apparent)

    carried = transform.apply(obj.cloud.points)
    cloud = _voxel_merge(fresh, carried, 0.5 * new_obs.resolution)
    history = obj.score_history + ((step, fraction, displacement),)
    return ObjectHypothesis(
        cloud=cloud,
        wholeness=recompute_wholeness(history, params.prior_wholeness,
                                      params.min_weight),
        score_history=history,
        mask=tracked.mask,
    )


def update_belief(belief: Belief, prev_obs: Observation, new_obs: Observation,
                  tracker: Tracker, reg: RegistrationParams,
                  rng: np.random.Generator) -> Belief:
    """Track and rescore every object through one interaction.

    Structure is preserved exactly: same regions, same hypotheses, same
    bootstrap weights; only object clouds, masks, histories, and wholeness
    values change. Objects whose track is lost, or whose tracked mask keeps
    fewer than 3 correspondences, keep their previous cloud and record a
    floor-weighted history entry.
    """
    step = 1 + max((h[0] for o in belief.all_objects() for h in o.score_history),
                   default=0)

    def upd(o: ObjectHypothesis) -> ObjectHypothesis:
        return _update_object(o, step, prev_obs, new_obs, tracker, reg,
                              belief.params, rng)

    confident = tuple(upd(o) for o in belief.confident)
    regions = tuple(
        BeliefRegion(region.footprint,
                     tuple(BeliefHypothesis(tuple(upd(o) for o in h.objects), h.weight)
                           for h in region.hypotheses))
        for region in belief.regions)
    return Belief(confident, regions, belief.params)
