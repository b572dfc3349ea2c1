"""Uncertainty-targeted push selection.

The planner reads the belief, finds the region with the most plausible
competing hypotheses, instantiates candidate worlds from the Cartesian
product of plausible hypotheses, samples centroid-directed pushes, rolls
each push out in every world on a pixel grid, and keeps the push whose
post-push depth images disagree most across worlds.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .belief import (Belief, BeliefParams, BeliefRegion, ObjectHypothesis,
                     region_scores)
from .render import Observation
from .scene import PushAction


@dataclass(frozen=True)
class WorldObject:
    """Completed solid: footprint pixels extruded from the table up to the
    per-pixel top height observed in the object's cloud."""

    pixels: np.ndarray   # (N, 2) int64 rows/cols on the observation grid
    heights: np.ndarray  # (N,) float64 top height per footprint pixel
    provenance: tuple    # ("confident", i) or (region, hypothesis, object)


@dataclass(frozen=True)
class World:
    objects: tuple[WorldObject, ...]
    choices: tuple[int, ...]  # chosen hypothesis index per uncertain region
    score: float              # sum of chosen hypothesis scores


@dataclass(frozen=True)
class ActionCandidate:
    action: PushAction
    region_index: int
    hypothesis_index: int
    object_index: int


@dataclass(frozen=True)
class PlannerParams:
    world_cap: int = 32
    action_count: int = 8
    # half-width of the contact corridor, in pixels, around the push line
    corridor: float = 0.75

    def __post_init__(self):
        if self.world_cap < 1:
            raise ValueError("world_cap must be at least 1")
        if self.action_count < 1:
            raise ValueError("action_count must be at least 1")


# ---------------------------------------------------------------------------
# ambiguity measures

def region_uncertainty(region: BeliefRegion, params: BeliefParams) -> int:
    """Number of hypotheses scoring strictly above the plausibility
    threshold; 0 or 1 means the region is effectively settled."""
    return sum(1 for s in region_scores(region, params.score_penalty)
               if s > params.score_threshold)


def select_target_region(belief: Belief) -> int | None:
    """Index of the most ambiguous region, or None when every region has at
    most one plausible hypothesis. Ties prefer the larger footprint, then
    the lower index."""
    best: tuple[int, int, int] | None = None
    for idx, region in enumerate(belief.regions):
        kappa = region_uncertainty(region, belief.params)
        if kappa <= 1:
            continue
        key = (-kappa, -region.footprint.area, idx)
        if best is None or key < best:
            best = key
    return None if best is None else best[2]


# ---------------------------------------------------------------------------
# world construction

def _object_footprint(obj: ObjectHypothesis, obs: Observation
                      ) -> tuple[np.ndarray, np.ndarray] | None:
    """Project an object's cloud onto the grid: footprint pixels plus the
    max point height per pixel. None when every point falls off the grid."""
    x0, y0 = obs.origin
    res = obs.resolution
    pts = obj.cloud.points
    cols = np.floor((pts[:, 0] - x0) / res).astype(np.int64)
    rows = np.floor((pts[:, 1] - y0) / res).astype(np.int64)
    h, w = obs.shape
    ok = (rows >= 0) & (rows < h) & (cols >= 0) & (cols < w)
    if not ok.any():
        return None
    rows, cols, z = rows[ok], cols[ok], pts[ok, 2]
    keys = rows * w + cols
    order = np.argsort(keys, kind="stable")
    keys, z = keys[order], z[order]
    uniq, start = np.unique(keys, return_index=True)
    heights = np.maximum.reduceat(z, start)
    pixels = np.stack([uniq // w, uniq % w], axis=1)
    return pixels, heights


def _completed(obj: ObjectHypothesis, obs: Observation, provenance: tuple
               ) -> WorldObject | None:
    fp = _object_footprint(obj, obs)
    if fp is None:
        return None
    return WorldObject(fp[0], fp[1], provenance)


def _k_best_products(option_scores: list[list[float]], cap: int
                     ) -> list[tuple[tuple[int, ...], float]]:
    """Top-cap index combinations by summed score, without materializing the
    full Cartesian product."""
    ordered = [sorted(range(len(s)), key=lambda i, s=s: -s[i])
               for s in option_scores]
    first = tuple(0 for _ in option_scores)

    def total(pos: tuple[int, ...]) -> float:
        return sum(s[ordered[d][i]] for d, (s, i)
                   in enumerate(zip(option_scores, pos)))

    heap = [(-total(first), first)]
    seen = {first}
    out: list[tuple[tuple[int, ...], float]] = []
    while heap and len(out) < cap:
        neg, pos = heapq.heappop(heap)
        out.append((tuple(ordered[d][i] for d, i in enumerate(pos)), -neg))
        for d in range(len(pos)):
            if pos[d] + 1 < len(option_scores[d]):
                nxt = pos[:d] + (pos[d] + 1,) + pos[d + 1:]
                if nxt not in seen:
                    seen.add(nxt)
                    heapq.heappush(heap, (-total(nxt), nxt))
    return out


def construct_worlds(belief: Belief, obs: Observation, world_cap: int = 32
                     ) -> list[World]:
    """Cartesian product of each region's plausible hypotheses (score above
    the belief threshold; the single best when none qualify), combined with
    the confident objects; capped at the world_cap highest-scoring worlds."""
    if world_cap < 1:
        raise ValueError("world_cap must be at least 1")
    params = belief.params
    confident = [w for i, obj in enumerate(belief.confident)
                 if (w := _completed(obj, obs, ("confident", i))) is not None]

    surviving: list[list[int]] = []
    scores: list[list[float]] = []
    for region in belief.regions:
        rs = region_scores(region, params.score_penalty)
        keep = [i for i, s in enumerate(rs) if s > params.score_threshold]
        if not keep:
            keep = [int(np.argmax(rs))]
        surviving.append(keep)
        scores.append([rs[i] for i in keep])

    total = math.prod(len(k) for k in surviving)
    if total <= world_cap:
        combos = [(pos, sum(s[i] for s, i in zip(scores, pos)))
                  for pos in itertools.product(*[range(len(k)) for k in surviving])]
        combos.sort(key=lambda c: (-c[1], c[0]))
    else:
        combos = _k_best_products(scores, world_cap)

    worlds = []
    for pos, score in combos:
        choices = tuple(surviving[r][i] for r, i in enumerate(pos))
        objects = list(confident)
        for r, hyp_idx in enumerate(choices):
            hyp = belief.regions[r].hypotheses[hyp_idx]
            for o, obj in enumerate(hyp.objects):
                w = _completed(obj, obs, (r, hyp_idx, o))
                if w is not None:
                    objects.append(w)
        worlds.append(World(tuple(objects), choices, score))
    return worlds


# ---------------------------------------------------------------------------
# action sampling

def _pixel_centers(pixels: np.ndarray, obs: Observation) -> np.ndarray:
    x0, y0 = obs.origin
    res = obs.resolution
    x = x0 + (pixels[:, 1] + 0.5) * res
    y = y0 + (pixels[:, 0] + 0.5) * res
    return np.stack([x, y], axis=1)


def _contact_point(pixels: np.ndarray, obs: Observation,
                   direction: np.ndarray, corridor: float) -> np.ndarray:
    """Footprint boundary point on the anti-direction side of the centroid:
    the rearmost footprint pixel within the corridor around the push line."""
    centers = _pixel_centers(pixels, obs)
    centroid = centers.mean(axis=0)
    rel = centers - centroid
    along = rel @ direction
    cross = rel[:, 0] * direction[1] - rel[:, 1] * direction[0]
    half = corridor * obs.resolution
    inside = np.abs(cross) <= half
    if inside.any():
        idx = np.flatnonzero(inside)[np.argmin(along[inside])]
    else:
        # degenerate footprint missing the line entirely: nearest to the line
        idx = int(np.lexsort((along, np.abs(cross)))[0])
    return centers[idx]


def sample_actions(belief: Belief, region_index: int, k: int,
                   push_distance: float, obs: Observation,
                   rng: np.random.Generator,
                   params: PlannerParams = PlannerParams()
                   ) -> list[ActionCandidate]:
    """k pushes, each aimed through the centroid of an object drawn
    uniformly from the target region's hypotheses' objects."""
    if k < 1:
        raise ValueError("k must be at least 1")
    region = belief.regions[region_index]
    pool: list[tuple[int, int, np.ndarray]] = []
    for h, hyp in enumerate(region.hypotheses):
        for o, obj in enumerate(hyp.objects):
            fp = _object_footprint(obj, obs)
            if fp is not None:
                pool.append((h, o, fp[0]))
    if not pool:
        raise ValueError("target region has no on-grid objects")

    out = []
    for _ in range(k):
        h, o, pixels = pool[int(rng.integers(len(pool)))]
        angle = rng.uniform(0.0, 2.0 * np.pi)
        direction = np.array([np.cos(angle), np.sin(angle)])
        contact = _contact_point(pixels, obs, direction, params.corridor)
        action = PushAction((float(contact[0]), float(contact[1])),
                            (float(direction[0]), float(direction[1])),
                            push_distance)
        out.append(ActionCandidate(action, region_index, h, o))
    return out


def sample_random_action(belief: Belief, push_distance: float,
                         obs: Observation, rng: np.random.Generator,
                         params: PlannerParams = PlannerParams()
                         ) -> ActionCandidate | None:
    """Baseline action: uniform object over every uncertain region's
    hypotheses (confident objects when no regions remain), pushed through
    its centroid in a uniformly random direction. None when the belief
    holds no on-grid objects at all."""
    pool: list[tuple[int, int, int, np.ndarray]] = []
    for r, region in enumerate(belief.regions):
        for h, hyp in enumerate(region.hypotheses):
            for o, obj in enumerate(hyp.objects):
                fp = _object_footprint(obj, obs)
                if fp is not None:
                    pool.append((r, h, o, fp[0]))
    if not pool:
        for i, obj in enumerate(belief.confident):
            fp = _object_footprint(obj, obs)
            if fp is not None:
                pool.append((-1, -1, i, fp[0]))
    if not pool:
        return None
    r, h, o, pixels = pool[int(rng.integers(len(pool)))]
    angle = rng.uniform(0.0, 2.0 * np.pi)
    direction = np.array([np.cos(angle), np.sin(angle)])
    contact = _contact_point(pixels, obs, direction, params.corridor)
    action = PushAction((float(contact[0]), float(contact[1])),
                        (float(direction[0]), float(direction[1])),
                        push_distance)
    return ActionCandidate(action, r, h, o)


# ---------------------------------------------------------------------------
# pixel-grid rollout

class _GridBody:
    """Mutable rollout state for one world object."""

    __slots__ = ("keys", "heights", "rmin", "rmax", "cmin", "cmax",
                 "off_r", "off_c", "pixels")

    def __init__(self, obj: WorldObject, width: int):
        self.pixels = obj.pixels
        self.keys = np.sort(obj.pixels[:, 0] * width + obj.pixels[:, 1])
        self.heights = obj.heights
        self.rmin = int(obj.pixels[:, 0].min())
        self.rmax = int(obj.pixels[:, 0].max())
        self.cmin = int(obj.pixels[:, 1].min())
        self.cmax = int(obj.pixels[:, 1].max())
        self.off_r = 0
        self.off_c = 0


def _overlaps(a: _GridBody, da: tuple[int, int], b: _GridBody,
              width: int) -> bool:
    ar0, ar1 = a.rmin + a.off_r + da[0], a.rmax + a.off_r + da[0]
    ac0, ac1 = a.cmin + a.off_c + da[1], a.cmax + a.off_c + da[1]
    br0, br1 = b.rmin + b.off_r, b.rmax + b.off_r
    bc0, bc1 = b.cmin + b.off_c, b.cmax + b.off_c
    if ar1 < br0 or br1 < ar0 or ac1 < bc0 or bc1 < ac0:
        return False
    shift_a = (a.off_r + da[0]) * width + a.off_c + da[1]
    shift_b = b.off_r * width + b.off_c
    sa = a.keys + shift_a
    sb = b.keys + shift_b
    idx = np.searchsorted(sb, sa)
    idx = np.clip(idx, 0, sb.size - 1)
    return bool((sb[idx] == sa).any())


def _in_grid(body: _GridBody, d: tuple[int, int], shape: tuple[int, int]) -> bool:
    return (body.rmin + body.off_r + d[0] >= 0
            and body.rmax + body.off_r + d[0] < shape[0]
            and body.cmin + body.off_c + d[1] >= 0
            and body.cmax + body.off_c + d[1] < shape[1])


def _first_hit_pixel(bodies: list[_GridBody], action: PushAction,
                     obs: Observation) -> int | None:
    """Index of the first body whose footprint the pusher path enters,
    marching at half-pixel steps from the contact point."""
    x0, y0 = obs.origin
    res = obs.resolution
    h, w = obs.shape
    steps = max(1, int(math.ceil(action.distance / (0.5 * res))))
    tx, ty = action.target
    dx, dy = action.direction
    for s in range(steps + 1):
        t = min(action.distance, s * 0.5 * res)
        c = int(math.floor((tx + t * dx - x0) / res))
        r = int(math.floor((ty + t * dy - y0) / res))
        if not (0 <= r < h and 0 <= c < w):
            continue
        key = r * w + c
        for i, body in enumerate(bodies):
            j = np.searchsorted(body.keys, key)
            if j < body.keys.size and body.keys[j] == key:
                return i
    return None


def _render_grid(bodies: list[_GridBody], shape: tuple[int, int]) -> np.ndarray:
    depth = np.zeros(shape, dtype=np.float64)
    for body in bodies:
        r = body.pixels[:, 0] + body.off_r
        c = body.pixels[:, 1] + body.off_c
        np.maximum.at(depth, (r, c), body.heights)
    return depth


def _rollout(world: World, action: PushAction, obs: Observation) -> np.ndarray:
    """Depth image after simulating the push in one world: pure-translation
    pixel dynamics with contact-chain pickup, jamming against grid bounds."""
    shape = obs.shape
    width = shape[1]
    bodies = [_GridBody(o, width) for o in world.objects]
    hit = _first_hit_pixel(bodies, action, obs)
    if hit is None:
        return _render_grid(bodies, shape)

    res = obs.resolution
    vr = action.direction[1] * action.distance / res
    vc = action.direction[0] * action.distance / res
    steps = int(math.ceil(max(abs(vr), abs(vc))))
    moving = {hit}
    prev = (0, 0)
    for s in range(1, steps + 1):
        frac = s / steps
        target = (int(round(vr * frac)), int(round(vc * frac)))
        delta = (target[0] - prev[0], target[1] - prev[1])
        prev = target
        if delta == (0, 0):
            continue
        # pick up everything in the way before moving, so relative
        # positions inside the moving set never change
        while True:
            joined = False
            for j, other in enumerate(bodies):
                if j in moving:
                    continue
                if any(_overlaps(bodies[i], delta, other, width) for i in moving):
                    moving.add(j)
                    joined = True
            if not joined:
                break
        if any(not _in_grid(bodies[i], delta, shape) for i in moving):
            break  # chain jammed against the table edge
        for i in moving:
            bodies[i].off_r += delta[0]
            bodies[i].off_c += delta[1]
    return _render_grid(bodies, shape)


# ---------------------------------------------------------------------------
# objective

def action_objectives(worlds: list[World], candidates: list[ActionCandidate],
                      obs: Observation) -> list[float]:
    """Depth-disagreement objective per candidate: mean over worlds of the
    mean absolute deviation from the cross-world mean depth, over pixels
    covered by any world before or after the push."""
    if not worlds or not candidates:
        raise ValueError("need at least one world and one candidate")
    shape = obs.shape
    width = shape[1]
    before = [_render_grid([_GridBody(o, width) for o in w.objects], shape)
              for w in worlds]
    base_active = np.zeros(shape, dtype=bool)
    for img in before:
        base_active |= img > 0.0
    out = []
    for cand in candidates:
        after = [_rollout(w, cand.action, obs) for w in worlds]
        active = base_active.copy()
        for img in after:
            active |= img > 0.0
        if not active.any():
            out.append(0.0)
            continue
        stack = np.stack([img[active] for img in after])
        mean = stack.mean(axis=0)
        out.append(float(np.abs(stack - mean).mean(axis=1).mean()))
    return out


def select_action(worlds: list[World], candidates: list[ActionCandidate],
                  obs: Observation) -> ActionCandidate:
    """Candidate maximizing the depth-disagreement objective; ties keep the
    lowest index."""
    objectives = action_objectives(worlds, candidates, obs)
    return candidates[int(np.argmax(objectives))]
