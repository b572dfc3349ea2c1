"""Uncertainty-aware instance segmentation over a segmenter backend.

The pipeline partitions the foreground into confident masks and uncertain
regions by cross-checking dense bottom-up proposals, then explains each
uncertain region with a bootstrapped set of weighted mask-set hypotheses:
repeated prompt-until-covered episodes whose outcomes are deduplicated
into equivalence classes, weighted by how often each class occurred.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import Plane, fit_plane_ransac, is_degenerate
from .masks import Mask, mask_iom, mask_iou
from .render import Observation
from .segmenter import Segmenter


class RegionKind(enum.Enum):
    CONFIDENT = "confident"
    UNCERTAIN = "uncertain"


@dataclass(frozen=True)
class Region:
    """A grid region under consideration.

    seed is set only for regions demoted from a failed confident-candidate
    verification; episode generation then starts from that mask alone
    instead of collecting high-precision seeds.
    """

    footprint: Mask
    kind: RegionKind
    seed: Mask | None = None


@dataclass(frozen=True)
class RegionHypothesis:
    """One mutually disjoint mask set explaining a region.

    weight is the bootstrap frequency of this outcome (multiple of 1/N
    episodes). partial marks episodes that could not cover the region
    within the prompt budget.
    """

    masks: tuple[Mask, ...]
    weight: float
    partial: bool = False


@dataclass(frozen=True)
class SegmentationHypotheses:
    """Pipeline output: confident masks plus per-region hypothesis sets."""

    confident: tuple[Mask, ...]
    uncertain: tuple[tuple[Region, tuple[RegionHypothesis, ...]], ...]
    plane: Plane | None = None


@dataclass(frozen=True)
class ProposalParams:
    """Pipeline parameters.

    gamma: minimum fraction of a high-precision mask inside a region for it
        to seed that region's episodes.
    sigma_m: IoM threshold for overlap-graph edges between seed masks.
    sigma_u: IoU threshold below which a verification prompt demotes a
        confident candidate.
    verify_count: verification prompts per confident candidate.
    num_episodes: bootstrap episodes per uncertain region.
    alpha_frac: residual fraction of the region footprint at which an
        episode counts as complete.
    beta: minimum fraction of a prompted mask inside the residual for
        acceptance.
    dup_iou: mean best-matching IoU above which two episodes are the same
        hypothesis.
    thickness: minimum height extent for a mask to count as an object.
    max_prompts: per-episode prompt budget.
    plane_inlier_dist: RANSAC inlier distance for the support plane.
    plane_iters: RANSAC iterations for the support plane.
    """

    gamma: float = 0.5
    sigma_m: float = 0.5
    sigma_u: float = 0.7
    verify_count: int = 3
    num_episodes: int = 12
    alpha_frac: float = 0.05
    beta: float = 0.7
    dup_iou: float = 0.7
    thickness: float = 0.01
    max_prompts: int = 30
    plane_inlier_dist: float = 0.005
    plane_iters: int = 128


def duplicate_test(h_a, h_b, dup_iou: float = 0.7) -> bool:
    """Whether two mask sets are the same hypothesis.

    True when the sets have equal cardinality and the IoU-optimal
    one-to-one matching between them has mean IoU above dup_iou.
    """
    a = list(h_a)
    b = list(h_b)
    if len(a) != len(b):
        return False
    if not a:
        return True
    iou = np.zeros((len(a), len(b)))
    for i, ma in enumerate(a):
        for j, mb in enumerate(b):
            iou[i, j] = mask_iou(ma, mb)
    rows, cols = linear_sum_assignment(-iou)
    return float(iou[rows, cols].mean()) > dup_iou


def _connected_components(n: int, edges: list[tuple[int, int]]) -> list[list[int]]:
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [groups[k] for k in sorted(groups)]


def _clip_disjoint(confident: list[Mask], regions: list[Region]
                   ) -> tuple[list[Mask], list[Region]]:
    """Make all outputs pairwise disjoint: larger areas keep contested
    pixels, ties broken by content digest. Emptied entries are dropped."""
    entries: list[tuple[int, bytes, str, int]] = []
    for i, m in enumerate(confident):
        entries.append((m.area, m.key(), "c", i))
    for i, r in enumerate(regions):
        entries.append((r.footprint.area, r.footprint.key(), "r", i))
    entries.sort(key=lambda e: (-e[0], e[1]))

    taken = None
    out_conf: dict[int, Mask] = {}
    out_reg: dict[int, Region] = {}
    for _, _, kind, idx in entries:
        mask = confident[idx] if kind == "c" else regions[idx].footprint
        data = mask.data if taken is None else mask.data & ~taken
        if not data.any():
            continue
        clipped = mask.with_data(data)
        taken = clipped.data.copy() if taken is None else taken | clipped.data
        if kind == "c":
            out_conf[idx] = clipped
        else:
            r = regions[idx]
            seed = r.seed
            if seed is not None:
                seed_data = seed.data & clipped.data
                seed = seed.with_data(seed_data) if seed_data.any() else None
            out_reg[idx] = Region(clipped, r.kind, seed)
    return ([out_conf[i] for i in sorted(out_conf)],
            [out_reg[i] for i in sorted(out_reg)])


def partition_regions(obs: Observation, segmenter: Segmenter, params: ProposalParams,
                      background: np.ndarray, plane: Plane | None,
                      rng: np.random.Generator) -> tuple[list[Mask], list[Region]]:
    """Split dense proposals into verified confident masks and uncertain regions.

    Seed masks that are mostly background are discarded, exact duplicates
    collapse to one node, and the remaining masks form an overlap graph
    (edges where IoM > sigma_m). Isolated nodes become confident candidates
    and are verified with point prompts; connected components and demoted
    candidates become uncertain regions. Outputs are clipped pairwise
    disjoint.
    """
    seeds = segmenter.seed_all(obs.handle, rng)

    kept: list[Mask] = []
    seen: set[bytes] = set()
    for m in seeds:
        bg_frac = float((m.data & background).sum()) / m.area
        if bg_frac >= 0.5:
            continue
        if m.key() in seen:  # identical proposals carry no extra signal
            continue
        seen.add(m.key())
        kept.append(m)

    edges = []
    for i in range(len(kept)):
        for j in range(i + 1, len(kept)):
            if mask_iom(kept[i], kept[j]) > params.sigma_m:
                edges.append((i, j))
    components = _connected_components(len(kept), edges)

    confident: list[Mask] = []
    regions: list[Region] = []
    for comp in components:
        if len(comp) == 1:
            confident.append(kept[comp[0]])
        else:
            data = np.zeros(obs.shape, dtype=bool)
            for i in comp:
                data |= kept[i].data
            regions.append(Region(Mask(data, kept[comp[0]].source), RegionKind.UNCERTAIN))

    verified: list[Mask] = []
    for cand in confident:
        pixels = cand.pixel_array()
        demoted = False
        for _ in range(params.verify_count):
            idx = int(rng.integers(0, pixels.shape[0]))
            px = (int(pixels[idx, 0]), int(pixels[idx, 1]))
            probe = segmenter.prompt_point(obs.handle, px, rng)
            if mask_iou(probe, cand) < params.sigma_u:
                demoted = True
                break
        if demoted:
            regions.append(Region(cand, RegionKind.UNCERTAIN, seed=cand))
        else:
            verified.append(cand)

    return _clip_disjoint(verified, regions)


def _run_episode(footprint: Mask, seed: Mask | None, obs: Observation,
                 segmenter: Segmenter, params: ProposalParams, plane: Plane | None,
                 rng: np.random.Generator) -> tuple[list[Mask], bool]:
    residual = footprint.data.copy()
    target = params.alpha_frac * footprint.area
    hypothesis: list[Mask] = []
    if seed is not None:
        clipped = seed.data & footprint.data
        if clipped.any():
            hypothesis.append(seed.with_data(clipped))
            residual &= ~seed.data
    attempts = 0
    while residual.sum() > target and attempts < params.max_prompts:
        attempts += 1
        flat = np.flatnonzero(residual)
        pick = int(flat[int(rng.integers(0, flat.size))])
        px = (pick // residual.shape[1], pick % residual.shape[1])
        m = segmenter.prompt_point(obs.handle, px, rng)
        inside = m.data & residual
        if inside.sum() / m.area > params.beta and \
                not is_degenerate(m, obs, params.thickness, plane):
            hypothesis.append(m.with_data(inside))
            residual &= ~m.data
    partial = bool(residual.sum() > target)
    return hypothesis, partial


def generate_region_hypotheses(region: Region, seed_masks: list[Mask],
                               obs: Observation, segmenter: Segmenter,
                               params: ProposalParams, plane: Plane | None,
                               rng: np.random.Generator) -> list[RegionHypothesis]:
    """Bootstrap weighted hypotheses for one uncertain region.

    Runs num_episodes prompt-until-covered episodes (the first episodes
    start from the given seed masks), retries a failed episode once and
    otherwise keeps it flagged partial, then groups episodes into
    equivalence classes under duplicate_test. Returns one representative
    per class with weight |class| / num_episodes, ordered by descending
    weight (ties by first occurrence).
    """
    episode_rngs = rng.spawn(params.num_episodes)
    episodes: list[tuple[list[Mask], bool]] = []
    for i, erng in enumerate(episode_rngs):
        seed = seed_masks[i] if i < len(seed_masks) else None
        masks, partial = _run_episode(region.footprint, seed, obs, segmenter,
                                      params, plane, erng)
        if partial:  # one retry with fresh draws, then accept as-is
            masks, partial = _run_episode(region.footprint, seed, obs, segmenter,
                                          params, plane, erng)
        if not masks:  # budget spent on rejections: fall back to one blob
            masks, partial = [region.footprint], True
        episodes.append((masks, partial))

    reps: list[tuple[list[Mask], bool]] = []
    counts: list[int] = []
    for masks, partial in episodes:
        for k, (rep, _) in enumerate(reps):
            if duplicate_test(masks, rep, params.dup_iou):
                counts[k] += 1
                break
        else:
            reps.append((masks, partial))
            counts.append(1)

    order = sorted(range(len(reps)), key=lambda k: (-counts[k], k))
    n = params.num_episodes
    return [RegionHypothesis(tuple(reps[k][0]), counts[k] / n, reps[k][1])
            for k in order]


def propose_hypotheses(obs: Observation, segmenter: Segmenter,
                       params: ProposalParams, rng: np.random.Generator
                       ) -> SegmentationHypotheses:
    """Full pipeline: partition the frame, then explain each uncertain region.

    Deterministic given the rng state and the segmenter's response stream;
    the same rng is threaded through every segmenter query except episode
    internals, which draw from per-episode spawned substreams.
    """
    points = obs.cloud.reshape(-1, 3)
    plane, _ = fit_plane_ransac(points, params.plane_inlier_dist,
                                params.plane_iters, rng)
    background = plane.signed_distance(points).reshape(obs.shape) < params.plane_inlier_dist

    if bool(background.all()):
        return SegmentationHypotheses((), (), plane)

    confident, regions = partition_regions(obs, segmenter, params, background,
                                           plane, rng)

    td_masks = segmenter.high_precision(obs.handle, rng)
    uncertain = []
    for region in regions:
        if region.seed is not None:
            seeds = [region.seed]
        else:
            seeds = [m for m in td_masks
                     if (m.data & region.footprint.data).sum() / m.area > params.gamma]
        hyps = generate_region_hypotheses(region, seeds, obs, segmenter,
                                          params, plane, rng)
        uncertain.append((region, tuple(hyps)))

    return SegmentationHypotheses(tuple(confident), tuple(uncertain), plane)
