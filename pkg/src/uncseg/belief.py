"""Factored belief over scene segmentations.

The belief keeps confident objects and, per uncertain region, a weighted
set of object-set hypotheses. Each object carries an accumulated 3-D point
cloud (with pixel provenance for tracking), a wholeness score in [0, 1]
estimating how likely the object is a single rigid whole, and the history
of per-interaction rigidity evidence behind that score.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import PointSet
from .hypotheses import SegmentationHypotheses
from .masks import Mask
from .render import Observation

# heights this close to the support plane are treated as background
SURFACE_EPS = 1e-9


@dataclass(frozen=True)
class BeliefParams:
    """Scoring parameters.

    score_penalty: per extra object penalty (lambda) in the hypothesis score.
    score_threshold: score above which a hypothesis counts as plausible
        (delta), used by ambiguity measures and world construction.
    prior_wholeness: initial wholeness for fresh objects (p0).
    min_weight: floor on displacement weights (eps_w); also the weight of
        the prior when recomputing wholeness.
    rotation_weight: radians-to-meters factor (kappa_rot) when measuring
        interaction displacement.
    evidence_gap: smallest real displacement for an interaction event to
        count as evidence at all; floor-weighted entries from untouched or
        track-lost objects sit below it.
    refute_below: rigidity score under which a moved object counts as
        refuted. A push that merely drags hypothesized objects along leaves
        every rigidity score near 1 and proves nothing about the region's
        structure; only a refutation makes the interaction discriminating.
    """

    score_penalty: float = 0.1
    score_threshold: float = 0.5
    prior_wholeness: float = 0.5
    min_weight: float = 1e-3
    rotation_weight: float = 0.1
    evidence_gap: float = 0.01
    refute_below: float = 0.9


@dataclass(frozen=True)
class ObjectHypothesis:
    """One hypothesized object.

    score_history holds (step, rigidity score, displacement) triples, one
    per interaction the object was tracked through.
    """

    cloud: PointSet
    wholeness: float
    score_history: tuple[tuple[int, float, float], ...]
    mask: Mask


@dataclass(frozen=True)
class BeliefHypothesis:
    """A mask-set hypothesis lifted to objects, with its bootstrap weight."""

    objects: tuple[ObjectHypothesis, ...]
    weight: float


@dataclass(frozen=True)
class BeliefRegion:
    footprint: Mask
    hypotheses: tuple[BeliefHypothesis, ...]

    def min_object_count(self) -> int:
        return min(len(h.objects) for h in self.hypotheses)


@dataclass(frozen=True)
class Belief:
    confident: tuple[ObjectHypothesis, ...]
    regions: tuple[BeliefRegion, ...]
    params: BeliefParams

    def all_objects(self) -> list[ObjectHypothesis]:
        out = list(self.confident)
        for region in self.regions:
            for hyp in region.hypotheses:
                out.extend(hyp.objects)
        return out


def _lift_mask(mask: Mask, obs: Observation, p0: float) -> ObjectHypothesis | None:
    """Extract an object from the cloud under a mask; None if nothing valid.

    Pixels at support height carry no object surface and are dropped, so
    boundary bleed onto the table does not pollute the object cloud.
    """
    pixels = mask.pixel_array()
    z = obs.depth[pixels[:, 0], pixels[:, 1]]
    valid = z > SURFACE_EPS
    if not valid.any():
        return None
    pixels = pixels[valid]
    points = obs.cloud[pixels[:, 0], pixels[:, 1]]
    data = np.zeros(obs.shape, dtype=bool)
    data[pixels[:, 0], pixels[:, 1]] = True
    return ObjectHypothesis(
        cloud=PointSet(points, pixels),
        wholeness=p0,
        score_history=(),
        mask=mask.with_data(data),
    )


def init_belief(result: SegmentationHypotheses, obs: Observation,
                params: BeliefParams) -> Belief:
    """Lift a segmentation into an initial belief.

    Masks with no valid cloud points are dropped; hypotheses that lose all
    their objects are dropped and the remaining weights renormalized;
    regions that lose all hypotheses are dropped.
    """
    confident = tuple(o for m in result.confident
                      if (o := _lift_mask(m, obs, params.prior_wholeness)) is not None)
    regions: list[BeliefRegion] = []
    for region, hyps in result.uncertain:
        lifted: list[BeliefHypothesis] = []
        for h in hyps:
            objs = tuple(o for m in h.masks
                         if (o := _lift_mask(m, obs, params.prior_wholeness)) is not None)
            if objs:
                lifted.append(BeliefHypothesis(objs, h.weight))
        if not lifted:
            continue
        total = sum(h.weight for h in lifted)
        lifted = [replace(h, weight=h.weight / total) for h in lifted]
        regions.append(BeliefRegion(region.footprint, tuple(lifted)))
    return Belief(confident, tuple(regions), params)


def hypothesis_score(hypothesis: BeliefHypothesis, penalty: float,
                     min_count: int) -> float:
    """Mean wholeness minus a penalty per object beyond the region minimum."""
    mean = float(np.mean([o.wholeness for o in hypothesis.objects]))
    return mean - penalty * (len(hypothesis.objects) - min_count)


def region_scores(region: BeliefRegion, penalty: float) -> list[float]:
    m = region.min_object_count()
    return [hypothesis_score(h, penalty, m) for h in region.hypotheses]


def _mask_lex_key(hyp: BeliefHypothesis) -> tuple[str, ...]:
    return tuple(sorted(o.mask.to_rle() for o in hyp.objects))


def region_interacted(region: BeliefRegion, evidence_gap: float,
                      refute_below: float) -> bool:
    """True once interaction evidence refuted some object in the region.

    A push that drags hypothesized objects along rigidly leaves every
    rigidity score near 1 no matter which hypothesis is true, so it cannot
    separate them; the interaction becomes discriminating only when some
    object that really moved (displacement above evidence_gap) failed the
    rigidity test.
    """
    return any(d > evidence_gap and s < refute_below
               for h in region.hypotheses for o in h.objects
               for (_, s, d) in o.score_history)


def select_hypothesis(region: BeliefRegion, params: BeliefParams) -> BeliefHypothesis:
    """Most likely hypothesis for one region.

    Until an interaction produces refutation evidence the bootstrap weight
    is primary (scores are all prior-valued and rigid co-motion keeps them
    indistinguishable); afterwards the score is primary. Ties: the other
    criterion, then fewer objects, then lexicographic mask order for
    determinism.
    """
    m = region.min_object_count()
    scored = [(hypothesis_score(h, params.score_penalty, m), h) for h in region.hypotheses]
    if region_interacted(region, params.evidence_gap, params.refute_below):
        key = lambda sh: (-sh[0], -sh[1].weight, len(sh[1].objects), _mask_lex_key(sh[1]))
    else:
        key = lambda sh: (-sh[1].weight, -sh[0], len(sh[1].objects), _mask_lex_key(sh[1]))
    return min(scored, key=key)[1]


def most_likely(belief: Belief) -> list[ObjectHypothesis]:
    """Confident objects plus the selected hypothesis of every region."""
    out = list(belief.confident)
    for region in belief.regions:
        out.extend(select_hypothesis(region, belief.params).objects)
    return out


def project_to_masks(objects: list[ObjectHypothesis], obs: Observation) -> list[Mask]:
    """Current-frame 2-D masks of objects, restricted to visible pixels.

    A pixel is visible when the observed top surface matches the object's
    own surface height there; objects with no visible pixels are omitted.
    Carried cloud points (pixel provenance lost to tracking) are projected
    back onto the grid, so a tracked mask thinned by correspondence
    rounding does not thin the reported mask.
    """
    height, width = obs.shape
    x0, y0 = obs.origin
    masks: list[Mask] = []
    for o in objects:
        if o.cloud.pixels is None:
            continue
        px = np.array(o.cloud.pixels, copy=True)
        carried = px[:, 0] < 0
        if carried.any():
            pts = o.cloud.points[carried]
            px[carried, 0] = np.floor((pts[:, 1] - y0) / obs.resolution).astype(np.int64)
            px[carried, 1] = np.floor((pts[:, 0] - x0) / obs.resolution).astype(np.int64)
        inside = ((px[:, 0] >= 0) & (px[:, 0] < height)
                  & (px[:, 1] >= 0) & (px[:, 1] < width))
        px = px[inside]
        if px.shape[0] == 0:
            continue
        z = o.cloud.points[inside, 2]
        match = np.abs(obs.depth[px[:, 0], px[:, 1]] - z) <= SURFACE_EPS
        keep = px[match]
        if keep.shape[0] == 0:
            continue
        data = np.zeros(obs.shape, dtype=bool)
        data[keep[:, 0], keep[:, 1]] = True
        masks.append(o.mask.with_data(data))
    return masks
