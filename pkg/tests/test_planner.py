"""Target selection, world construction, and push scoring."""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from pytest import approx

from uncseg.belief import Belief, BeliefParams, ObjectHypothesis
from uncseg.geometry import PointSet
from uncseg.masks import Mask
from uncseg.planner import (ActionCandidate, PlannerParams, action_objectives,
                            construct_worlds, region_uncertainty,
                            sample_actions, sample_random_action,
                            select_action, select_target_region)
from uncseg.render import render
from uncseg.scene import PushAction, Scene

from .conftest import ascii_mask, box_body, make_obj, make_region

RES = 0.01

M_A = ascii_mask("##......")
M_B = ascii_mask("....##..")
M_WIDE = ascii_mask("####....")


def flat_region(footprint, *wholeness_per_hyp):
    """Region whose hypotheses are single zero-cloud objects on M_A."""
    hyps = [[make_obj(M_A, w)] for w in wholeness_per_hyp]
    return make_region(footprint, hyps, [1.0 / len(hyps)] * len(hyps))


def pair_obs():
    """Two boxes sharing the face x = 0.33, plus a lone box further right."""
    scene = Scene((0.0, 0.8, 0.0, 0.4),
                  (box_body(1, 0.255, 0.20, 0.15, 0.10, 0.04),
                   box_body(2, 0.38, 0.20, 0.10, 0.10, 0.05),
                   box_body(3, 0.60, 0.20, 0.08, 0.08, 0.03)))
    return render(scene, RES)


def body_mask(obs, body_id):
    return Mask(obs.labels == body_id)


def off_grid_object(mask):
    cloud = PointSet(np.array([[-1.0, -1.0, 0.05]]), np.array([[0, 0]]))
    return ObjectHypothesis(cloud, 0.9, (), mask)


# ---------------------------------------------------------------------------
# ambiguity measures

def test_region_uncertainty_counts_plausible_hypotheses():
    region = make_region(M_A.union(M_B),
                         [[make_obj(M_A.union(M_B), 0.8)],
                          [make_obj(M_A, 0.7), make_obj(M_B, 0.7)]],
                         [0.5, 0.5])
    # merged scores 0.8, split 0.7 - 0.1 = 0.6, both above 0.5
    assert region_uncertainty(region, BeliefParams()) == 2
    assert region_uncertainty(region, BeliefParams(score_threshold=0.7)) == 1
    assert region_uncertainty(region, BeliefParams(score_threshold=0.9)) == 0


def test_region_uncertainty_threshold_is_strict():
    region = flat_region(M_A, 0.5)
    assert region_uncertainty(region, BeliefParams(score_threshold=0.5)) == 0
    assert region_uncertainty(region, BeliefParams(score_threshold=0.4375)) == 1


def test_select_target_region_most_ambiguous():
    belief = Belief((), (flat_region(M_A, 0.8, 0.3),
                         flat_region(M_A, 0.9, 0.8, 0.7),
                         flat_region(M_A, 0.9, 0.7)), BeliefParams())
    assert select_target_region(belief) == 1


def test_select_target_region_none_when_settled():
    assert select_target_region(Belief((), (), BeliefParams())) is None
    belief = Belief((), (flat_region(M_A, 0.8, 0.3),
                         flat_region(M_A, 0.9)), BeliefParams())
    assert select_target_region(belief) is None


def test_select_target_region_ties():
    small = flat_region(M_A, 0.9, 0.7)
    big = flat_region(M_WIDE, 0.9, 0.7)
    assert select_target_region(Belief((), (small, big), BeliefParams())) == 1
    assert select_target_region(Belief((), (big, big), BeliefParams())) == 0


# ---------------------------------------------------------------------------
# world construction

def pair_belief(obs, params=BeliefParams()):
    """Pair region with 3 hypotheses, lone-box region with 2."""
    a, b, c = (body_mask(obs, i) for i in (1, 2, 3))
    union = a.union(b)
    pair = make_region(union,
                       [[make_obj(union, 0.9, obs=obs)],
                        [make_obj(a, 0.85, obs=obs), make_obj(b, 0.85, obs=obs)],
                        [make_obj(a, 0.7, obs=obs), make_obj(b, 0.7, obs=obs)]],
                       [0.4, 0.4, 0.2])
    left = c.data.copy()
    left[:, 60:] = False
    lone = make_region(c,
                       [[make_obj(c, 0.8, obs=obs)],
                        [make_obj(Mask(left), 0.65, obs=obs),
                         make_obj(Mask(c.data & ~left), 0.65, obs=obs)]],
                       [0.6, 0.4])
    return Belief((), (pair, lone), params)


def test_construct_worlds_full_product():
    obs = pair_obs()
    belief = pair_belief(obs)
    worlds = construct_worlds(belief, obs)
    # region scores: pair [0.9, 0.75, 0.6], lone [0.8, 0.55]
    assert len(worlds) == 6
    want = sorted(itertools.product(range(3), range(2)),
                  key=lambda p: -([0.9, 0.75, 0.6][p[0]] + [0.8, 0.55][p[1]]))
    assert [w.choices for w in worlds] == want
    assert worlds[0].choices == (0, 0)
    assert worlds[0].score == approx(1.7)
    scores = [w.score for w in worlds]
    assert scores == sorted(scores, reverse=True)
    for world in worlds:
        counts = [len(belief.regions[r].hypotheses[c].objects)
                  for r, c in enumerate(world.choices)]
        assert len(world.objects) == sum(counts)
        assert {o.provenance[0] for o in world.objects} == {0, 1}


def test_construct_worlds_cap_matches_brute_force():
    obs = pair_obs()
    belief = pair_belief(obs)
    full = construct_worlds(belief, obs)
    capped = construct_worlds(belief, obs, world_cap=4)
    assert [w.choices for w in capped] == [w.choices for w in full[:4]]
    assert [w.score for w in capped] == approx([w.score for w in full[:4]])


def test_construct_worlds_single_best_when_none_plausible():
    obs = pair_obs()
    c = body_mask(obs, 3)
    region = make_region(c, [[make_obj(c, 0.3, obs=obs)],
                             [make_obj(c, 0.2, obs=obs)]], [0.5, 0.5])
    worlds = construct_worlds(Belief((), (region,), BeliefParams()), obs)
    assert len(worlds) == 1
    assert worlds[0].choices == (0,)
    assert worlds[0].score == approx(0.3)


def test_construct_worlds_confident_and_off_grid():
    obs = pair_obs()
    a, b, c = (body_mask(obs, i) for i in (1, 2, 3))
    region = make_region(a.union(b),
                         [[make_obj(a, 0.9, obs=obs), off_grid_object(b)]],
                         [1.0])
    belief = Belief((make_obj(c, 0.8, obs=obs),), (region,), BeliefParams())
    worlds = construct_worlds(belief, obs)
    assert len(worlds) == 1
    # the off-grid object is dropped, the confident one kept
    assert [o.provenance for o in worlds[0].objects] == [("confident", 0),
                                                         (0, 0, 0)]
    fp = worlds[0].objects[1]
    # footprint pixels come back in row-major order with the rendered heights
    assert np.array_equal(fp.pixels, a.pixel_array())
    rows, cols = a.pixel_array()[:, 0], a.pixel_array()[:, 1]
    assert fp.heights == approx(obs.depth[rows, cols])


def test_construct_worlds_bad_cap():
    obs = pair_obs()
    with pytest.raises(ValueError):
        construct_worlds(pair_belief(obs), obs, world_cap=0)
    with pytest.raises(ValueError):
        PlannerParams(world_cap=0)
    with pytest.raises(ValueError):
        PlannerParams(action_count=0)


# ---------------------------------------------------------------------------
# action sampling

def test_sample_actions_fields_and_determinism():
    obs = pair_obs()
    belief = pair_belief(obs)
    cands = sample_actions(belief, 0, 6, 0.03, obs, np.random.default_rng(0))
    assert len(cands) == 6
    for cand in cands:
        assert cand.region_index == 0
        assert (cand.hypothesis_index, cand.object_index) in {
            (0, 0), (1, 0), (1, 1), (2, 0), (2, 1)}
        assert cand.action.distance == 0.03
        assert np.hypot(*cand.action.direction) == approx(1.0)
        pixel = obs.pixel_of(*cand.action.target)
        assert pixel is not None
        assert belief.regions[0].footprint.contains(pixel)
    again = sample_actions(belief, 0, 6, 0.03, obs, np.random.default_rng(0))
    assert [(c.action.target, c.action.direction, c.hypothesis_index,
             c.object_index) for c in again] == \
           [(c.action.target, c.action.direction, c.hypothesis_index,
             c.object_index) for c in cands]


def test_sample_actions_contact_is_rearmost_in_corridor():
    obs = pair_obs()
    belief = pair_belief(obs)
    masks = {(0, 0): body_mask(obs, 1).union(body_mask(obs, 2)),
             (1, 0): body_mask(obs, 1), (1, 1): body_mask(obs, 2),
             (2, 0): body_mask(obs, 1), (2, 1): body_mask(obs, 2)}
    for seed in range(5):
        rng = np.random.default_rng(100 + seed)
        pick, = sample_actions(belief, 0, 1, 0.02, obs, rng)
        pixels = masks[(pick.hypothesis_index, pick.object_index)].pixel_array()
        x0, y0 = obs.origin
        centers = np.stack([x0 + (pixels[:, 1] + 0.5) * RES,
                            y0 + (pixels[:, 0] + 0.5) * RES], axis=1)
        d = np.asarray(pick.action.direction)
        rel = centers - centers.mean(axis=0)
        along = rel @ d
        cross = rel[:, 0] * d[1] - rel[:, 1] * d[0]
        inside = np.abs(cross) <= 0.75 * RES
        assert inside.any()
        t_rel = np.asarray(pick.action.target) - centers.mean(axis=0)
        assert abs(t_rel[0] * d[1] - t_rel[1] * d[0]) <= 0.75 * RES + 1e-12
        assert t_rel @ d <= along[inside].min() + 1e-12


def test_sample_actions_single_object_pool():
    obs = pair_obs()
    c = body_mask(obs, 3)
    region = make_region(c, [[make_obj(c, 0.8, obs=obs)]], [1.0])
    belief = Belief((), (region,), BeliefParams())
    cands = sample_actions(belief, 0, 4, 0.02, obs, np.random.default_rng(1))
    assert all((c_.hypothesis_index, c_.object_index) == (0, 0) for c_ in cands)


def test_sample_actions_errors():
    obs = pair_obs()
    belief = pair_belief(obs)
    with pytest.raises(ValueError):
        sample_actions(belief, 0, 0, 0.02, obs, np.random.default_rng(0))
    bad = Belief((), (make_region(M_A, [[off_grid_object(M_A)]], [1.0]),),
                 BeliefParams())
    with pytest.raises(ValueError):
        sample_actions(bad, 0, 1, 0.02, obs, np.random.default_rng(0))


def test_sample_random_action_pools():
    obs = pair_obs()
    belief = pair_belief(obs)
    cand = sample_random_action(belief, 0.02, obs, np.random.default_rng(2))
    assert cand is not None
    assert cand.region_index in (0, 1)
    assert cand.action.distance == 0.02

    confident = Belief((make_obj(body_mask(obs, 3), 0.8, obs=obs),), (),
                       BeliefParams())
    cand = sample_random_action(confident, 0.02, obs, np.random.default_rng(2))
    assert (cand.region_index, cand.hypothesis_index) == (-1, -1)
    assert cand.object_index == 0

    assert sample_random_action(Belief((), (), BeliefParams()), 0.02, obs,
                                np.random.default_rng(2)) is None
    ghost = Belief((off_grid_object(M_A),), (), BeliefParams())
    assert sample_random_action(ghost, 0.02, obs,
                                np.random.default_rng(2)) is None


# ---------------------------------------------------------------------------
# objective

def cand(action):
    return ActionCandidate(action, 0, 0, 0)


def split_vs_merged(obs):
    """Two worlds for the touching pair: one merged solid versus two."""
    a, b = body_mask(obs, 1), body_mask(obs, 2)
    region = make_region(a.union(b),
                         [[make_obj(a.union(b), obs=obs)],
                          [make_obj(a, obs=obs), make_obj(b, obs=obs)]],
                         [0.5, 0.5])
    params = BeliefParams(score_penalty=0.04, score_threshold=0.35)
    belief = Belief((), (region,), params)
    worlds = construct_worlds(belief, obs)
    assert len(worlds) == 2
    return worlds


def test_action_objectives_separating_push_wins():
    obs = pair_obs()
    worlds = split_vs_merged(obs)
    perp = PushAction((0.38, 0.149), (0.0, 1.0), 0.05)
    parallel = PushAction((0.50, 0.20), (-1.0, 0.0), 0.05)
    cands = [cand(perp), cand(parallel)]
    objectives = action_objectives(worlds, cands, obs)
    assert objectives[0] == approx(0.008, abs=1e-9)
    assert objectives[1] == 0.0
    assert select_action(worlds, cands, obs) is cands[0]
    flipped = list(reversed(cands))
    assert select_action(worlds, flipped, obs) is flipped[1]


def test_action_objectives_single_or_identical_worlds_are_flat():
    obs = pair_obs()
    worlds = split_vs_merged(obs)
    perp = cand(PushAction((0.38, 0.149), (0.0, 1.0), 0.05))
    assert action_objectives(worlds[:1], [perp], obs) == [0.0]
    assert action_objectives([worlds[0], worlds[0]], [perp], obs) == [0.0]


def test_action_objectives_chain_pickup_mirrors_merged_motion():
    # pushing along the shared face picks the neighbor up, so the split and
    # merged worlds produce the same depth image and the push is worthless
    obs = pair_obs()
    worlds = split_vs_merged(obs)
    along = cand(PushAction((0.15, 0.20), (1.0, 0.0), 0.05))
    assert action_objectives(worlds, [along], obs) == [0.0]


def test_action_objectives_errors_and_miss():
    obs = pair_obs()
    worlds = split_vs_merged(obs)
    miss = cand(PushAction((0.70, 0.35), (1.0, 0.0), 0.02))
    assert action_objectives(worlds, [miss], obs) == [0.0]
    with pytest.raises(ValueError):
        action_objectives([], [miss], obs)
    with pytest.raises(ValueError):
        action_objectives(worlds, [], obs)


def test_select_action_prefers_lowest_index_on_ties():
    obs = pair_obs()
    worlds = split_vs_merged(obs)
    a = cand(PushAction((0.70, 0.35), (1.0, 0.0), 0.02))
    b = cand(PushAction((0.70, 0.30), (1.0, 0.0), 0.02))
    assert select_action(worlds, [a, b], obs) is a


def test_sampled_objectives_are_finite_and_nonnegative():
    obs = pair_obs()
    belief = pair_belief(obs)
    worlds = construct_worlds(belief, obs)
    cands = sample_actions(belief, 0, 8, 0.02, obs, np.random.default_rng(3))
    objectives = action_objectives(worlds, cands, obs)
    assert len(objectives) == 8
    assert all(np.isfinite(v) and v >= 0.0 for v in objectives)
