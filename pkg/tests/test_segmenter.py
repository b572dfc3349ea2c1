"""Stochastic segmentation oracles and their event accounting."""

from __future__ import annotations

import numpy as np
import pytest
from scipy import ndimage

from uncseg.masks import Mask, MaskSource
from uncseg.render import render, render_with_parts
from uncseg.scene import Part, RigidBody, Scene
from uncseg.segmenter import (MERGE_RANGE, OracleConfig, OracleEventLog,
                              OracleSegmenter, SeededSegmenter, StaleFrameError)

from .conftest import box_body

RES = 0.01


def pair_scene(gap: float = 0.0) -> Scene:
    a = box_body(1, 0.05, 0.05, 0.04, 0.04, 0.04)
    b = box_body(2, 0.09 + gap, 0.05, 0.04, 0.04, 0.03)
    return Scene((0.0, 0.2, 0.0, 0.1), (a, b))


def two_part_scene() -> Scene:
    base = Part((0.0, 0.0), (0.06, 0.04), 0.03)
    side = Part((0.05, 0.0), (0.04, 0.04), 0.05)
    return Scene((0.0, 0.16, 0.0, 0.1),
                 (RigidBody(1, (0.06, 0.05, 0.0), (base, side)),))


def registered(scene: Scene, config: OracleConfig,
               log: OracleEventLog | None = None):
    obs = render(scene, RES)
    seg = OracleSegmenter(config, log)
    handle = seg.register(scene, obs)
    assert handle == obs.handle
    return seg, obs, handle


def body_pixel(obs, body_id: int) -> tuple[int, int]:
    rr, cc = np.nonzero(obs.labels == body_id)
    return int(rr[0]), int(cc[0])


def test_config_validation():
    with pytest.raises(ValueError):
        OracleConfig(p_part=0.7, p_merge=0.5)
    with pytest.raises(ValueError):
        OracleConfig(td_recall=1.5)
    with pytest.raises(ValueError):
        OracleConfig(boundary_noise=-1)
    with pytest.raises(ValueError):
        OracleConfig(seeds_per_body=0)


def test_noise_free_prompt_is_exact():
    seg, obs, handle = registered(pair_scene(), OracleConfig())
    rng = np.random.default_rng(0)
    mask = seg.prompt_point(handle, body_pixel(obs, 1), rng)
    assert mask == Mask(obs.labels == 1)
    assert mask.source is MaskSource.BOTTOM_UP


def test_background_prompt_returns_background():
    log = OracleEventLog()
    seg, obs, handle = registered(pair_scene(), OracleConfig(), log)
    rng = np.random.default_rng(0)
    mask = seg.prompt_point(handle, (0, 0), rng)
    assert mask == Mask(obs.labels == 0)
    assert log.prompts == 1  # background prompts still count


def test_prompt_outside_grid_rejected():
    seg, obs, handle = registered(pair_scene(), OracleConfig())
    with pytest.raises(ValueError):
        seg.prompt_point(handle, (0, 99), np.random.default_rng(0))


def test_stale_frame():
    seg, obs, handle = registered(pair_scene(), OracleConfig())
    rng = np.random.default_rng(0)
    with pytest.raises(StaleFrameError):
        seg.prompt_point("frame-bogus", (0, 0), rng)
    seg.forget(handle)
    with pytest.raises(StaleFrameError):
        seg.seed_all(handle, rng)
    with pytest.raises(StaleFrameError):
        seg.high_precision(handle, rng)


def test_merge_error_unions_touching_neighbor():
    log = OracleEventLog()
    seg, obs, handle = registered(pair_scene(), OracleConfig(p_merge=1.0), log)
    mask = seg.prompt_point(handle, body_pixel(obs, 1), np.random.default_rng(0))
    assert mask == Mask((obs.labels == 1) | (obs.labels == 2))
    assert log.merged_masks == 1


def test_merge_error_needs_a_neighbor():
    scene = Scene((0.0, 0.2, 0.0, 0.1),
                  (box_body(1, 0.05, 0.05, 0.04, 0.04, 0.04),))
    log = OracleEventLog()
    seg, obs, handle = registered(scene, OracleConfig(p_merge=1.0), log)
    mask = seg.prompt_point(handle, body_pixel(obs, 1), np.random.default_rng(0))
    assert mask == Mask(obs.labels == 1)  # isolated body: exact fallback
    assert log.merged_masks == 0
    assert log.prompts == 1


def test_merge_neighborhood_range():
    """Bodies within the merge range count as touching neighbors for the
    oracle's merge error; farther apart they do not."""
    near_gap = MERGE_RANGE - 0.01
    far_gap = MERGE_RANGE + 0.01
    for gap, expect_merge in ((near_gap, True), (far_gap, False)):
        log = OracleEventLog()
        seg, obs, handle = registered(pair_scene(gap),
                                      OracleConfig(p_merge=1.0), log)
        mask = seg.prompt_point(handle, body_pixel(obs, 1),
                                np.random.default_rng(0))
        merged = Mask((obs.labels == 1) | (obs.labels == 2))
        assert (mask == merged) is expect_merge
        assert log.merged_masks == (1 if expect_merge else 0)


def test_merge_picks_one_neighbor_uniformly():
    a = box_body(1, 0.05, 0.05, 0.04, 0.04, 0.04)
    mid = box_body(2, 0.09, 0.05, 0.04, 0.04, 0.03)
    c = box_body(3, 0.13, 0.05, 0.04, 0.04, 0.05)
    scene = Scene((0.0, 0.2, 0.0, 0.1), (a, mid, c))
    seg, obs, handle = registered(scene, OracleConfig(p_merge=1.0))
    with_a = Mask((obs.labels == 2) | (obs.labels == 1))
    with_c = Mask((obs.labels == 2) | (obs.labels == 3))
    rng = np.random.default_rng(1)
    seen = {seg.prompt_point(handle, body_pixel(obs, 2), rng) for _ in range(40)}
    assert seen == {with_a, with_c}


def test_part_error_returns_visible_part():
    log = OracleEventLog()
    scene = two_part_scene()
    obs, part_idx = render_with_parts(scene, RES)
    seg = OracleSegmenter(OracleConfig(p_part=1.0), log)
    handle = seg.register(scene, obs)
    rng = np.random.default_rng(0)
    for part in (0, 1):
        sel = (obs.labels == 1) & (part_idx == part)
        rr, cc = np.nonzero(sel)
        mask = seg.prompt_point(handle, (int(rr[0]), int(cc[0])), rng)
        assert mask == Mask(sel)
    assert log.part_masks == 2


def test_boundary_noise_stays_local_and_keeps_prompt():
    cfg = OracleConfig(boundary_noise=2)
    seg, obs, handle = registered(pair_scene(), cfg)
    exact = obs.labels == 1
    disk = np.array([[x * x + y * y <= 4 for x in range(-2, 3)]
                     for y in range(-2, 3)])
    grown = ndimage.binary_dilation(exact, structure=disk)
    shrunk = ndimage.binary_erosion(exact, structure=disk)
    rng = np.random.default_rng(2)
    px = body_pixel(obs, 1)
    saw_change = False
    for _ in range(50):
        mask = seg.prompt_point(handle, px, rng)
        assert mask.contains(px)
        assert not (mask.data & ~grown).any()
        assert not (shrunk & ~mask.data).any()
        saw_change = saw_change or mask != Mask(exact)
    assert saw_change


def test_seed_all_noise_free():
    seg, obs, handle = registered(pair_scene(), OracleConfig())
    masks = seg.seed_all(handle, np.random.default_rng(3))
    assert len(masks) == 6  # three seeds per body
    by_body = {Mask(obs.labels == 1): 0, Mask(obs.labels == 2): 0}
    for m in masks:
        by_body[m] += 1
    assert by_body == {Mask(obs.labels == 1): 3, Mask(obs.labels == 2): 3}


def test_seed_all_part_rate_matches_config():
    """Realized part-error frequency tracks p_part; seed prompts always hit
    foreground so every prompt can realize the error."""
    cfg = OracleConfig(p_part=0.5, seeds_per_body=10)
    log = OracleEventLog()
    scene = two_part_scene()
    obs = render(scene, RES)
    seg = OracleSegmenter(cfg, log)
    handle = seg.register(scene, obs)
    rng = np.random.default_rng(4)
    for _ in range(100):
        seg.seed_all(handle, rng)
    assert log.prompts == 1000
    rate = log.part_masks / log.prompts
    assert abs(rate - 0.5) < 3.0 * np.sqrt(0.25 / 1000)


def test_high_precision_noise_free():
    log = OracleEventLog()
    seg, obs, handle = registered(pair_scene(), OracleConfig(), log)
    masks = seg.high_precision(handle, np.random.default_rng(5))
    assert [m.source for m in masks] == [MaskSource.TOP_DOWN, MaskSource.TOP_DOWN]
    assert masks[0] == Mask(obs.labels == 1)
    assert masks[1] == Mask(obs.labels == 2)
    assert log.td_masks == 2


def test_high_precision_recall():
    seg, obs, handle = registered(pair_scene(), OracleConfig(td_recall=0.0))
    assert seg.high_precision(handle, np.random.default_rng(6)) == []
    log = OracleEventLog()
    seg, obs, handle = registered(pair_scene(), OracleConfig(td_recall=0.8), log)
    rng = np.random.default_rng(7)
    for _ in range(200):
        seg.high_precision(handle, rng)
    rate = log.td_masks / 400.0
    assert abs(rate - 0.8) < 3.0 * np.sqrt(0.8 * 0.2 / 400)


def test_high_precision_merge():
    log = OracleEventLog()
    seg, obs, handle = registered(pair_scene(), OracleConfig(td_merge=1.0), log)
    masks = seg.high_precision(handle, np.random.default_rng(8))
    merged = Mask((obs.labels == 1) | (obs.labels == 2))
    assert [m == merged for m in masks] == [True, True]
    assert log.td_merged_masks == 2


def test_oracle_deterministic_under_seed():
    cfg = OracleConfig(p_part=0.3, p_merge=0.3, boundary_noise=1)
    outputs = []
    for _ in range(2):
        seg, obs, handle = registered(pair_scene(), cfg)
        rng = np.random.default_rng(9)
        outputs.append((seg.seed_all(handle, rng),
                        seg.high_precision(handle, rng)))
    assert outputs[0] == outputs[1]


def test_seeded_segmenter_owns_its_stream():
    cfg = OracleConfig(p_part=0.3, p_merge=0.3, boundary_noise=1)
    results = []
    for caller_seed in (0, 123):
        scene = pair_scene()
        obs = render(scene, RES)
        inner = OracleSegmenter(cfg)
        inner.register(scene, obs)
        seg = SeededSegmenter(inner, seed=42)
        caller_rng = np.random.default_rng(caller_seed)
        results.append((seg.seed_all(obs.handle, caller_rng),
                        seg.prompt_point(obs.handle, (5, 5), caller_rng),
                        seg.high_precision(obs.handle)))
    assert results[0] == results[1]
