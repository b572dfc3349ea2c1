"""Scene validity, contact geometry, push dynamics, and random generation."""

from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_allclose

from uncseg.scene import (CONTACT_TOL, GenConfig, Part, PushAction, RigidBody,
                          Scene, SceneGenerationError, apply_push, bodies_in_contact,
                          bodies_penetrate, body_gap, body_radius, generate_scene)
from uncseg.serialize import scene_to_text

from .conftest import box_body


def test_part_validation():
    with pytest.raises(ValueError):
        Part((0.0, 0.0), (0.0, 0.1), 0.1)
    with pytest.raises(ValueError):
        Part((0.0, 0.0), (0.1, 0.1), -0.1)
    with pytest.raises(ValueError):
        Part((0.0, 0.0), (0.1, 0.1), 0.1, z_base=-0.01)
    p = Part((0.0, 0.0), (0.1, 0.1), 0.04, z_base=0.02)
    assert p.z_top == pytest.approx(0.06)


def test_body_validation():
    part = Part((0.0, 0.0), (0.1, 0.1), 0.05)
    with pytest.raises(ValueError):
        RigidBody(1, (0.0, 0.0, 0.0), ())
    with pytest.raises(ValueError):
        RigidBody(0, (0.0, 0.0, 0.0), (part,))
    # two parts with a gap between them do not form one solid
    far = Part((0.5, 0.0), (0.1, 0.1), 0.05)
    with pytest.raises(ValueError):
        RigidBody(1, (0.0, 0.0, 0.0), (part, far))


def test_body_translated():
    body = box_body(3, 0.1, 0.2, 0.04, 0.04, 0.05, yaw=0.3)
    moved = body.translated(0.01, -0.02)
    assert moved.pose == pytest.approx((0.11, 0.18, 0.3))
    assert moved.id == 3
    assert moved.parts == body.parts


def test_scene_validation():
    a = box_body(1, 0.1, 0.1, 0.04, 0.04, 0.05)
    with pytest.raises(ValueError):
        Scene((0.2, 0.2, 0.0, 0.4), (a,))  # degenerate table
    with pytest.raises(ValueError):
        Scene((0.0, 0.4, 0.0, 0.4), (a, box_body(1, 0.3, 0.3, 0.04, 0.04, 0.05)))
    with pytest.raises(ValueError):
        Scene((0.0, 0.4, 0.0, 0.4), (box_body(1, 0.39, 0.1, 0.04, 0.04, 0.05),))
    overlapping = box_body(2, 0.13, 0.1, 0.04, 0.04, 0.05)
    with pytest.raises(ValueError):
        Scene((0.0, 0.4, 0.0, 0.4), (a, overlapping))
    scene = Scene((0.0, 0.4, 0.0, 0.4), (a,))
    assert scene.body(1) is a
    with pytest.raises(KeyError):
        scene.body(2)


def test_gap_contact_penetration():
    a = box_body(1, 0.10, 0.10, 0.04, 0.04, 0.05)
    b = box_body(2, 0.20, 0.10, 0.04, 0.04, 0.05)
    assert body_gap(a, b) == pytest.approx(0.06, abs=1e-12)
    assert not bodies_in_contact(a, b)
    assert bodies_in_contact(a, b, tol=0.07)
    touching = box_body(2, 0.14, 0.10, 0.04, 0.04, 0.05)
    assert body_gap(a, touching) == pytest.approx(0.0, abs=1e-12)
    assert bodies_in_contact(a, touching)
    assert not bodies_penetrate(a, touching)
    overlapping = box_body(2, 0.13, 0.10, 0.04, 0.04, 0.05)
    assert body_gap(a, overlapping) < 0
    assert bodies_penetrate(a, overlapping)


def test_body_radius_single_box():
    body = box_body(1, 0.3, 0.2, 0.06, 0.08, 0.05)
    assert body_radius(body) == pytest.approx(0.05)


def test_push_action_validation():
    with pytest.raises(ValueError):
        PushAction((0.0, 0.0), (1.0, 1.0), 0.05)  # not unit length
    with pytest.raises(ValueError):
        PushAction((0.0, 0.0), (1.0, 0.0), 0.0)


def test_push_miss():
    scene = Scene((0.0, 0.4, 0.0, 0.4),
                  (box_body(1, 0.1, 0.1, 0.04, 0.04, 0.05),))
    out = apply_push(scene, PushAction((0.3, 0.3), (1.0, 0.0), 0.05))
    assert not out.contact
    assert out.body_id is None
    assert out.scene is scene
    assert out.displacements == {}


def test_push_free_translation():
    scene = Scene((0.0, 0.4, 0.0, 0.4),
                  (box_body(1, 0.1, 0.1, 0.04, 0.04, 0.05),))
    # pusher starts just left of the box edge at x = 0.08 and sweeps right
    out = apply_push(scene, PushAction((0.07, 0.1), (1.0, 0.0), 0.05))
    assert out.contact and out.body_id == 1
    assert out.displacements == pytest.approx({1: 0.05})
    assert out.scene.body(1).pose == pytest.approx((0.15, 0.1, 0.0))


def test_push_chain_carries_touching_body():
    a = box_body(1, 0.10, 0.1, 0.04, 0.04, 0.05)
    b = box_body(2, 0.14, 0.1, 0.04, 0.04, 0.04)  # flush against a
    scene = Scene((0.0, 0.6, 0.0, 0.4), (a, b))
    out = apply_push(scene, PushAction((0.07, 0.1), (1.0, 0.0), 0.03))
    assert out.body_id == 1
    assert out.scene.body(1).pose[0] == pytest.approx(0.13, abs=1e-9)
    assert out.scene.body(2).pose[0] == pytest.approx(0.17, abs=1e-9)


def test_push_chain_closes_gap_first():
    a = box_body(1, 0.10, 0.1, 0.04, 0.04, 0.05)
    b = box_body(2, 0.15, 0.1, 0.04, 0.04, 0.04)  # 0.01 gap behind a
    scene = Scene((0.0, 0.6, 0.0, 0.4), (a, b))
    out = apply_push(scene, PushAction((0.07, 0.1), (1.0, 0.0), 0.03))
    assert out.scene.body(1).pose[0] == pytest.approx(0.13, abs=1e-6)
    # b only moves once a has crossed the 0.01 gap
    assert out.scene.body(2).pose[0] == pytest.approx(0.17, abs=1e-6)
    assert out.displacements[2] == pytest.approx(0.02, abs=1e-6)


def test_push_clipped_at_table_bounds():
    scene = Scene((0.0, 0.4, 0.0, 0.4),
                  (box_body(1, 0.36, 0.1, 0.04, 0.04, 0.05),))
    out = apply_push(scene, PushAction((0.33, 0.1), (1.0, 0.0), 0.05))
    assert out.contact
    assert out.displacements[1] == pytest.approx(0.02, abs=1e-9)
    assert out.scene.body(1).pose[0] == pytest.approx(0.38, abs=1e-9)


def test_push_jammed_chain_moves_nothing():
    wall = box_body(2, 0.38, 0.1, 0.04, 0.04, 0.04)  # flush against xmax
    a = box_body(1, 0.34, 0.1, 0.04, 0.04, 0.05)     # flush against wall
    scene = Scene((0.0, 0.4, 0.0, 0.4), (a, wall))
    out = apply_push(scene, PushAction((0.29, 0.1), (1.0, 0.0), 0.05))
    assert out.contact and out.body_id == 1
    assert out.displacements == {}
    assert out.scene.body(1).pose == a.pose
    assert out.scene.body(2).pose == wall.pose


def test_push_random_scenes_stay_valid():
    """Pushes never exceed the commanded distance, never create overlap,
    and translate moved bodies exactly along the push direction."""
    cfg = GenConfig(body_count=(3, 5), part_count=(1, 2))
    for seed in range(10):
        rng = np.random.default_rng(seed)
        scene = generate_scene(cfg, rng)
        target = (float(rng.uniform(0.0, 0.64)), float(rng.uniform(0.0, 0.48)))
        theta = float(rng.uniform(0.0, 2 * np.pi))
        action = PushAction(target, (np.cos(theta), np.sin(theta)), 0.04)
        out = apply_push(scene, action)  # Scene constructor revalidates
        for body_id, d in out.displacements.items():
            assert 0.0 < d <= 0.04 + 1e-9
            before = scene.body(body_id)
            after = out.scene.body(body_id)
            assert_allclose(after.pose[:2],
                            (before.pose[0] + d * action.direction[0],
                             before.pose[1] + d * action.direction[1]),
                            atol=1e-12)
            assert after.pose[2] == before.pose[2]
        unmoved = set(b.id for b in scene.bodies) - set(out.displacements)
        for body_id in unmoved:
            assert out.scene.body(body_id).pose == scene.body(body_id).pose


def test_generate_scene_deterministic():
    cfg = GenConfig()
    a = generate_scene(cfg, np.random.default_rng(42))
    b = generate_scene(cfg, np.random.default_rng(42))
    assert scene_to_text(a) == scene_to_text(b)


def test_generate_scene_respects_config():
    cfg = GenConfig(body_count=(3, 5), part_count=(1, 3),
                    height_range=(0.02, 0.06))
    for seed in range(8):
        scene = generate_scene(cfg, np.random.default_rng(seed))
        assert 3 <= len(scene.bodies) <= 5
        for body in scene.bodies:
            assert 1 <= len(body.parts) <= 3
            for part in body.parts:
                assert 0.02 <= part.height <= 0.06


def test_generate_scene_clutter_contact():
    """With clutter_fraction 1 every later body lands in contact with an
    earlier one."""
    cfg = GenConfig(body_count=(4, 4), part_count=(1, 1),
                    clutter_fraction=1.0, stack_probability=0.0)
    for seed in range(5):
        scene = generate_scene(cfg, np.random.default_rng(seed))
        for i, body in enumerate(scene.bodies[1:], start=1):
            gap = min(body_gap(body, other) for other in scene.bodies[:i])
            assert -1e-9 <= gap <= CONTACT_TOL


def test_generate_scene_saturates():
    cfg = GenConfig(table=(0.0, 0.1, 0.0, 0.1), body_count=(10, 10),
                    extent_range=(0.05, 0.09), max_attempts=50)
    with pytest.raises(SceneGenerationError):
        generate_scene(cfg, np.random.default_rng(0))
