"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np

from uncseg.belief import BeliefHypothesis, BeliefRegion, ObjectHypothesis
from uncseg.geometry import PointSet
from uncseg.masks import Mask, MaskSource
from uncseg.scene import Part, RigidBody


def ascii_mask(art: str, source: MaskSource = MaskSource.BOTTOM_UP) -> Mask:
    """Mask from ascii art: '#' pixels are set, everything else is clear."""
    rows = [line.strip() for line in art.splitlines() if line.strip()]
    width = max(len(line) for line in rows)
    data = np.zeros((len(rows), width), dtype=bool)
    for i, line in enumerate(rows):
        for j, ch in enumerate(line):
            if ch == "#":
                data[i, j] = True
    return Mask(data, source)


def box_body(body_id: int, x: float, y: float, ex: float, ey: float,
             height: float, yaw: float = 0.0) -> RigidBody:
    """Single-part axis-aligned box body centered at (x, y)."""
    return RigidBody(body_id, (x, y, yaw),
                     (Part((0.0, 0.0), (ex, ey), height),))


def make_obj(mask, wholeness=0.5, history=(), obs=None):
    """Belief object over `mask`, with a real cloud when `obs` is given."""
    pixels = mask.pixel_array()
    if obs is None:
        points = np.zeros((mask.area, 3))
    else:
        points = obs.cloud[mask.data]
    return ObjectHypothesis(PointSet(points, pixels), wholeness,
                            tuple(history), mask)


def make_region(footprint, hyps, weights):
    """Region with explicit hypotheses; weights need not be normalized."""
    return BeliefRegion(footprint,
                        tuple(BeliefHypothesis(tuple(objs), w)
                              for objs, w in zip(hyps, weights)))
