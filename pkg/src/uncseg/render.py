"""Orthographic top-down rendering of scenes into depth, label, and point
cloud images, plus the ground-truth pixel correspondence between two frames.

Grid convention: pixel (row, col) has world center
(x_min + (col + 0.5) * resolution, y_min + (row + 0.5) * resolution),
so rows grow with y and columns with x.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .scene import Scene, _rot


@dataclass(frozen=True)
class Observation:
    """One rendered frame.

    labels carries ground-truth body ids (0 = background) and is meant for
    oracles and evaluators only; the segmentation pipeline must not read it.
    """

    depth: np.ndarray          # (H, W) top-surface height, 0 on background
    labels: np.ndarray         # (H, W) int32 body ids, 0 background
    cloud: np.ndarray          # (H, W, 3) world x, y, z per pixel
    resolution: float
    handle: str

    @property
    def shape(self) -> tuple[int, int]:
        return self.depth.shape

    @property
    def origin(self) -> tuple[float, float]:
        """World (x, y) of the grid corner (pixel (0, 0) minus half a cell)."""
        x0 = float(self.cloud[0, 0, 0]) - 0.5 * self.resolution
        y0 = float(self.cloud[0, 0, 1]) - 0.5 * self.resolution
        return x0, y0

    def pixel_of(self, x: float, y: float) -> tuple[int, int] | None:
        """Grid pixel containing a world point, or None when outside."""
        x0, y0 = self.origin
        c = int(math.floor((x - x0) / self.resolution))
        r = int(math.floor((y - y0) / self.resolution))
        h, w = self.depth.shape
        if 0 <= r < h and 0 <= c < w:
            return r, c
        return None


def _scene_digest(scene: Scene, resolution: float) -> str:
    # normalize scalar types so value-equal scenes (e.g. a parsed copy of a
    # generated scene) hash to the same handle
    def f(vals) -> tuple[float, ...]:
        return tuple(float(v) for v in vals)

    parts = [repr(f(scene.table)), repr(float(resolution))]
    for b in scene.bodies:
        parts.append(repr((int(b.id), f(b.pose))))
        for p in b.parts:
            parts.append(repr((f(p.center), f(p.extents),
                               float(p.height), float(p.z_base))))
    return hashlib.sha1("|".join(parts).encode()).hexdigest()[:16]


def _grid_geometry(scene: Scene, resolution: float) -> tuple[int, int, float, float]:
    xmin, xmax, ymin, ymax = scene.table
    w = int(math.ceil((xmax - xmin) / resolution - 1e-9))
    h = int(math.ceil((ymax - ymin) / resolution - 1e-9))
    return h, w, xmin, ymin


def rasterize(scene: Scene, resolution: float
              ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Render depth, body labels, and visible part indices.

    The topmost surface wins each pixel; exact height ties go to the lower
    body id. part_idx holds the index (within its body) of the part whose
    top surface is visible, -1 on background.
    """
    h, w, xmin, ymin = _grid_geometry(scene, resolution)
    xs = xmin + (np.arange(w) + 0.5) * resolution
    ys = ymin + (np.arange(h) + 0.5) * resolution
    gx, gy = np.meshgrid(xs, ys)  # (h, w)

    depth = np.zeros((h, w), dtype=float)
    labels = np.zeros((h, w), dtype=np.int32)
    part_idx = np.full((h, w), -1, dtype=np.int16)

    for body in sorted(scene.bodies, key=lambda b: b.id):
        bx, by, yaw = body.pose
        rot = _rot(-yaw)
        lx = rot[0, 0] * (gx - bx) + rot[0, 1] * (gy - by)
        ly = rot[1, 0] * (gx - bx) + rot[1, 1] * (gy - by)
        body_top = np.zeros((h, w), dtype=float)
        body_part = np.full((h, w), -1, dtype=np.int16)
        for k, part in enumerate(body.parts):
            inside = (np.abs(lx - part.center[0]) <= part.extents[0] / 2.0) & \
                     (np.abs(ly - part.center[1]) <= part.extents[1] / 2.0)
            taller = inside & (part.z_top > body_top + 1e-12)
            body_top[taller] = part.z_top
            body_part[taller] = k
        covered = body_part >= 0
        wins = covered & (body_top > depth + 1e-12)
        depth[wins] = body_top[wins]
        labels[wins] = body.id
        part_idx[wins] = body_part[wins]

    return depth, labels, part_idx


def render(scene: Scene, resolution: float) -> Observation:
    """Render a scene into an Observation with a deterministic frame handle."""
    obs, _ = render_with_parts(scene, resolution)
    return obs


def render_with_parts(scene: Scene, resolution: float
                      ) -> tuple[Observation, np.ndarray]:
    """Render and also return the visible part index map (for oracles)."""
    if resolution <= 0:
        raise ValueError("resolution must be strictly positive")
    depth, labels, part_idx = rasterize(scene, resolution)
    h, w = depth.shape
    _, _, xmin, ymin = _grid_geometry(scene, resolution)
    xs = xmin + (np.arange(w) + 0.5) * resolution
    ys = ymin + (np.arange(h) + 0.5) * resolution
    cloud = np.empty((h, w, 3), dtype=float)
    cloud[:, :, 0] = xs[None, :]
    cloud[:, :, 1] = ys[:, None]
    cloud[:, :, 2] = depth
    for arr in (depth, labels, cloud):
        arr.setflags(write=False)
    handle = "frame-" + _scene_digest(scene, resolution)
    return Observation(depth, labels, cloud, resolution, handle), part_idx


def correspondence_map(scene_before: Scene, scene_after: Scene,
                       obs_before: Observation, obs_after: Observation) -> np.ndarray:
    """Ground-truth forward pixel map between two frames of the same bodies.

    Returns an (H, W, 2) int32 array: for each foreground pixel of the
    before frame, the (row, col) its surface point lands on in the after
    frame, or (-1, -1) when the point is occluded there (covered by a
    taller surface, including the body's own parts) or its height cannot
    be confirmed at the landing pixel center.
    """
    if obs_before.shape != obs_after.shape:
        raise ValueError("frames have different grids")
    h, w = obs_before.shape
    out = np.full((h, w, 2), -1, dtype=np.int32)
    res = obs_before.resolution
    x0, y0 = obs_after.origin

    before_by_id = {b.id: b for b in scene_before.bodies}
    after_by_id = {b.id: b for b in scene_after.bodies}
    for body_id, before in before_by_id.items():
        after = after_by_id.get(body_id)
        if after is None:
            continue
        dx = after.pose[0] - before.pose[0]
        dy = after.pose[1] - before.pose[1]
        sel = obs_before.labels == body_id
        if not sel.any():
            continue
        rr, cc = np.nonzero(sel)
        tx = obs_before.cloud[rr, cc, 0] + dx
        ty = obs_before.cloud[rr, cc, 1] + dy
        qc = np.floor((tx - x0) / res).astype(np.int64)
        qr = np.floor((ty - y0) / res).astype(np.int64)
        ok = (qr >= 0) & (qr < h) & (qc >= 0) & (qc < w)
        same_body = np.zeros_like(ok)
        same_h = np.zeros_like(ok)
        same_body[ok] = obs_after.labels[qr[ok], qc[ok]] == body_id
        same_h[ok] = np.abs(obs_after.depth[qr[ok], qc[ok]]
                            - obs_before.depth[rr[ok], cc[ok]]) <= 1e-9
        keep = ok & same_body & same_h
        out[rr[keep], cc[keep], 0] = qr[keep]
        out[rr[keep], cc[keep], 1] = qc[keep]
    return out
