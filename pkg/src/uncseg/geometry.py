"""3-D geometry: point sets with pixel provenance, rigid transforms,
RANSAC plane fitting and rigid registration, and a flat-mask degeneracy test.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .masks import Mask

ORTHONORMAL_TOL = 1e-9


class DegenerateGeometryError(ValueError):
    """Raised when the input admits no well-posed fit (e.g. collinear points)."""


class UnderdeterminedError(ValueError):
    """Raised when fewer correspondences than a minimal sample are available."""


@dataclass(frozen=True)
class Plane:
    """Plane {p : normal . p = offset} with unit normal."""

    normal: np.ndarray
    offset: float

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        """Positive on the side the normal points to."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.normal - self.offset


@dataclass(frozen=True)
class RigidTransform:
    """Proper rigid transform p -> rotation @ p + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float)
        if r.shape != (3, 3) or t.shape != (3,):
            raise ValueError("rotation must be (3,3) and translation (3,)")
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-6):
            raise ValueError("rotation is not orthonormal")
        if np.linalg.det(r) < 0:
            raise ValueError("rotation has negative determinant")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation

    def rotation_angle(self) -> float:
        """Rotation magnitude in radians, in [0, pi]."""
        c = (np.trace(self.rotation) - 1.0) / 2.0
        return float(np.arccos(np.clip(c, -1.0, 1.0)))


@dataclass(frozen=True)
class PointSet:
    """Points in world frame with optional per-point pixel provenance.

    pixels holds the (row, col) each point was lifted from, or (-1, -1)
    for points whose source pixel is no longer current.
    """

    points: np.ndarray
    pixels: np.ndarray | None = field(default=None)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("points must be (N, 3)")
        object.__setattr__(self, "points", pts)
        if self.pixels is not None:
            px = np.asarray(self.pixels, dtype=np.int64)
            if px.shape != (pts.shape[0], 2):
                raise ValueError("pixels must be (N, 2)")
            object.__setattr__(self, "pixels", px)

    def __len__(self) -> int:
        return self.points.shape[0]


def _plane_from_triple(p0, p1, p2) -> Plane | None:
    n = np.cross(p1 - p0, p2 - p0)
    norm = np.linalg.norm(n)
    if norm < 1e-12:
        return None
    n = n / norm
    return Plane(n, float(n @ p0))


def _canonical_plane(normal: np.ndarray, offset: float) -> Plane:
    # orient the normal into the +z hemisphere so planes compare stably
    if normal[2] < 0 or (normal[2] == 0 and (normal[0] < 0 or (normal[0] == 0 and normal[1] < 0))):
        normal = -normal
        offset = -offset
    return Plane(normal, float(offset))


def _least_squares_plane(points: np.ndarray) -> Plane:
    centroid = points.mean(axis=0)
    centered = points - centroid
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s.shape[0] < 3 or s[1] < 1e-12:
        raise DegenerateGeometryError("points are collinear; plane is underdetermined")
    normal = vt[2]
    return _canonical_plane(normal, float(normal @ centroid))


def fit_plane_ransac(points: np.ndarray, inlier_dist: float, iters: int = 256,
                     rng: np.random.Generator | None = None) -> tuple[Plane, np.ndarray]:
    """RANSAC plane fit: best-consensus triple, least-squares refit on inliers.

    Args:
        points: (N, 3) array, N >= 3.
        inlier_dist: absolute point-to-plane distance for consensus.
        iters: number of random triples.
        rng: random stream for sampling triples.

    Returns:
        (plane, inlier_mask) where inlier_mask is the boolean consensus of
        the refit plane and the plane normal points into the +z hemisphere.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("points must be (N, 3)")
    if pts.shape[0] < 3:
        raise DegenerateGeometryError("need at least 3 points for a plane")
    if rng is None:
        rng = np.random.default_rng()

    best_count = -1
    best_inliers = None
    n = pts.shape[0]
    for _ in range(iters):
        idx = rng.integers(0, n, size=3)
        if len(set(idx.tolist())) < 3:
            continue
        cand = _plane_from_triple(pts[idx[0]], pts[idx[1]], pts[idx[2]])
        if cand is None:
            continue
        dist = np.abs(cand.signed_distance(pts))
        inliers = dist < inlier_dist
        count = int(inliers.sum())
        if count > best_count:
            best_count = count
            best_inliers = inliers
    if best_inliers is None or best_count < 3:
        raise DegenerateGeometryError("no non-degenerate plane sample found")

    plane = _least_squares_plane(pts[best_inliers])
    final = np.abs(plane.signed_distance(pts)) < inlier_dist
    return plane, final


def kabsch(src: np.ndarray, dst: np.ndarray) -> RigidTransform:
    """Least-squares proper rigid alignment mapping src onto dst."""
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    cs = src.mean(axis=0)
    cd = dst.mean(axis=0)
    h = (src - cs).T @ (dst - cd)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    if d == 0:
        d = 1.0
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    t = cd - r @ cs
    return RigidTransform(r, t)


def register_rigid_ransac(src: PointSet, dst: PointSet, correspondences: np.ndarray,
                          inlier_dist: float, iters: int = 256,
                          rng: np.random.Generator | None = None,
                          ) -> tuple[RigidTransform, float]:
    """RANSAC rigid registration over given index correspondences.

    Minimal samples are 3 correspondences aligned by kabsch; the best
    consensus set is refit by least squares and the consensus recounted.

    Args:
        src, dst: PointSets (or anything with .points).
        correspondences: (M, 2) int array of (src_index, dst_index) pairs.
        inlier_dist: residual distance bound for consensus.

    Returns:
        (transform, inlier_fraction) with inlier_fraction = |consensus| / M.

    Raises:
        UnderdeterminedError: if fewer than 3 correspondences are given.
    """
    corr = np.asarray(correspondences, dtype=np.int64)
    if corr.ndim != 2 or corr.shape[1] != 2 or corr.shape[0] < 3:
        raise UnderdeterminedError("underdetermined: need at least 3 correspondences")
    if rng is None:
        rng = np.random.default_rng()
    src_pts = np.asarray(src.points if isinstance(src, PointSet) else src, dtype=float)
    dst_pts = np.asarray(dst.points if isinstance(dst, PointSet) else dst, dtype=float)
    a = src_pts[corr[:, 0]]
    b = dst_pts[corr[:, 1]]
    m = corr.shape[0]

    scale = max(float(np.ptp(a, axis=0).max()), 1e-9)
    area_floor = (1e-6 * scale) ** 2

    # all minimal samples at once: batched kabsch over (iters, 3) triples
    idx = rng.integers(0, m, size=(iters, 3))
    distinct = ((idx[:, 0] != idx[:, 1]) & (idx[:, 0] != idx[:, 2])
                & (idx[:, 1] != idx[:, 2]))
    sa, sb = a[idx], b[idx]
    cross = np.cross(sa[:, 1] - sa[:, 0], sa[:, 2] - sa[:, 0])
    valid = distinct & ((cross * cross).sum(axis=1) >= area_floor)

    best_inliers = None
    if valid.any():
        va, vb = sa[valid], sb[valid]
        ca = va.mean(axis=1, keepdims=True)
        cb = vb.mean(axis=1, keepdims=True)
        h = np.einsum("nij,nik->njk", va - ca, vb - cb)
        u, _, vt = np.linalg.svd(h)
        d = np.sign(np.linalg.det(np.einsum("nji,nkj->nik", vt, u)))
        d[d == 0] = 1.0
        scale_col = np.stack([np.ones_like(d), np.ones_like(d), d], axis=1)
        rot = np.einsum("nji,nkj->nik", vt * scale_col[:, :, None], u)
        trans = cb[:, 0] - np.einsum("nij,nj->ni", rot, ca[:, 0])
        moved = a @ rot.transpose(0, 2, 1)
        moved += trans[:, None, :]
        moved -= b
        np.square(moved, out=moved)
        counts = (moved.sum(axis=2) < inlier_dist * inlier_dist).sum(axis=1)
        best = int(np.argmax(counts))
        if counts[best] >= 3:
            delta = a @ rot[best].T + trans[best] - b
            best_inliers = (delta * delta).sum(axis=1) < inlier_dist * inlier_dist

    if best_inliers is None:
        # every sample was degenerate; fall back to a full least-squares fit
        transform = kabsch(a, b)
    else:
        transform = kabsch(a[best_inliers], b[best_inliers])
    resid = np.linalg.norm(transform.apply(a) - b, axis=1)
    final = resid < inlier_dist
    return transform, float(final.sum()) / m


def is_degenerate(mask: Mask, obs, thickness_threshold: float,
                  plane: Plane | None = None) -> bool:
    """True when the masked surface is too flat to be an object.

    Measures the extent above the supporting surface: the maximum height of
    the masked cloud points over the plane (the table at z=0 when no plane
    is given). A mask covering only the support comes out with extent ~0.
    """
    pts = obs.cloud[mask.data]
    if plane is None:
        extent = float(pts[:, 2].max())
    else:
        extent = float(plane.signed_distance(pts).max())
    return extent < thickness_threshold
