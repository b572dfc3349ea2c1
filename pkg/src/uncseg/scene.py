"""Synthetic 2.5-D tabletop scenes and quasi-static push dynamics.

Bodies are unions of axis-aligned boxes in their own frame (optionally
stacked via a z offset), posed on the table by (x, y, yaw). Pushes are pure
translations: the contacted body advances along the push direction and any
body in its way is carried ahead (contact chains), with motion clipped at
the table bounds. No rotation, toppling, or friction modeling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

# gap below -PEN_TOL counts as interpenetration; |gap| <= CONTACT_TOL as contact
PEN_TOL = 1e-9
CONTACT_TOL = 1e-6


class SceneGenerationError(RuntimeError):
    """Raised when placement retries are exhausted."""


@dataclass(frozen=True)
class Part:
    """Axis-aligned box in the body frame.

    center is the footprint center (x, y); extents are full side lengths;
    the box spans z_base to z_base + height. z_base lets parts stack.
    """

    center: tuple[float, float]
    extents: tuple[float, float]
    height: float
    z_base: float = 0.0

    def __post_init__(self):
        if self.extents[0] <= 0 or self.extents[1] <= 0 or self.height <= 0:
            raise ValueError("part extents and height must be strictly positive")
        if self.z_base < 0:
            raise ValueError("part z_base must be non-negative")

    @property
    def z_top(self) -> float:
        return self.z_base + self.height


@dataclass(frozen=True)
class RigidBody:
    """A connected union of parts with a planar pose."""

    id: int
    pose: tuple[float, float, float]  # x, y, yaw (radians)
    parts: tuple[Part, ...]

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if not self.parts:
            raise ValueError("body needs at least one part")
        if self.id <= 0:
            raise ValueError("body id must be a positive integer")
        if not _parts_connected(self.parts):
            raise ValueError(f"body {self.id}: parts do not form a connected solid")

    def translated(self, dx: float, dy: float) -> "RigidBody":
        x, y, yaw = self.pose
        return replace(self, pose=(x + dx, y + dy, yaw))


@dataclass(frozen=True)
class Scene:
    """Table bounds plus bodies; validated non-interpenetrating and in-bounds."""

    table: tuple[float, float, float, float]  # xmin, xmax, ymin, ymax
    bodies: tuple[RigidBody, ...]

    def __post_init__(self):
        object.__setattr__(self, "bodies", tuple(self.bodies))
        xmin, xmax, ymin, ymax = self.table
        if xmax <= xmin or ymax <= ymin:
            raise ValueError("degenerate table bounds")
        ids = [b.id for b in self.bodies]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate body ids")
        for b in self.bodies:
            if not _body_in_bounds(b, self.table, CONTACT_TOL):
                raise ValueError(f"body {b.id} footprint leaves the table bounds")
        for i, a in enumerate(self.bodies):
            for b in self.bodies[i + 1:]:
                if body_gap(a, b) < -PEN_TOL * 10:
                    raise ValueError(f"bodies {a.id} and {b.id} interpenetrate")

    def body(self, body_id: int) -> RigidBody:
        for b in self.bodies:
            if b.id == body_id:
                return b
        raise KeyError(f"no body with id {body_id}")


@dataclass(frozen=True)
class PushAction:
    """Straight pusher sweep: a vertical stick travels from target along
    direction for distance meters."""

    target: tuple[float, float]
    direction: tuple[float, float]
    distance: float

    def __post_init__(self):
        norm = math.hypot(*self.direction)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError("direction must be a unit vector")
        if self.distance <= 0:
            raise ValueError("distance must be strictly positive")


@dataclass(frozen=True)
class PushOutcome:
    scene: Scene
    contact: bool
    body_id: int | None
    displacements: dict[int, float] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# part/body geometry helpers

def _rot(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s], [s, c]])


def part_world_corners(body: RigidBody, part: Part,
                       shift: tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    """Footprint corners of a part in world frame, (4, 2)."""
    x, y, yaw = body.pose
    ex, ey = part.extents[0] / 2.0, part.extents[1] / 2.0
    local = np.array([[-ex, -ey], [ex, -ey], [ex, ey], [-ex, ey]]) + np.array(part.center)
    world = local @ _rot(yaw).T + np.array([x + shift[0], y + shift[1]])
    return world


def _sat_gap_2d(pa: np.ndarray, pb: np.ndarray) -> float:
    """Max separation over the face normals of two convex polygons.

    Positive: disjoint by at least this much along some axis.
    Negative: overlapping (value is the best-axis penetration estimate).
    """
    best = -np.inf
    for poly in (pa, pb):
        edges = np.roll(poly, -1, axis=0) - poly
        normals = np.stack([-edges[:, 1], edges[:, 0]], axis=1)
        lens = np.linalg.norm(normals, axis=1)
        normals = normals[lens > 1e-15] / lens[lens > 1e-15, None]
        for n in normals:
            a_lo, a_hi = (pa @ n).min(), (pa @ n).max()
            b_lo, b_hi = (pb @ n).min(), (pb @ n).max()
            gap = max(b_lo - a_hi, a_lo - b_hi)
            if gap > best:
                best = gap
    return float(best)


def _part_pair_gap(body_a: RigidBody, part_a: Part, body_b: RigidBody, part_b: Part,
                   shift_a=(0.0, 0.0), shift_b=(0.0, 0.0)) -> float:
    z_gap = max(part_a.z_base - part_b.z_top, part_b.z_base - part_a.z_top)
    xy_gap = _sat_gap_2d(part_world_corners(body_a, part_a, shift_a),
                         part_world_corners(body_b, part_b, shift_b))
    return max(xy_gap, z_gap)


def body_gap(a: RigidBody, b: RigidBody, shift_a=(0.0, 0.0), shift_b=(0.0, 0.0)) -> float:
    """Approximate signed clearance between two bodies (negative = overlap)."""
    return min(_part_pair_gap(a, pa, b, pb, shift_a, shift_b)
               for pa in a.parts for pb in b.parts)


def bodies_penetrate(a: RigidBody, b: RigidBody, tol: float = PEN_TOL) -> bool:
    return body_gap(a, b) < -tol


def bodies_in_contact(a: RigidBody, b: RigidBody, tol: float = CONTACT_TOL) -> bool:
    """Zero-gap touch within tol, without interpenetration beyond tol."""
    g = body_gap(a, b)
    return -tol <= g <= tol


def _parts_connected(parts: tuple[Part, ...]) -> bool:
    n = len(parts)
    if n == 1:
        return True
    probe = RigidBody.__new__(RigidBody)  # bare carrier for pose; bypass validation
    object.__setattr__(probe, "id", 1)
    object.__setattr__(probe, "pose", (0.0, 0.0, 0.0))
    object.__setattr__(probe, "parts", parts)
    adj = [[_part_pair_gap(probe, parts[i], probe, parts[j]) <= CONTACT_TOL
            for j in range(n)] for i in range(n)]
    seen = {0}
    stack = [0]
    while stack:
        i = stack.pop()
        for j in range(n):
            if j not in seen and adj[i][j]:
                seen.add(j)
                stack.append(j)
    return len(seen) == n


def _body_in_bounds(body: RigidBody, table, tol: float) -> bool:
    xmin, xmax, ymin, ymax = table
    for part in body.parts:
        corners = part_world_corners(body, part)
        if (corners[:, 0] < xmin - tol).any() or (corners[:, 0] > xmax + tol).any():
            return False
        if (corners[:, 1] < ymin - tol).any() or (corners[:, 1] > ymax + tol).any():
            return False
    return True


def body_radius(body: RigidBody) -> float:
    """Radius of the smallest origin-centered disc covering the footprint."""
    r = 0.0
    for part in body.parts:
        corners = part_world_corners(body, part)
        x, y, _ = body.pose
        r = max(r, float(np.linalg.norm(corners - np.array([x, y]), axis=1).max()))
    return r


# ---------------------------------------------------------------------------
# push dynamics

def _ray_box_entry(target, direction, distance, body: RigidBody, part: Part) -> float | None:
    """Entry parameter t in [0, distance] of the pusher path into a part
    footprint, or None if the path misses it."""
    x, y, yaw = body.pose
    rot = _rot(-yaw)
    p0 = rot @ (np.array(target) - np.array([x, y])) - np.array(part.center)
    d = rot @ np.array(direction)
    ex, ey = part.extents[0] / 2.0, part.extents[1] / 2.0
    t_lo, t_hi = 0.0, distance
    for axis, e in ((0, ex), (1, ey)):
        if abs(d[axis]) < 1e-15:
            if p0[axis] < -e or p0[axis] > e:
                return None
            continue
        t1 = (-e - p0[axis]) / d[axis]
        t2 = (e - p0[axis]) / d[axis]
        if t1 > t2:
            t1, t2 = t2, t1
        t_lo = max(t_lo, t1)
        t_hi = min(t_hi, t2)
        if t_lo > t_hi:
            return None
    return t_lo


def _first_hit(scene: Scene, action: PushAction) -> tuple[int | None, float]:
    best_t = math.inf
    best_id = None
    for body in sorted(scene.bodies, key=lambda b: b.id):
        for part in body.parts:
            t = _ray_box_entry(action.target, action.direction, action.distance, body, part)
            if t is not None and t < best_t - 1e-12:
                best_t = t
                best_id = body.id
    return best_id, best_t


def _bound_cap(body: RigidBody, table, direction) -> float:
    """Largest advance along direction keeping the footprint inside the table."""
    xmin, xmax, ymin, ymax = table
    dx, dy = direction
    cap = math.inf
    for part in body.parts:
        for cx, cy in part_world_corners(body, part):
            if dx > 1e-15:
                cap = min(cap, (xmax - cx) / dx)
            elif dx < -1e-15:
                cap = min(cap, (xmin - cx) / dx)
            if dy > 1e-15:
                cap = min(cap, (ymax - cy) / dy)
            elif dy < -1e-15:
                cap = min(cap, (ymin - cy) / dy)
    return max(cap, 0.0)


def _free_travel(mover: RigidBody, static: RigidBody, direction, limit: float) -> float:
    """Largest t in [0, limit] such that mover advanced by t*direction does
    not interpenetrate static. Scans then bisects the first crossing."""
    def gap_at(t: float) -> float:
        return body_gap(mover, static, shift_a=(direction[0] * t, direction[1] * t))

    if body_gap(mover, static) > limit:  # cannot reach within the budget
        return math.inf
    # scan finer than the smallest feature so thin crossings are not skipped
    step = max(min(0.25 * min(min(p.extents) for p in static.parts), limit / 8), 1e-6)
    if gap_at(0.0) < 0.0:
        return 0.0
    t_prev = 0.0
    t = step
    hit = None
    while t_prev < limit:
        t_cur = min(t, limit)
        if gap_at(t_cur) < 0.0:
            hit = (t_prev, t_cur)
            break
        t_prev = t_cur
        t += step
    if hit is None:
        return math.inf
    lo, hi = hit  # gap(lo) >= 0, gap(hi) < 0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if gap_at(mid) < 0.0:
            hi = mid
        else:
            lo = mid
    return lo


def apply_push(scene: Scene, action: PushAction) -> PushOutcome:
    """Quasi-static pure-translation push.

    The first body footprint the pusher path enters is contacted and
    advances by the full action distance along direction, clipped at the
    table bounds. Bodies in its way are carried ahead (contact chains,
    minimal forced displacement) and the chain back-pressures the pusher
    when someone jams against the bounds. Bodies never end interpenetrating.
    """
    hit_id, _ = _first_hit(scene, action)
    if hit_id is None:
        return PushOutcome(scene, contact=False, body_id=None)

    direction = action.direction
    bodies = sorted(scene.bodies, key=lambda b: b.id)
    ids = [b.id for b in bodies]
    by_id = {b.id: b for b in bodies}
    n = len(bodies)

    caps = {i: _bound_cap(by_id[i], scene.table, direction) for i in ids}
    # free travel c[i][j]: how far i may advance before hitting j
    c: dict[int, dict[int, float]] = {i: {} for i in ids}
    for i in ids:
        for j in ids:
            if i == j:
                continue
            c[i][j] = _free_travel(by_id[i], by_id[j], direction, action.distance)

    # cap relaxation: cap[i] = min(bound cap, cap[j] + c[i][j]); Bellman-Ford
    eff = dict(caps)
    for _ in range(n):
        changed = False
        for i in ids:
            for j in ids:
                if i == j:
                    continue
                bound = eff[j] + c[i][j]
                if bound < eff[i] - 1e-15:
                    eff[i] = bound
                    changed = True
        if not changed:
            break

    disp = {i: 0.0 for i in ids}
    disp[hit_id] = min(action.distance, eff[hit_id])
    # forward minimal propagation (longest-path relaxation, O(n) sweeps)
    for _ in range(n + 1):
        changed = False
        for i in ids:
            if disp[i] <= 0.0:
                continue
            for j in ids:
                if i == j:
                    continue
                need = disp[i] - c[i][j]
                if need > disp[j] + 1e-15:
                    disp[j] = need
                    changed = True
        if not changed:
            break

    moved = [by_id[i].translated(disp[i] * direction[0], disp[i] * direction[1])
             for i in ids]
    new_scene = Scene(scene.table, tuple(moved))
    return PushOutcome(new_scene, contact=True, body_id=hit_id,
                       displacements={i: disp[i] for i in ids if disp[i] > 0.0})


# ---------------------------------------------------------------------------
# generation

@dataclass(frozen=True)
class GenConfig:
    """Random scene generation parameters.

    clutter_fraction is the probability that each body after the first is
    slid into zero-gap contact with an existing body; otherwise it is placed
    with at least clearance meters of free space around it.
    """

    table: tuple[float, float, float, float] = (0.0, 0.64, 0.0, 0.48)
    body_count: tuple[int, int] = (3, 5)
    part_count: tuple[int, int] = (1, 3)
    extent_range: tuple[float, float] = (0.03, 0.09)
    height_range: tuple[float, float] = (0.02, 0.06)
    clutter_fraction: float = 0.5
    stack_probability: float = 0.25
    clearance: float = 0.02
    max_yaw: float = math.pi / 2
    max_attempts: int = 5000


def _random_part(rng: np.random.Generator, cfg: GenConfig) -> tuple[float, float, float]:
    ex = float(rng.uniform(*cfg.extent_range))
    ey = float(rng.uniform(*cfg.extent_range))
    h = float(rng.uniform(*cfg.height_range))
    return ex, ey, h


def _random_body_shape(rng: np.random.Generator, cfg: GenConfig) -> tuple[Part, ...]:
    n_parts = int(rng.integers(cfg.part_count[0], cfg.part_count[1] + 1))
    ex, ey, h = _random_part(rng, cfg)
    parts = [Part((0.0, 0.0), (ex, ey), h)]
    for _ in range(n_parts - 1):
        anchor = parts[int(rng.integers(0, len(parts)))]
        ex, ey, h = _random_part(rng, cfg)
        if rng.random() < cfg.stack_probability:
            # stack a smaller footprint on top of the anchor
            ex = min(ex, anchor.extents[0])
            ey = min(ey, anchor.extents[1])
            sx = float(rng.uniform(-0.5, 0.5)) * (anchor.extents[0] - ex)
            sy = float(rng.uniform(-0.5, 0.5)) * (anchor.extents[1] - ey)
            parts.append(Part((anchor.center[0] + sx, anchor.center[1] + sy),
                              (ex, ey), h, z_base=anchor.z_top))
        else:
            # attach flush to a random side, sliding along it while the two
            # faces still share at least half the smaller face
            axis = int(rng.integers(0, 2))
            side = 1.0 if rng.random() < 0.5 else -1.0
            offset = [0.0, 0.0]
            offset[axis] = side * (anchor.extents[axis] + (ex, ey)[axis]) / 2.0
            other = 1 - axis
            max_slide = (anchor.extents[other] + (ex, ey)[other]) / 2.0 \
                - min(anchor.extents[other], (ex, ey)[other]) / 2.0
            offset[other] = float(rng.uniform(-max_slide, max_slide))
            parts.append(Part((anchor.center[0] + offset[0], anchor.center[1] + offset[1]),
                              (ex, ey), h))
    return tuple(parts)


def _min_gap_to_all(body: RigidBody, others: list[RigidBody]) -> float:
    if not others:
        return math.inf
    return min(body_gap(body, o) for o in others)


def generate_scene(config: GenConfig, rng: np.random.Generator) -> Scene:
    """Sample a valid scene: bodies in bounds, contacts allowed, no overlap.

    Raises:
        SceneGenerationError: when max_attempts placements fail ("scene
        generation saturated").
    """
    xmin, xmax, ymin, ymax = config.table
    n_bodies = int(rng.integers(config.body_count[0], config.body_count[1] + 1))
    placed: list[RigidBody] = []
    attempts = 0
    next_id = 1
    while len(placed) < n_bodies:
        if attempts >= config.max_attempts:
            raise SceneGenerationError("scene generation saturated")
        attempts += 1
        parts = _random_body_shape(rng, config)
        yaw = float(rng.uniform(0.0, config.max_yaw))
        want_contact = bool(placed) and rng.random() < config.clutter_fraction
        if want_contact:
            anchor = placed[int(rng.integers(0, len(placed)))]
            theta = float(rng.uniform(0.0, 2 * math.pi))
            u = np.array([math.cos(theta), math.sin(theta)])
            probe = RigidBody(next_id, (0.0, 0.0, yaw), parts)
            start = body_radius(anchor) + body_radius(probe) + 0.005
            ax, ay, _ = anchor.pose
            pos = np.array([ax, ay]) + start * u
            body = RigidBody(next_id, (float(pos[0]), float(pos[1]), yaw), parts)
            # slide toward the anchor until first contact with anything placed
            travel = _free_travel_multi(body, placed, (-u[0], -u[1]), start)
            if not math.isfinite(travel):
                continue
            body = body.translated(-u[0] * travel, -u[1] * travel)
            if not _body_in_bounds(body, config.table, 0.0):
                continue
            if _min_gap_to_all(body, placed) < -PEN_TOL:
                continue
        else:
            x = float(rng.uniform(xmin, xmax))
            y = float(rng.uniform(ymin, ymax))
            body = RigidBody(next_id, (x, y, yaw), parts)
            if not _body_in_bounds(body, config.table, 0.0):
                continue
            if _min_gap_to_all(body, placed) < config.clearance:
                continue
        placed.append(body)
        next_id += 1
    return Scene(config.table, tuple(placed))


def _free_travel_multi(mover: RigidBody, statics: list[RigidBody], direction,
                       limit: float) -> float:
    travel = math.inf
    for s in statics:
        travel = min(travel, _free_travel(mover, s, direction, limit))
    return travel
