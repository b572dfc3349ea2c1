"""Text serialization: scenes, PGM image maps, hypothesis sets, and belief
snapshots.

All formats are line-oriented UTF-8 text. Floats are written with repr so
values round-trip exactly; masks travel as run-length strings over
row-major pixel order. Serialization is byte-deterministic for identical
inputs, which downstream equivalence tests rely on.
"""

from __future__ import annotations

import numpy as np

from .belief import Belief
from .geometry import Plane
from .hypotheses import Region, RegionHypothesis, RegionKind, SegmentationHypotheses
from .masks import Mask, MaskSource
from .scene import Part, RigidBody, Scene


class FormatError(ValueError):
    pass


def _floats(values) -> str:
    return " ".join(repr(float(v)) for v in values)


# ---------------------------------------------------------------------------
# scene documents

def scene_to_text(scene: Scene) -> str:
    lines = ["scene", "table " + _floats(scene.table)]
    for body in sorted(scene.bodies, key=lambda b: b.id):
        lines.append(f"body {body.id} pose " + _floats(body.pose))
        for part in body.parts:
            lines.append("part " + _floats(
                (*part.center, *part.extents, part.height, part.z_base)))
    return "\n".join(lines) + "\n"


def scene_from_text(text: str) -> Scene:
    lines = [ln.strip() for ln in text.splitlines()
             if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0] != "scene":
        raise FormatError("not a scene document")
    table: tuple[float, ...] | None = None
    bodies: list[RigidBody] = []
    body_id: int | None = None
    pose: tuple[float, float, float] | None = None
    parts: list[Part] = []

    def flush():
        nonlocal body_id, pose, parts
        if body_id is not None:
            try:
                bodies.append(RigidBody(body_id, pose, tuple(parts)))
            except ValueError as exc:
                raise FormatError(f"bad body {body_id}: {exc}") from exc
        body_id, pose, parts = None, None, []

    for ln in lines[1:]:
        tok = ln.split()
        if tok[0] == "table":
            table = tuple(float(v) for v in tok[1:5])
        elif tok[0] == "body":
            flush()
            if len(tok) != 6 or tok[2] != "pose":
                raise FormatError(f"bad body line: {ln}")
            body_id = int(tok[1])
            pose = (float(tok[3]), float(tok[4]), float(tok[5]))
        elif tok[0] == "part":
            if body_id is None or len(tok) != 7:
                raise FormatError(f"bad part line: {ln}")
            vals = [float(v) for v in tok[1:]]
            parts.append(Part((vals[0], vals[1]), (vals[2], vals[3]),
                              vals[4], vals[5]))
        else:
            raise FormatError(f"unknown scene record: {tok[0]}")
    flush()
    if table is None:
        raise FormatError("scene document missing table bounds")
    return Scene(table, tuple(bodies))


# ---------------------------------------------------------------------------
# PGM image maps (plain ASCII, P2)

DEPTH_SCALE = 10000  # PGM counts per meter


def labels_to_pgm(labels: np.ndarray) -> str:
    if labels.ndim != 2 or (labels < 0).any():
        raise ValueError("labels must be a 2-D grid of nonnegative ids")
    maxval = max(1, int(labels.max()))
    rows = "\n".join(" ".join(str(int(v)) for v in row) for row in labels)
    return f"P2\n# label map\n{labels.shape[1]} {labels.shape[0]}\n{maxval}\n{rows}\n"


def depth_to_pgm(depth: np.ndarray, scale: int = DEPTH_SCALE) -> str:
    if depth.ndim != 2 or (depth < 0).any():
        raise ValueError("depth must be a 2-D grid of nonnegative heights")
    quantized = np.rint(depth * scale).astype(np.int64)
    maxval = max(1, int(quantized.max()))
    rows = "\n".join(" ".join(str(int(v)) for v in row) for row in quantized)
    return (f"P2\n# depth scale {scale} counts per meter\n"
            f"{depth.shape[1]} {depth.shape[0]}\n{maxval}\n{rows}\n")


def _pgm_tokens(text: str) -> tuple[list[str], list[str]]:
    comments = []
    tokens: list[str] = []
    for ln in text.splitlines():
        if ln.startswith("#"):
            comments.append(ln[1:].strip())
            continue
        tokens.extend(ln.split())
    return tokens, comments


def pgm_to_array(text: str) -> np.ndarray:
    """Plain-PGM payload as an integer grid (labels or quantized depth)."""
    tokens, _ = _pgm_tokens(text)
    if not tokens or tokens[0] != "P2":
        raise FormatError("not a plain PGM (P2) document")
    if len(tokens) < 4:
        raise FormatError("truncated PGM header")
    w, h = int(tokens[1]), int(tokens[2])
    values = [int(t) for t in tokens[4:]]
    if len(values) != w * h:
        raise FormatError("PGM pixel count does not match header")
    return np.array(values, dtype=np.int64).reshape(h, w)


def pgm_to_depth(text: str) -> np.ndarray:
    """Depth in meters, using the scale declared in the header comment."""
    tokens, comments = _pgm_tokens(text)
    scale = None
    for comment in comments:
        parts = comment.split()
        if len(parts) >= 3 and parts[0] == "depth" and parts[1] == "scale":
            scale = float(parts[2])
    if scale is None:
        raise FormatError("depth PGM missing scale comment")
    return pgm_to_array(text).astype(np.float64) / scale


# ---------------------------------------------------------------------------
# hypothesis documents

def hypotheses_to_text(result: SegmentationHypotheses,
                       shape: tuple[int, int]) -> str:
    lines = ["hypotheses", f"grid {shape[0]} {shape[1]}"]
    if result.plane is not None:
        lines.append("plane " + _floats((*result.plane.normal,
                                         result.plane.offset)))
    lines.append(f"confident {len(result.confident)}")
    for mask in result.confident:
        lines.append(f"mask {mask.source.value} {mask.to_rle()}")
    lines.append(f"regions {len(result.uncertain)}")
    for region, hyps in result.uncertain:
        seed = region.seed.to_rle() if region.seed is not None else "none"
        lines.append(f"region {region.kind.value} {len(hyps)} "
                     f"{region.footprint.to_rle()} {seed}")
        for hyp in hyps:
            lines.append(f"hyp {repr(float(hyp.weight))} "
                         f"{int(hyp.partial)} {len(hyp.masks)}")
            for mask in hyp.masks:
                lines.append(f"mask {mask.source.value} {mask.to_rle()}")
    return "\n".join(lines) + "\n"


def hypotheses_from_text(text: str) -> tuple[SegmentationHypotheses,
                                             tuple[int, int]]:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "hypotheses":
        raise FormatError("not a hypotheses document")
    pos = 1

    def take() -> str:
        nonlocal pos
        if pos >= len(lines):
            raise FormatError("truncated hypotheses document")
        ln = lines[pos]
        pos += 1
        return ln

    tok = take().split()
    if tok[0] != "grid":
        raise FormatError("missing grid line")
    shape = (int(tok[1]), int(tok[2]))

    plane = None
    tok = take().split()
    if tok[0] == "plane":
        vals = [float(v) for v in tok[1:5]]
        plane = Plane(np.array(vals[:3]), vals[3])
        tok = take().split()

    def read_mask(line: str) -> Mask:
        _, source, rle = line.split(" ", 2)
        return Mask.from_rle(rle, shape, MaskSource(source))

    if tok[0] != "confident":
        raise FormatError("missing confident section")
    confident = tuple(read_mask(take()) for _ in range(int(tok[1])))

    tok = take().split()
    if tok[0] != "regions":
        raise FormatError("missing regions section")
    uncertain = []
    for _ in range(int(tok[1])):
        rtok = take().split()
        if rtok[0] != "region" or len(rtok) != 5:
            raise FormatError("bad region line")
        kind = RegionKind(rtok[1])
        count = int(rtok[2])
        footprint = Mask.from_rle(rtok[3], shape)
        seed = None if rtok[4] == "none" else Mask.from_rle(rtok[4], shape)
        hyps = []
        for _ in range(count):
            htok = take().split()
            if htok[0] != "hyp":
                raise FormatError("bad hypothesis line")
            weight, partial, n_masks = float(htok[1]), bool(int(htok[2])), int(htok[3])
            masks = tuple(read_mask(take()) for _ in range(n_masks))
            hyps.append(RegionHypothesis(masks, weight, partial))
        uncertain.append((Region(footprint, kind, seed), tuple(hyps)))
    return SegmentationHypotheses(confident, tuple(uncertain), plane), shape


# ---------------------------------------------------------------------------
# belief snapshots (write-only, for experiment logs)

def belief_to_text(belief: Belief) -> str:
    lines = ["belief", f"confident {len(belief.confident)}"]

    def obj_lines(obj) -> None:
        history = ";".join(f"{t}:{repr(s)}:{repr(d)}"
                           for t, s, d in obj.score_history)
        lines.append(f"object wholeness {repr(obj.wholeness)} "
                     f"points {obj.cloud.points.shape[0]} "
                     f"history {history if history else 'none'}")

    for obj in belief.confident:
        obj_lines(obj)
    lines.append(f"regions {len(belief.regions)}")
    for region in belief.regions:
        lines.append(f"region hypotheses {len(region.hypotheses)} "
                     f"footprint {region.footprint.to_rle()}")
        for hyp in region.hypotheses:
            lines.append(f"hyp weight {repr(float(hyp.weight))} "
                         f"objects {len(hyp.objects)}")
            for obj in hyp.objects:
                obj_lines(obj)
    return "\n".join(lines) + "\n"
