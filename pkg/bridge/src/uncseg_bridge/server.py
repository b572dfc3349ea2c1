"""Serving loop exposing a segmenter backend over line-delimited stdio.

The shipped backend wraps the ground-truth oracle: frames are loaded
from scene documents, and the error model plus its random stream are
fixed at launch. Because the stream lives server-side, a run is
reproducible and can be paired exactly with an in-process segmenter
built from the same seed. A real-model backend only needs the same four
methods (load_frame, seed_all, prompt_point, high_precision).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import IO, Iterable

from uncseg.render import render
from uncseg.segmenter import (OracleConfig, OracleSegmenter, SeededSegmenter,
                              StaleFrameError)
from uncseg.serialize import FormatError, scene_from_text

from . import rle
from .protocol import ProtocolError, parse_request, response_line


class OracleBackend:
    """Ground-truth scenes in, the three segmentation queries out."""

    def __init__(self, config: OracleConfig, seed: int, resolution: float):
        self.resolution = resolution
        self._oracle = OracleSegmenter(config)
        self._seg = SeededSegmenter(self._oracle, seed)
        self._grids: dict[str, tuple[int, int]] = {}

    def load_frame(self, path: str) -> tuple[str, tuple[int, int]]:
        scene = scene_from_text(Path(path).read_text())
        obs = render(scene, self.resolution)
        frame_id = self._oracle.register(scene, obs)
        self._grids[frame_id] = obs.shape
        return frame_id, obs.shape

    def _grid(self, frame_id: str) -> tuple[int, int]:
        try:
            return self._grids[frame_id]
        except KeyError:
            raise StaleFrameError("stale frame") from None

    def seed_all(self, frame_id: str) -> tuple[list[str], tuple[int, int]]:
        grid = self._grid(frame_id)
        masks = self._seg.seed_all(frame_id)
        return [rle.encode(m.data) for m in masks], grid

    def prompt_point(self, frame_id: str, pixel: tuple[int, int]
                     ) -> tuple[list[str], tuple[int, int]]:
        grid = self._grid(frame_id)
        mask = self._seg.prompt_point(frame_id, pixel)
        return [rle.encode(mask.data)], grid

    def high_precision(self, frame_id: str) -> tuple[list[str], tuple[int, int]]:
        grid = self._grid(frame_id)
        masks = self._seg.high_precision(frame_id)
        return [rle.encode(m.data) for m in masks], grid


def serve(backend, lines: Iterable[str], out: IO[str]) -> None:
    """Answer requests until shutdown or the input stream ends."""

    def reply(line: str) -> None:
        out.write(line + "\n")
        out.flush()

    for raw in lines:
        if not raw.strip():
            continue
        try:
            msg = parse_request(raw)
        except ProtocolError as exc:
            reply(response_line(error=str(exc)))
            continue
        op = msg["op"]
        if op == "shutdown":
            reply(response_line())
            return
        try:
            if op == "load_frame":
                frame_id, grid = backend.load_frame(msg["path"])
                reply(response_line(grid=grid, frame_id=frame_id))
            elif op == "prompt_point":
                masks, grid = backend.prompt_point(msg["frame_id"],
                                                   tuple(msg["pixel"]))
                reply(response_line(masks=masks, grid=grid))
            else:
                masks, grid = getattr(backend, op)(msg["frame_id"])
                reply(response_line(masks=masks, grid=grid))
        except StaleFrameError:
            reply(response_line(error="stale frame"))
        except (OSError, FormatError, ValueError) as exc:
            reply(response_line(error=f"{type(exc).__name__}: {exc}"))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="uncseg-bridge-oracle",
        description="serve the ground-truth oracle segmenter over stdio")
    p.add_argument("--seed", type=int, required=True,
                   help="seed of the server-side noise stream")
    p.add_argument("--resolution", type=float, default=0.005)
    p.add_argument("--p-part", type=float, default=0.0)
    p.add_argument("--p-merge", type=float, default=0.0)
    p.add_argument("--boundary-noise", type=int, default=0)
    p.add_argument("--td-recall", type=float, default=1.0)
    p.add_argument("--td-merge", type=float, default=0.0)
    p.add_argument("--seeds-per-body", type=int, default=3)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = OracleConfig(p_part=args.p_part, p_merge=args.p_merge,
                          boundary_noise=args.boundary_noise,
                          td_recall=args.td_recall, td_merge=args.td_merge,
                          seeds_per_body=args.seeds_per_body)
    serve(OracleBackend(config, args.seed, args.resolution),
          sys.stdin, sys.stdout)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
