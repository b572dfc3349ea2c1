"""Segmenter implementation that forwards queries to a bridge process.

BridgeSegmenter satisfies the query protocol the hypothesis generator
expects, so a served model drops into the pipeline wherever an
in-process segmenter would go. Calls are serialized per instance; run
several instances for parallelism. The rng arguments are accepted and
ignored because randomness lives on the server side.
"""

from __future__ import annotations

import json
import subprocess
from typing import Sequence

from uncseg.masks import Mask, MaskSource
from uncseg.segmenter import StaleFrameError

from . import rle
from .protocol import ProtocolError, parse_response, request_line


class TransportError(RuntimeError):
    """The bridge process went away mid-exchange.

    Unlike ProtocolError this is retriable: spawn a fresh bridge, reload
    the frame, and repeat the request.
    """


class BridgeSegmenter:
    def __init__(self, command: Sequence[str]):
        self._proc = subprocess.Popen(
            list(command), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, bufsize=1)

    # -- transport ----------------------------------------------------------

    def _call(self, line: str) -> dict:
        if self._proc.stdin is None or self._proc.stdout is None:
            raise TransportError("bridge streams are closed")
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError, ValueError) as exc:
            # ValueError covers writes on a stream closed by shutdown()
            raise TransportError(f"bridge write failed: {exc}") from exc
        reply = self._proc.stdout.readline()
        if not reply:
            raise TransportError("bridge closed the stream")
        msg = parse_response(reply)
        error = msg.get("error")
        if error == "stale frame":
            raise StaleFrameError("stale frame")
        if error is not None:
            raise ProtocolError(error)
        return msg

    def _masks(self, msg: dict, source: MaskSource) -> list[Mask]:
        h, w = msg["grid"]
        return [Mask(rle.decode(r, (h, w)), source) for r in msg["masks"]]

    # -- control ------------------------------------------------------------

    def load_frame(self, path: str) -> str:
        msg = self._call(request_line("load_frame", path=str(path)))
        frame_id = msg.get("frame_id")
        if not isinstance(frame_id, str):
            raise ProtocolError("load_frame response carries no frame_id")
        return frame_id

    def shutdown(self) -> None:
        if self._proc.poll() is None:
            try:
                self._call(request_line("shutdown"))
            except TransportError:
                pass
        if self._proc.stdin is not None:
            self._proc.stdin.close()
        self._proc.wait(timeout=10)

    def __enter__(self) -> "BridgeSegmenter":
        return self

    def __exit__(self, *exc_info) -> None:
        self.shutdown()

    # -- queries ------------------------------------------------------------

    def seed_all(self, handle: str, rng=None) -> list[Mask]:
        msg = self._call(request_line("seed_all", frame_id=handle))
        return self._masks(msg, MaskSource.BOTTOM_UP)

    def prompt_point(self, handle: str, pixel: tuple[int, int],
                     rng=None) -> Mask:
        msg = self._call(request_line(
            "prompt_point", frame_id=handle,
            pixel=[int(pixel[0]), int(pixel[1])]))
        masks = self._masks(msg, MaskSource.BOTTOM_UP)
        if len(masks) != 1:
            raise ProtocolError(f"prompt_point returned {len(masks)} masks")
        return masks[0]

    def high_precision(self, handle: str, rng=None) -> list[Mask]:
        msg = self._call(request_line("high_precision", frame_id=handle))
        return self._masks(msg, MaskSource.TOP_DOWN)
