"""Wire schema: one JSON object per line, UTF-8, strict alternation.

Query requests:
    {"op": "seed_all" | "high_precision", "frame_id": str}
    {"op": "prompt_point", "frame_id": str, "pixel": [row, col]}
Control requests:
    {"op": "load_frame", "path": str}
    {"op": "shutdown"}
Responses:
    {"masks": [rle, ...], "grid": [h, w] | null}
    plus "error": str on failure and "frame_id": str on load_frame.

Every request gets exactly one response, in order. A malformed line gets
an error response and the connection stays open; only "shutdown" (or the
peer closing the stream) ends the exchange.
"""

from __future__ import annotations

import json
from typing import Any

QUERY_OPS = ("seed_all", "prompt_point", "high_precision")
CONTROL_OPS = ("load_frame", "shutdown")


class ProtocolError(ValueError):
    """The peer sent a line that does not follow the schema."""


def parse_request(line: str) -> dict[str, Any]:
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"bad json: {exc}") from exc
    if not isinstance(msg, dict):
        raise ProtocolError("request must be a json object")
    op = msg.get("op")
    if op not in QUERY_OPS + CONTROL_OPS:
        raise ProtocolError(f"unknown op: {op!r}")
    if op in QUERY_OPS and not isinstance(msg.get("frame_id"), str):
        raise ProtocolError("frame_id must be a string")
    if op == "prompt_point":
        px = msg.get("pixel")
        if (not isinstance(px, list) or len(px) != 2
                or not all(isinstance(v, int) and not isinstance(v, bool)
                           for v in px)):
            raise ProtocolError("pixel must be [row, col] integers")
    if op == "load_frame" and not isinstance(msg.get("path"), str):
        raise ProtocolError("path must be a string")
    return msg


def request_line(op: str, **fields: Any) -> str:
    return json.dumps({"op": op, **fields}, separators=(",", ":"))


def response_line(masks: tuple | list = (), grid: tuple | list | None = None,
                  error: str | None = None, frame_id: str | None = None) -> str:
    msg: dict[str, Any] = {"masks": list(masks),
                           "grid": None if grid is None
                           else [int(v) for v in grid]}
    if error is not None:
        msg["error"] = error
    if frame_id is not None:
        msg["frame_id"] = frame_id
    return json.dumps(msg, separators=(",", ":"))


def parse_response(line: str) -> dict[str, Any]:
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"bad json: {exc}") from exc
    if not isinstance(msg, dict) or "masks" not in msg or "grid" not in msg:
        raise ProtocolError("response must be an object with masks and grid")
    if (not isinstance(msg["masks"], list)
            or not all(isinstance(m, str) for m in msg["masks"])):
        raise ProtocolError("masks must be a list of RLE strings")
    grid = msg["grid"]
    if grid is not None and (not isinstance(grid, list) or len(grid) != 2
                             or not all(isinstance(v, int) for v in grid)):
        raise ProtocolError("grid must be [h, w] or null")
    if msg["masks"] and grid is None:
        raise ProtocolError("mask-bearing response needs a grid")
    return msg
