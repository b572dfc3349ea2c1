"""Serve promptable segmenters to the uncseg pipeline over stdio.

The server side lives in uncseg_bridge.server and is not imported here,
so running it with "python -m uncseg_bridge.server" stays clean.
"""

from .client import BridgeSegmenter, TransportError
from .protocol import ProtocolError

__all__ = ["BridgeSegmenter", "TransportError", "ProtocolError"]
