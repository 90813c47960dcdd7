"""Canonical JSON and bitstring encodings shared by all wire objects."""

from __future__ import annotations

import json
from typing import Any

import numpy as np

SCHEMA_VERSION = 1


def bits_to_hex(bits) -> str:
    """'<nbits>:<hex>' with bits packed most significant first."""
    arr = np.asarray(bits, dtype=np.uint8).reshape(-1)
    return f"{arr.size}:{np.packbits(arr).tobytes().hex()}"


def hex_to_bits(s: str) -> np.ndarray:
    n, h = s.split(":", 1)
    raw = np.frombuffer(bytes.fromhex(h), dtype=np.uint8)
    return np.unpackbits(raw)[: int(n)].copy()


def ints_to_hex(values, dtype=np.uint16) -> str:
    return np.asarray(values, dtype=dtype).astype(dtype).tobytes().hex()


def hex_to_ints(s: str, dtype=np.uint16) -> np.ndarray:
    return np.frombuffer(bytes.fromhex(s), dtype=dtype).astype(np.int64)


def _default(o: Any):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "to_dict"):
        return o.to_dict()
    raise TypeError(f"not serializable: {type(o).__name__}")


def canonical_json(obj: Any) -> str:
    """Deterministic encoding: sorted keys, no whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_default)
