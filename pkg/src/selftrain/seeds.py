"""Deterministic seed derivation.

Every run draws from a single root seed; sub-seeds for sampling, training,
per-iteration selection, and sweep cells are derived with `mix`, so any
component can be re-run in isolation and reproduce the full run exactly.
"""

from __future__ import annotations

import hashlib


def mix(*parts: object) -> int:
    """Derive a non-negative 63-bit seed from the given parts.

    The key is the '|'-joined str() of the parts hashed with blake2b
    (8-byte digest, big-endian), top bit cleared. Stable across platforms
    and Python versions.
    """
    key = "|".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1
