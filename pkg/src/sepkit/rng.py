"""Named, derived random streams.

All randomness in a run flows from one integer seed. Each consumer asks for
a stream by name (plus any identifying parts, e.g. an instance id) so that
adding a consumer never shifts the numbers another consumer sees.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(seed: int, *names: object) -> int:
    """Deterministic 63-bit seed for the stream ``names`` under ``seed``."""
    h = hashlib.sha256(str(int(seed)).encode())
    for name in names:
        h.update(b"\x1f")
        h.update(str(name).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big") >> 1


def derive_rng(seed: int, *names: object) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *names))
