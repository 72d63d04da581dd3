"""Counter-based random streams.

Every stochastic routine in the package draws from a Philox generator whose
128-bit key is derived from an integer seed plus string tags, so that

* the same (seed, tags) always produces the same stream, on any platform;
* independent subsystems (path sampler, solver, probes) never share a stream.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_key(seed: int, *tags: object) -> int:
    """128-bit Philox key from a seed and a tuple of context tags."""
    payload = repr((int(seed),) + tags).encode()
    return int.from_bytes(hashlib.sha256(payload).digest()[:16], "big")


def generator(seed: int, *tags: object) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=derive_key(seed, *tags)))


def standard_normals(seed: int, shape: tuple[int, ...], *tags: object) -> np.ndarray:
    return generator(seed, *tags).standard_normal(shape)
