"""Stable seed derivation.

Every stochastic stage derives child seeds from a master seed plus string
context via a cryptographic hash, so results never depend on call order,
scheduling or Python's per-process hash randomization.
"""

import hashlib

import numpy as np

_MASK = (1 << 63) - 1


def derive_seed(seed: int, *context) -> int:
    """Derive a stable 63-bit child seed from ``seed`` and context values."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed)).encode("utf-8"))
    for part in context:
        h.update(b"\x1f")
        h.update(str(part).encode("utf-8"))
    return int.from_bytes(h.digest(), "big") & _MASK


def rng_for(seed: int, *context) -> np.random.Generator:
    """A numpy Generator keyed by (seed, context)."""
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *context)))
