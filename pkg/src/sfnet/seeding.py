"""Deterministic seed derivation.

Every derived stream in the package (per-sample generator seeds, per-stage
pipeline seeds) comes from `derive_seed`, a chain of SplitMix64 finalizer
steps. The construction is pure integer arithmetic, so derived seeds are
identical on every platform and Python version.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One SplitMix64 step: advance by the golden-gamma constant and finalize."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def derive_seed(master: int, *path: int) -> int:
    """Derive a 64-bit seed from a master seed and an integer path.

    Distinct paths give independent-for-practical-purposes seeds, and the
    mapping is stable: (master, path) always yields the same value.
    """
    state = splitmix64(master & _MASK64)
    for part in path:
        state = splitmix64(state ^ (part & _MASK64))
    return state
