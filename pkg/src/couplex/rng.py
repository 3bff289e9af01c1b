"""Counter-based random streams.

One Philox generator per (seed, substream, path); the path index is placed in
the high word of the 256-bit counter, so per-path streams never overlap and an
ensemble can be generated in any order (or in parallel) with identical output.
"""

from __future__ import annotations

import numpy as np

_U64 = 2**64


def _check_u64(value: int, name: str) -> int:
    value = int(value)
    if not 0 <= value < _U64:
        raise ValueError(f"{name} must be in [0, 2**64), got {value}")
    return value


def path_generator(seed: int, substream: int, path_index: int = 0) -> np.random.Generator:
    """Generator for one path of one substream. Deterministic in all arguments."""
    key = np.array(
        [_check_u64(seed, "seed"), _check_u64(substream, "substream")],
        dtype=np.uint64,
    )
    counter = _check_u64(path_index, "path_index") << 192
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def path_generators(seed: int, substream: int, path_indices) -> list[np.random.Generator]:
    return [path_generator(seed, substream, i) for i in path_indices]
