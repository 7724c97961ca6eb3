"""Seeded counter-based random streams.

Each ``(seed, index)`` pair keys its own Philox stream, so replicate ``b`` of
an experiment draws the same numbers no matter how many replicates run or in
which order they are evaluated.
"""
import numpy as np


def stream(seed: int, index: int = 0) -> np.random.Generator:
    if seed < 0 or index < 0:
        raise ValueError("seed and index must be non-negative")
    key = np.array([seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def normal_block(seed: int, n_rows: int, n_cols: int, offset: int = 0) -> np.ndarray:
    """Row ``b`` is ``n_cols`` standard normals from substream ``offset + b``."""
    out = np.empty((n_rows, n_cols))
    for b in range(n_rows):
        out[b] = stream(seed, offset + b).standard_normal(n_cols)
    return out
