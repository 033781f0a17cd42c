"""Counter-based random streams.

Every replica gets a 64-bit key derived from (master seed, replica index).
Edge uniforms are a hash of (key, edge coordinates, axis), so the state of an
edge never depends on traversal order, box size or worker layout.  Gaussian
noise uses a Philox generator keyed the same way.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_OFFSET = np.int64(1 << 31)
_TO_UNIT = 1.0 / float(1 << 53)


@nb.njit(cache=True, inline="always")
def mix64(x):
    """splitmix64 finaliser on a uint64."""
    x = x + _GOLDEN
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


@nb.njit(cache=True, inline="always")
def edge_uniform2(key, x, y, axis):
    h = mix64(key ^ np.uint64(x + _OFFSET))
    h = mix64(h ^ np.uint64(y + _OFFSET))
    h = mix64(h ^ np.uint64(axis))
    return float(h >> np.uint64(11)) * _TO_UNIT


@nb.njit(cache=True)
def edge_uniforms_nd(key, coords, axes):
    """Uniforms for edges given by base vertex coords (m, d) and axis (m,)."""
    m, d = coords.shape
    out = np.empty(m)
    for i in range(m):
        h = key
        for j in range(d):
            h = mix64(h ^ np.uint64(coords[i, j] + _OFFSET))
        h = mix64(h ^ np.uint64(axes[i]))
        out[i] = float(h >> np.uint64(11)) * _TO_UNIT
    return out


def _mix_py(x: int) -> int:
    mask = (1 << 64) - 1
    x = (x + 0x9E3779B97F4A7C15) & mask
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & mask
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & mask
    return x ^ (x >> 31)


def replica_key(seed: int, replica: int, tag: int = 0) -> int:
    """64-bit stream key for one replica (and an optional sub-stream tag)."""
    mask = (1 << 64) - 1
    h = _mix_py(int(seed) & mask)
    h = _mix_py(h ^ (int(replica) & mask))
    return _mix_py(h ^ (int(tag) & mask))


@dataclass(frozen=True)
class ReplicaStream:
    """Random source for one replica; cheap to create, fully reproducible."""

    seed: int
    replica: int = 0

    @property
    def key(self) -> int:
        return replica_key(self.seed, self.replica)

    def edge_uniforms(self, coords: np.ndarray, axes: np.ndarray) -> np.ndarray:
        coords = np.ascontiguousarray(coords, dtype=np.int64)
        axes = np.ascontiguousarray(axes, dtype=np.int64)
        return edge_uniforms_nd(np.uint64(self.key), coords, axes)

    def generator(self, tag: int = 1) -> np.random.Generator:
        """numpy Generator for noise; distinct tags give independent streams."""
        return np.random.Generator(np.random.Philox(key=replica_key(self.seed, self.replica, tag)))

    def aux(self) -> np.random.Generator:
        """Stream for an algorithm's auxiliary draws."""
        return self.generator(tag=7)
