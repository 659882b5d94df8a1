"""Seeded, counter-based Gaussian noise streams.

Every increment is a pure function of ``(master_seed, path_index, step,
component)``: a SplitMix64-style finalizer hashes the key into uniform
bits, and Box-Muller turns pairs of uniforms into pairs of normals.  This
makes a path's noise independent of which other paths are simulated with
it, of the order they are computed in, and of how the steps are chunked.

numpy's own bit generators are sequential per stream, so an ensemble of
10^5 paths would need 10^5 generator objects; the hash is evaluated
vectorised over all paths at once instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TWO_M53 = 2.0 ** -53


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _mix64_int(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def path_keys(master_seed: int, path_indices) -> np.ndarray:
    """64-bit key per path, derived from the master seed."""
    seed_key = _mix64_int(_mix64_int(int(master_seed) & _MASK) + 0x9E3779B97F4A7C15)
    paths = np.asarray(path_indices, dtype=np.int64).astype(np.uint64)
    with np.errstate(over="ignore"):
        return _mix64(np.uint64(seed_key) ^ _mix64((paths + np.uint64(1)) * _GOLDEN))


def _uniform_pairs(keys: np.ndarray, first_pair: int, n_pairs: int):
    # two counters per pair; mixing the counter first keeps paths from
    # sharing shifted copies of one Weyl sequence
    ctr = np.arange(2 * first_pair, 2 * (first_pair + n_pairs), dtype=np.uint64)
    with np.errstate(over="ignore"):
        cmix = _mix64(ctr * _GOLDEN + _GOLDEN)
        bits = _mix64(keys[:, None] ^ cmix[None, :])
    bits >>= _S11
    u = bits.astype(np.float64)
    u1 = (u[:, 0::2] + 1.0) * _TWO_M53  # (0, 1]
    u2 = u[:, 1::2] * _TWO_M53
    return u1, u2


def standard_normals(keys: np.ndarray, start: int, count: int) -> np.ndarray:
    """Normals with flat indices ``start .. start+count-1`` for each key.

    Returns an array of shape ``(len(keys), count)``.
    """
    if count <= 0:
        return np.empty((len(keys), 0))
    first_pair = start // 2
    last_pair = (start + count - 1) // 2
    u1, u2 = _uniform_pairs(keys, first_pair, last_pair - first_pair + 1)
    rad = np.sqrt(-2.0 * np.log(u1))
    ang = 2.0 * np.pi * u2
    out = np.empty((len(keys), 2 * u1.shape[1]))
    out[:, 0::2] = rad * np.cos(ang)
    out[:, 1::2] = rad * np.sin(ang)
    off = start - 2 * first_pair
    return out[:, off:off + count]


@dataclass(frozen=True)
class NoiseStream:
    """Wiener increments for a single path.

    ``increments(start_step, count, dt)`` returns shape ``(count, dim)``.
    """

    master_seed: int
    path_index: int = 0
    dim: int = 1

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("noise dimension must be >= 1")

    @property
    def n_paths(self) -> int:
        return 1

    def normals(self, start_step: int, count: int) -> np.ndarray:
        keys = path_keys(self.master_seed, [self.path_index])
        z = standard_normals(keys, start_step * self.dim, count * self.dim)
        return z.reshape(count, self.dim)

    def increments(self, start_step: int, count: int, dt: float) -> np.ndarray:
        return np.sqrt(dt) * self.normals(start_step, count)


@dataclass(frozen=True)
class NoiseEnsemble:
    """Wiener increments for several paths at once.

    Path ``path_indices[m]`` sees exactly the increments that
    ``NoiseStream(master_seed, path_indices[m], dim)`` would produce.
    ``increments`` returns shape ``(count, dim, n_paths)``.
    """

    master_seed: int
    path_indices: tuple
    dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "path_indices", tuple(int(p) for p in self.path_indices))
        if self.dim < 1:
            raise ValueError("noise dimension must be >= 1")
        if not self.path_indices:
            raise ValueError("an ensemble needs at least one path")

    @classmethod
    def first(cls, master_seed: int, n_paths: int, dim: int = 1, offset: int = 0):
        return cls(master_seed, tuple(range(offset, offset + n_paths)), dim)

    @property
    def n_paths(self) -> int:
        return len(self.path_indices)

    def stream(self, m: int) -> NoiseStream:
        return NoiseStream(self.master_seed, self.path_indices[m], self.dim)

    def subset(self, start: int, stop: int) -> "NoiseEnsemble":
        return NoiseEnsemble(self.master_seed, self.path_indices[start:stop], self.dim)

    def normals(self, start_step: int, count: int) -> np.ndarray:
        keys = path_keys(self.master_seed, self.path_indices)
        z = standard_normals(keys, start_step * self.dim, count * self.dim)
        return z.reshape(len(keys), count, self.dim).transpose(1, 2, 0)

    def increments(self, start_step: int, count: int, dt: float) -> np.ndarray:
        return np.sqrt(dt) * self.normals(start_step, count)


def chunk_steps(steps: int, dim: int, n_paths: int, budget: int = 1 << 21) -> int:
    """Steps per noise block so a block holds about ``budget`` numbers."""
    return int(max(1, min(steps, budget // max(1, dim * n_paths))))
