"""Counter-based random streams.

Every chain owns a 64-bit key derived from ``(seed, chain_index)``. The raw
draw at position ``i`` of a stream is ``mix64(key + (i + 1) * GOLDEN)``, i.e.
the SplitMix64 output sequence started at ``key``. Because a draw depends only
on ``(key, i)``, any block of any stream can be produced in any order, on any
number of threads, with identical results.

Normals are produced by Box-Muller from consecutive pairs of uniforms: normal
``2j`` uses the cosine branch and normal ``2j + 1`` the sine branch of pair
``j``.
"""

from __future__ import annotations

import numba as nb
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_PI = 2.0 * np.pi
_INV_2_53 = 1.0 / 9007199254740992.0

GENERATOR_TAG = "splitmix64-boxmuller-v1"


@nb.njit(inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@nb.njit(inline="always")
def _uniform_at(key, i):
    # (0, 1) open interval, 53-bit resolution
    z = _mix64(key + (np.uint64(i) + np.uint64(1)) * GOLDEN)
    return ((z >> np.uint64(11)) + 0.5) * _INV_2_53


@nb.njit(cache=True)
def _normal_block(keys, start, count):
    n = keys.shape[0]
    out = np.empty((n, count))
    stop = start + count
    first_pair = start >> 1
    last_pair = (stop + 1) >> 1
    for c in range(n):
        key = keys[c]
        for pair in range(first_pair, last_pair):
            u1 = _uniform_at(key, 2 * pair)
            u2 = _uniform_at(key, 2 * pair + 1)
            r = np.sqrt(-2.0 * np.log(u1))
            idx = 2 * pair
            if idx >= start:
                out[c, idx - start] = r * np.cos(_TWO_PI * u2)
            if idx + 1 < stop:
                out[c, idx + 1 - start] = r * np.sin(_TWO_PI * u2)
    return out


@nb.njit(cache=True)
def _uniform_block(keys, start, count):
    n = keys.shape[0]
    out = np.empty((n, count))
    for c in range(n):
        for j in range(count):
            out[c, j] = _uniform_at(keys[c], start + j)
    return out


@nb.njit(cache=True)
def _mix_scalar(z):
    return _mix64(z)


def mix64(value: int) -> int:
    """SplitMix64 finalizer on a Python integer (taken modulo 2**64)."""
    return int(_mix_scalar(np.uint64(value % (1 << 64))))


def chain_key(seed: int, chain_index: int, domain: int = 0) -> int:
    """Key of the stream used by ``chain_index`` under ``seed``.

    ``domain`` separates unrelated consumers (chains, projections, reference
    samplers) that share a seed.
    """
    k = mix64(seed ^ mix64(domain + 0x5EED))
    return mix64(k + (chain_index + 1) * int(GOLDEN))


def chain_keys(seed: int, chain_ids, domain: int = 0) -> np.ndarray:
    return np.array([chain_key(seed, int(c), domain) for c in chain_ids], dtype=np.uint64)


def normals(keys: np.ndarray, start: int, count: int) -> np.ndarray:
    """Standard normals at positions ``start .. start+count-1`` of each stream.

    Returns an array of shape ``(len(keys), count)``.
    """
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    return _normal_block(keys, np.int64(start), np.int64(count))


def uniforms(keys: np.ndarray, start: int, count: int) -> np.ndarray:
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    return _uniform_block(keys, np.int64(start), np.int64(count))


class Stream:
    """A single sequential stream, handy for one-off consumers.

    Normal and uniform draws use separate sub-streams so interleaving them does
    not change either sequence.
    """

    def __init__(self, seed: int, domain: int = 0):
        self._nkey = np.array([chain_key(seed, 0, domain)], dtype=np.uint64)
        self._ukey = np.array([chain_key(seed, 1, domain)], dtype=np.uint64)
        self._npos = 0
        self._upos = 0

    def normal(self, size: int) -> np.ndarray:
        out = normals(self._nkey, self._npos, size)[0]
        self._npos += size
        return out

    def uniform(self, size: int) -> np.ndarray:
        out = uniforms(self._ukey, self._upos, size)[0]
        self._upos += size
        return out
