"""Portable, seeded pseudo-random numbers.

Every random decision in the toolkit (splits, perturbations, model
initialisation and SGD sampling) is drawn from one documented generator so
that results are reproducible bit for bit across platforms and across
re-implementations:

* generator: xoshiro256** (Blackman & Vigna), 256-bit state, 64-bit output;
* seeding: the four state words are the first four outputs of SplitMix64
  started at the 64-bit seed;
* ``u64 -> float``: ``(x >> 11) * 2**-53``, uniform on ``[0, 1)``;
* bounded integer in ``[0, n)``: draw ``x`` until ``x >= (2**64 - n) mod n``,
  return ``x mod n`` (unbiased rejection);
* shuffle: Fisher-Yates from the last position down, ``j = bounded(i + 1)``;
* sample ``k`` of ``n`` without replacement: forward partial Fisher-Yates on
  ``0..n-1``, ``j = i + bounded(n - i)``, first ``k`` entries.

Sub-seeds for independent components are derived from a root seed and a
stable text label with :func:`derive_seed`.
"""
from __future__ import annotations

import hashlib

import numpy as np
from numba import njit

MASK64 = (1 << 64) - 1

_U1 = np.uint64(1)
_U11 = np.uint64(11)
_U17 = np.uint64(17)
_U45 = np.uint64(45)
_U7 = np.uint64(7)
_U64 = np.uint64(64)
_FIVE = np.uint64(5)
_NINE = np.uint64(9)
_TWO_M53 = 1.0 / 9007199254740992.0


def splitmix64_sequence(seed: int, n: int) -> list[int]:
    state = seed & MASK64
    out = []
    for _ in range(n):
        state = (state + 0x9E3779B97F4A7C15) & MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        out.append(z ^ (z >> 31))
    return out


def derive_seed(seed: int, label: str) -> int:
    """Combine a root seed with a stable label into an independent 64-bit seed."""
    digest = hashlib.blake2b(f"{seed & MASK64}/{label}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << k) | (x >> (_U64 - k))


@njit(cache=True)
def next_u64(s):
    """Advance the state array ``s`` (4 x uint64) in place and return one output."""
    result = _rotl(s[1] * _FIVE, _U7) * _NINE
    t = s[1] << _U17
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], _U45)
    return result


@njit(cache=True)
def next_float(s):
    return np.float64(next_u64(s) >> _U11) * _TWO_M53


@njit(cache=True)
def next_bounded(s, n):
    # n >= 1
    un = np.uint64(n)
    threshold = (np.uint64(0) - un) % un
    while True:
        x = next_u64(s)
        if x >= threshold:
            return np.int64(x % un)


@njit(cache=True)
def _fill_u64(s, out):
    for i in range(out.shape[0]):
        out[i] = next_u64(s)


@njit(cache=True)
def _fill_float(s, out):
    for i in range(out.shape[0]):
        out[i] = next_float(s)


@njit(cache=True)
def _fill_bounded(s, n, out):
    for i in range(out.shape[0]):
        out[i] = next_bounded(s, n)


@njit(cache=True)
def shuffle_inplace(s, a):
    for i in range(a.shape[0] - 1, 0, -1):
        j = next_bounded(s, i + 1)
        tmp = a[i]
        a[i] = a[j]
        a[j] = tmp


@njit(cache=True)
def _partial_shuffle(s, a, k):
    n = a.shape[0]
    for i in range(k):
        j = i + next_bounded(s, n - i)
        tmp = a[i]
        a[i] = a[j]
        a[j] = tmp


class Rng:
    """Stateful xoshiro256** stream.

    The state lives in a 4-element ``uint64`` array so jitted kernels can
    draw from the same stream (see ``state``).
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        self.state = np.array(splitmix64_sequence(self.seed, 4), dtype=np.uint64)

    def next_u64(self) -> int:
        return int(next_u64(self.state))

    def u64(self, size: int) -> np.ndarray:
        out = np.empty(size, dtype=np.uint64)
        _fill_u64(self.state, out)
        return out

    def random(self, size: int) -> np.ndarray:
        out = np.empty(size, dtype=np.float64)
        _fill_float(self.state, out)
        return out

    def uniform(self, low, high, size: int) -> np.ndarray:
        return low + (high - low) * self.random(size)

    def integers(self, n: int, size: int) -> np.ndarray:
        if n < 1:
            raise ValueError("bound must be >= 1")
        out = np.empty(size, dtype=np.int64)
        _fill_bounded(self.state, n, out)
        return out

    def permutation(self, n: int) -> np.ndarray:
        a = np.arange(n, dtype=np.int64)
        shuffle_inplace(self.state, a)
        return a

    def sample(self, n: int, k: int) -> np.ndarray:
        """``k`` distinct positions out of ``range(n)``, in draw order."""
        if not 0 <= k <= n:
            raise ValueError(f"cannot sample {k} of {n} without replacement")
        a = np.arange(n, dtype=np.int64)
        _partial_shuffle(self.state, a, k)
        return a[:k].copy()
