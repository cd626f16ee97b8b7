"""Deterministic, platform-independent pseudorandom streams.

Every random quantity in this library (noise vectors, power-iteration start
vectors, source-condition elements, test probes) is drawn from the stream
defined here, so that results are reproducible bit-for-bit across platforms
and across runs.

The generator is SplitMix64 used in counter mode: output ``k`` of a stream
with seed ``s`` is ``mix64(s + (k + 1) * GAMMA mod 2**64)`` where ``GAMMA``
is the golden-ratio increment ``0x9E3779B97F4A7C15`` and ``mix64`` is the
SplitMix64 finalizer (xor-shift/multiply mixing).  All arithmetic is modulo
2**64, which numpy's uint64 ufuncs implement exactly on every platform.

Derived quantities:

* uniforms in ``[0, 1)`` take the top 53 bits: ``(u >> 11) * 2**-53``;
* standard normals use the Marsaglia polar (Box-Muller) method: candidate
  pairs ``(2u1 - 1, 2u2 - 1)`` are accepted when ``0 < s < 1`` with
  ``s = v1**2 + v2**2`` and mapped through ``sqrt(-2 log(s) / s)``.
  Candidates consume consecutive counter pairs and accepted pairs are kept
  in candidate order, so the rejection step is deterministic.  A call that
  needs an odd number of samples discards the second half of its final
  accepted pair;
* substreams are seeded as ``mix64(seed XOR fnv1a64(label))`` where the
  label is the UTF-8 encoding of ``str(tag)``.
"""

from __future__ import annotations

import numpy as np

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer on a uint64 array (modular arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def derive_seed(seed: int, tag) -> int:
    """Derive the seed of an independent substream from a parent seed.

    ``tag`` may be any object with a stable ``str()``; typical tags are
    short labels such as ``"noise"`` or ``("power", 3)``.
    """
    h = np.uint64(_fnv1a64(str(tag).encode("utf-8")))
    child = _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ h)
    return int(child)


class RandomStream:
    """Counter-based SplitMix64 stream producing uniforms and normals.

    The stream state is just ``(seed, counter)``; consuming ``m`` raw
    outputs advances the counter by ``m``.  Streams with the same seed and
    call sequence produce identical output on every platform.
    """

    def __init__(self, seed: int):
        self._seed = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
        self._count = 0

    @property
    def seed(self) -> int:
        return int(self._seed)

    def derive(self, tag) -> "RandomStream":
        """Independent substream keyed by ``tag`` (state is not consumed)."""
        return RandomStream(derive_seed(int(self._seed), tag))

    def _raw(self, m: int) -> np.ndarray:
        counters = np.arange(self._count + 1, self._count + m + 1, dtype=np.uint64)
        self._count += m
        with np.errstate(over="ignore"):
            state = (self._seed + counters * _GAMMA) & _MASK
            return _mix64(state)

    def uniform(self, m: int) -> np.ndarray:
        """``m`` doubles uniform in [0, 1), from the top 53 bits."""
        return (self._raw(m) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def gaussian(self, m: int) -> np.ndarray:
        """``m`` standard normal doubles via the polar Box-Muller method."""
        if m == 0:
            return np.empty(0)
        out = np.empty(m + 1 if m % 2 else m)
        filled = 0
        while filled < out.size:
            npairs = max(64, (out.size - filled + 1) // 2)
            u = self.uniform(2 * npairs)
            v1 = 2.0 * u[0::2] - 1.0
            v2 = 2.0 * u[1::2] - 1.0
            s = v1 * v1 + v2 * v2
            keep = (s > 0.0) & (s < 1.0)
            v1, v2, s = v1[keep], v2[keep], s[keep]
            f = np.sqrt(-2.0 * np.log(s) / s)
            take = min(v1.size, (out.size - filled) // 2)
            block = np.empty(2 * take)
            block[0::2] = v1[:take] * f[:take]
            block[1::2] = v2[:take] * f[:take]
            out[filled : filled + 2 * take] = block
            filled += 2 * take
        return out[:m]
