"""Deterministic, splittable random streams on the Philox-4x64 generator.

A stream is fully determined by a 64-bit seed: the two Philox key words
are derived from it with the SplitMix64 finalizer, and the counter
starts at zero. Sub-streams come from ``split(index)``, which derives a
child seed as ``seed XOR mix64((index + 1) * GOLDEN)``; distinct indices
give distinct Philox keys, hence independent counter-based streams that
cannot overlap the parent's.

Uniform doubles take the top 53 bits of one raw 64-bit word, giving
values in [0, 1). Gaussians use the Box-Muller transform on uniform
pairs (the first uniform shifted into (0, 1] so the log is finite); a
draw of n consumes ceil(n / 2) pairs and discards any spare, so the
stream position depends only on the sequence of requested sizes.
"""

from __future__ import annotations

import numpy as np

_M64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    """SplitMix64 finalizer: a 64-bit bijection with good avalanche."""
    z &= _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


class Prng:
    """Counter-based random stream; same seed means same draws, anywhere."""

    algorithm = "philox4x64"

    def __init__(self, seed: int):
        self.seed = int(seed) & _M64
        key = np.array([_mix64(self.seed), _mix64(self.seed ^ GOLDEN)], dtype=np.uint64)
        self._bits = np.random.Philox(key=key)

    def __repr__(self) -> str:
        return f"Prng(seed=0x{self.seed:016x})"

    def raw(self, n: int) -> np.ndarray:
        """Next n raw 64-bit words as a uint64 array."""
        return self._bits.random_raw(n)

    def uniform(self, n: int | None = None):
        """Uniform float64 draws in [0, 1); scalar when n is None."""
        m = 1 if n is None else int(n)
        u = (self.raw(m) >> np.uint64(11)) * 2.0**-53
        return float(u[0]) if n is None else u

    def gaussian(self, n: int | None = None):
        """Standard normal float64 draws; scalar when n is None."""
        m = 1 if n is None else int(n)
        pairs = (m + 1) // 2
        w = self.raw(2 * pairs) >> np.uint64(11)
        u1 = (w[:pairs] + np.uint64(1)) * 2.0**-53
        u2 = w[pairs:] * 2.0**-53
        r = np.sqrt(-2.0 * np.log(u1))
        ang = (2.0 * np.pi) * u2
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(ang)
        z[1::2] = r * np.sin(ang)
        return float(z[0]) if n is None else z[:m]

    def split(self, index: int) -> "Prng":
        """Independent child stream number ``index``; stable and stateless."""
        if index < 0:
            raise ValueError("split index must be non-negative")
        return Prng(self.seed ^ _mix64(((index + 1) * GOLDEN) & _M64))
