"""Counter-based random draws.

Every draw is a pure function of ``(seed, stream, trial, index)``, so results do
not depend on evaluation order or on how trials are split across workers.
The mixer is the SplitMix64 finaliser applied along the key.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):
        z += _GOLDEN
        z ^= z >> np.uint64(30)
        z *= _M1
        z ^= z >> np.uint64(27)
        z *= _M2
        z ^= z >> np.uint64(31)
    return z


def threshold(p: Fraction) -> int:
    """Integer ``t`` with ``Pr[draw < t] = p`` for a uniform 64-bit draw
    (exact whenever ``p * 2**64`` is an integer, e.g. ``p = 1/M``)."""
    p = Fraction(p)
    if not 0 <= p <= 1:
        raise ValueError(f"probability out of range: {p}")
    return min((p.numerator << 64) // p.denominator, 1 << 64)


class CounterRng:
    """Seeded stream of independent 64-bit draws addressed by (trial, index)."""

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & _MASK
        self.stream = int(stream) & _MASK
        self._key = _mix(_mix(np.array([self.seed], dtype=np.uint64)) ^ np.uint64(self.stream))[0]

    def draws(self, trials, indices) -> np.ndarray:
        """Array of shape ``(len(trials), len(indices))`` of uint64 draws."""
        t = np.asarray(trials, dtype=np.uint64).reshape(-1, 1)
        i = np.asarray(indices, dtype=np.uint64).reshape(1, -1)
        with np.errstate(over="ignore"):
            z = _mix(np.full(t.shape, self._key, dtype=np.uint64) ^ _mix(t))
            return _mix(z ^ (i * _GOLDEN))

    def below(self, trials, indices, thresholds) -> np.ndarray:
        """Boolean array: draw < threshold, thresholds broadcast over indices.

        A threshold of ``2**64`` (probability 1) is always true.
        """
        d = self.draws(trials, indices)
        thr = np.array([min(t, (1 << 64) - 1) for t in thresholds], dtype=np.uint64)
        full = np.array([t >= (1 << 64) for t in thresholds], dtype=bool)
        return (d < thr) | full

    def __repr__(self):
        return f"CounterRng(seed={self.seed}, stream={self.stream})"
