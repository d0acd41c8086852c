"""PCG32 random number generator (XSH-RR output, 64-bit LCG state).

Constants follow the reference ``pcg32_random_r``:

* state multiplier ``6364136223846793005``
* stream increment ``(stream << 1) | 1``; default stream ``0xda3e39cb94b95bdb``
  (the reference ``PCG32_INITIALIZER`` increment is ``1442695040888963407``)

Seeding is ``pcg32_srandom_r(seed, stream)``: state 0, step, add seed, step.
Bulk draws compute every LCG state by affine jump-ahead in ``uint64``
arithmetic, so a vectorized draw returns exactly the sequence produced by
repeated scalar calls.
"""

from __future__ import annotations

import numpy as np

MULTIPLIER = 6364136223846793005
DEFAULT_STREAM = 0xDA3E39CB94B95BDB
_MASK64 = (1 << 64) - 1


def _output(state: np.ndarray) -> np.ndarray:
    """XSH-RR permutation applied to pre-advance states (uint64 -> uint32)."""
    xorshifted = (((state >> np.uint64(18)) ^ state) >> np.uint64(27)) & np.uint64(0xFFFFFFFF)
    rot = (state >> np.uint64(59)).astype(np.uint64)
    left = (np.uint64(32) - rot) & np.uint64(31)
    out = (xorshifted >> rot) | ((xorshifted << left) & np.uint64(0xFFFFFFFF))
    return out.astype(np.uint32)


class Pcg32:
    """Deterministic PCG32 stream.

    >>> Pcg32(42, 54).next_u32() == 0xA15C02B7
    True
    """

    def __init__(self, seed: int, stream: int = DEFAULT_STREAM):
        self.seed = int(seed) & _MASK64
        self.stream = int(stream) & _MASK64
        self.inc = ((self.stream << 1) | 1) & _MASK64
        self.state = 0
        self._step()
        self.state = (self.state + self.seed) & _MASK64
        self._step()

    def _step(self) -> None:
        self.state = (self.state * MULTIPLIER + self.inc) & _MASK64

    def next_u32(self) -> int:
        old = self.state
        self._step()
        xorshifted = (((old >> 18) ^ old) >> 27) & 0xFFFFFFFF
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((-rot) & 31))) & 0xFFFFFFFF

    def random_u32(self, size: int) -> np.ndarray:
        """Next ``size`` outputs as a uint32 array (same as ``size`` scalar calls)."""
        size = int(size)
        if size <= 0:
            return np.zeros(0, dtype=np.uint32)
        states = np.empty(size, dtype=np.uint64)
        states[0] = self.state
        # affine map for m steps: s -> a_m * s + c_m (mod 2**64)
        a_m, c_m, m = MULTIPLIER, self.inc, 1
        with np.errstate(over="ignore"):
            while m < size:
                k = min(m, size - m)
                states[m : m + k] = states[:k] * np.uint64(a_m) + np.uint64(c_m)
                a_m, c_m = (a_m * a_m) & _MASK64, (a_m * c_m + c_m) & _MASK64
                m *= 2
            out = _output(states)
        self.advance(size)
        return out

    def advance(self, delta: int) -> None:
        """Jump the state ahead by ``delta`` steps in O(log delta)."""
        acc_mult, acc_plus = 1, 0
        cur_mult, cur_plus = MULTIPLIER, self.inc
        delta = int(delta) & _MASK64
        while delta:
            if delta & 1:
                acc_mult = (acc_mult * cur_mult) & _MASK64
                acc_plus = (acc_plus * cur_mult + cur_plus) & _MASK64
            cur_plus = ((cur_mult + 1) * cur_plus) & _MASK64
            cur_mult = (cur_mult * cur_mult) & _MASK64
            delta >>= 1
        self.state = (acc_mult * self.state + acc_plus) & _MASK64

    def random(self, size: int | tuple[int, ...] = 1) -> np.ndarray:
        """Uniform doubles in [0, 1) with 53 random bits (two draws each)."""
        shape = (size,) if isinstance(size, int) else tuple(size)
        count = int(np.prod(shape, dtype=np.int64))
        raw = self.random_u32(2 * count).astype(np.uint64)
        hi = raw[0::2] >> np.uint64(5)
        lo = raw[1::2] >> np.uint64(6)
        vals = (hi.astype(np.float64) * 67108864.0 + lo.astype(np.float64)) / 9007199254740992.0
        return vals.reshape(shape)

    def uniform(self, low: float, high: float, size: int | tuple[int, ...] = 1) -> np.ndarray:
        return low + (high - low) * self.random(size)

    def normal(self, size: int | tuple[int, ...] = 1) -> np.ndarray:
        """Standard normals via Box-Muller on pairs of uniforms."""
        shape = (size,) if isinstance(size, int) else tuple(size)
        count = int(np.prod(shape, dtype=np.int64))
        pairs = (count + 1) // 2
        u = self.random(2 * pairs)
        u1 = 1.0 - u[0::2]  # (0, 1], keeps log finite
        u2 = u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])
        return z[:count].reshape(shape)

    def integers(self, low: int, high: int) -> int:
        """Single integer in [low, high) from one scaled 53-bit uniform."""
        span = int(high) - int(low)
        if span <= 0:
            raise ValueError("empty integer range")
        return int(low) + min(int(self.random(1)[0] * span), span - 1)
