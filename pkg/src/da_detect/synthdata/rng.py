"""SplitMix64 pseudo-random generator.

Algorithm (Steele, Lea & Flood; also the seeding generator of xoshiro)::

    state = state + 0x9E3779B97F4A7C15           (mod 2**64)
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9      (mod 2**64)
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB      (mod 2**64)
    return z ^ (z >> 31)

Because the state advances by a constant, the k-th output depends only on
``seed + (k + 1) * GAMMA``; :meth:`SplitMix64.u64_array` uses that to draw
whole blocks with numpy uint64 arithmetic. Floats are ``(z >> 11) * 2**-53``,
exact in float64, so streams reproduce bit for bit on any platform.
"""

import numpy as np

MASK = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
M1 = 0xBF58476D1CE4E5B9
M2 = 0x94D049BB133111EB


def mix64(z):
    z &= MASK
    z = ((z ^ (z >> 30)) * M1) & MASK
    z = ((z ^ (z >> 27)) * M2) & MASK
    return z ^ (z >> 31)


def _mix64_array(z):
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(M1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(M2)
    return z ^ (z >> np.uint64(31))


def derive_seed(*parts):
    """Fold integers into one 64-bit seed (order-sensitive)."""
    h = 0x243F6A8885A308D3
    for p in parts:
        h = mix64(h ^ mix64((int(p) + GAMMA) & MASK))
    return h


class SplitMix64:
    def __init__(self, seed):
        self.state = int(seed) & MASK

    def next_u64(self):
        self.state = (self.state + GAMMA) & MASK
        return mix64(self.state)

    def u64_array(self, n):
        if n <= 0:
            return np.zeros(0, dtype=np.uint64)
        with np.errstate(over="ignore"):
            k = np.arange(1, n + 1, dtype=np.uint64)
            states = np.uint64(self.state) + k * np.uint64(GAMMA)
            out = _mix64_array(states)
        self.state = (self.state + n * GAMMA) & MASK
        return out

    def uniform(self, low=0.0, high=1.0):
        return low + (high - low) * ((self.next_u64() >> 11) * 2.0 ** -53)

    def uniform_array(self, n, low=0.0, high=1.0):
        u = (self.u64_array(n) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
        return low + (high - low) * u

    def randint(self, low, high):
        """Integer in [low, high] inclusive."""
        span = high - low + 1
        if span <= 0:
            raise ValueError("empty integer range")
        return low + (self.next_u64() * span >> 64)
