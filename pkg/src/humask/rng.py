"""Portable seeded sampling for mask plans.

The generator is SplitMix64 (Steele, Lea & Flood 2014): 64-bit state,
increment 0x9E3779B97F4A7C15, output mixer with constants
0xBF58476D1CE4E5B9 / 0x94D049BB133111EB and shifts 30/27/31. Bounded draws
use rejection on the top of the 64-bit range, and sampling without
replacement is a partial Fisher-Yates shuffle. All of it is plain integer
arithmetic, so any language can reproduce a plan from its seed.
"""

ALGORITHM = "splitmix64/fisher-yates-partial"

_MASK64 = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int):
        self.state = int(seed) & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)``."""
        if n <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def sample(self, population: list, k: int) -> list:
        """``k`` distinct items of ``population`` in draw order."""
        if not 0 <= k <= len(population):
            raise ValueError(f"cannot draw {k} items from {len(population)}")
        pool = list(population)
        n = len(pool)
        for i in range(k):
            j = i + self.below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]


def derive_seed(seed: int, stage: int) -> int:
    """Child seed for a pipeline stage: ``(seed + stage) mod 2**64``."""
    return (int(seed) + int(stage)) & _MASK64
