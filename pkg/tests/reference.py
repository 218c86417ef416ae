"""Plain-list reference chain consuming the same random stream as the engine."""
import numpy as np


class RefChain:
    def __init__(self, bits, tail):
        self.bits = [int(b) for b in bits]
        self.L = len(self.bits)
        self.tail = tail
        self.origin = 0
        self.parity = 0
        self.truncation = False
        self.time = 0.0

    def step(self, rng):
        ones = [i for i, b in enumerate(self.bits) if b]
        k = len(ones)
        dt = rng.standard_exponential() / k
        idx = min(int(rng.random() * k), k - 1)
        pos = ones[idx]
        self.time += dt
        if pos:
            self.bits[pos:] = [1 - b for b in self.bits[pos:]]
            self.parity ^= 1
            return dt, pos, 0
        run = next((i for i in range(1, self.L) if self.bits[i] == 0), self.L)
        if run >= self.L - 1:
            self.truncation = True
        self.bits = [1 - b for b in self.bits]
        self.parity ^= 1
        self.bits = self.bits[run:] + self._fill(run, rng)
        self.origin += run
        return dt, 0, run

    def _fill(self, q, rng):
        L = self.L
        if self.tail == "zeros":
            return [self.parity] * q
        nwords = (L + 63) // 64
        words = {}
        for w in range(nwords - 1, nwords + (q >> 6) + 1):
            hi = int(rng.integers(0, 1 << 32))
            lo = int(rng.integers(0, 1 << 32))
            words[w] = (hi << 32) | lo
        return [(words[p >> 6] >> (p & 63)) & 1 for p in range(L, L + q)]


def naive_suffix_flip(bits, s):
    out = list(bits)
    out[s:] = [1 - b for b in out[s:]]
    return out


def exact_expected_steps(n):
    """E_n with rational arithmetic on explicit bit tuples."""
    from fractions import Fraction

    memo = {}

    def e(x):
        if x not in memo:
            ones = [j for j, b in enumerate(x) if b]
            if not ones:
                memo[x] = Fraction(0)
            else:
                s = sum(e(x[:j] + tuple(1 - b for b in x[j:])) for j in ones)
                memo[x] = 1 + s / len(ones)
        return memo[x]

    import itertools

    states = list(itertools.product((0, 1), repeat=n))
    return sum(e(s) for s in states) / len(states)
