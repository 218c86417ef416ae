"""Mean reward and maturation time over binary expansions.

Integers stand for finite prefixes read from the most significant bit. A
move clears one 1 bit and complements every lower-order bit, so every
transition lands on a smaller integer and a single increasing sweep fills
the table. Leaves of the depth-N tree are the integers in ``[2^N, 2^(N+1))``
and the speed lower bound is ``1 + min a(x)/b(x)`` over leaves.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from importlib import resources

import numpy as np
from numba import njit

log = logging.getLogger(__name__)

BASES = ("listing", "formula")


def transitions(x):
    """Targets of the moves from ``x``, one per 1 bit, in increasing order.

    >>> transitions(6)
    [1, 5]
    """
    x = int(x)
    if x < 1:
        raise ValueError("transitions need x >= 1")
    return sorted(x ^ ((2 << j) - 1) for j in range(x.bit_length()) if x >> j & 1)


def reward(x):
    """Length of the leading run of 1s in the binary expansion, minus one."""
    x = int(x)
    if x < 1:
        raise ValueError("reward needs x >= 1")
    n = x.bit_length()
    run = 0
    while run < n and x >> (n - 1 - run) & 1:
        run += 1
    return run - 1


class BadSet(frozenset):
    """Nodes whose reward and maturation time are zeroed."""

    def __new__(cls, members=()):
        members = [int(m) for m in members]
        if any(m < 0 for m in members):
            raise ValueError("bad nodes must be nonnegative")
        return super().__new__(cls, members)

    def check_depth(self, depth):
        leaves = [m for m in self if 2**depth <= m < 2 ** (depth + 1)]
        if leaves:
            raise ValueError(f"bad set contains leaves of the depth-{depth} tree: {sorted(leaves)[:5]}")

    def as_mask(self, size):
        mask = np.zeros(size, dtype=np.bool_)
        for m in self:
            if m < size:
                mask[m] = True
        return mask


def load_bad_set(path):
    """Read one integer per line; text after '#' is ignored."""
    with open(path) as fh:
        return _parse_bad_set(fh.read())


def _parse_bad_set(text):
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            out.append(int(line))
        except ValueError:
            raise ValueError(f"line {lineno}: not an integer: {line!r}") from None
    return BadSet(out)


def paper_bad_set():
    """The literal bad set of the reference listing (213 nodes below 5468)."""
    text = resources.files("kmchain").joinpath("data/paper_bad_set.txt").read_text()
    return _parse_bad_set(text)


@njit(cache=True)
def _fill(depth, bad, base_one_b, a, b):
    top = 1 << (depth + 1)
    a[0] = 0.0
    b[0] = 0.0
    a[1] = 0.0
    b[1] = base_one_b
    for x in range(2, top):
        nbits = 0
        t = x
        while t:
            nbits += 1
            t >>= 1
        sa = 0.0
        sb = 0.0
        ones = 0
        for j in range(nbits):
            if (x >> j) & 1:
                y = x ^ ((2 << j) - 1)
                sa += a[y]
                sb += b[y]
                ones += 1
        run = 0
        while run < nbits and (x >> (nbits - 1 - run)) & 1:
            run += 1
        if bad[x]:
            a[x] = 0.0
            b[x] = 0.0
        else:
            a[x] = (run - 1 + sa) / ones
            b[x] = (1.0 + sb) / ones


@dataclass
class RewardTable:
    depth: int
    a: np.ndarray
    b: np.ndarray
    bad: BadSet
    base: str = "listing"

    @property
    def leaves(self):
        return np.arange(2**self.depth, 2 ** (self.depth + 1))

    def ratio(self, x):
        return self.a[x] / self.b[x]

    def leaf_ratios(self):
        lo = 2**self.depth
        return self.a[lo:] / self.b[lo:]

    def residual(self, x):
        """Relative error of the recursion identity at ``x``."""
        if x in self.bad or x < 2:
            return 0.0
        ys = transitions(x)
        n = len(ys)
        ea = (reward(x) + sum(self.a[y] for y in ys)) / n
        eb = (1 + sum(self.b[y] for y in ys)) / n
        return max(abs(ea - self.a[x]) / max(abs(ea), 1e-300),
                   abs(eb - self.b[x]) / max(abs(eb), 1e-300))

    def to_csv(self, path):
        ratios = self.leaf_ratios()
        with open(path, "w") as fh:
            fh.write("x,a,b,ratio\n")
            for x, r in zip(self.leaves, ratios):
                fh.write(f"{x},{self.a[x]!r},{self.b[x]!r},{r!r}\n")


def reward_table(depth, bad=None, base="listing"):
    """Fill ``(a, b)`` for every integer below ``2^(depth+1)``.

    ``base="listing"`` zeroes both entries at 1 as the reference program
    does; ``base="formula"`` gives 1 the value ``(0, 1)`` that the recursion
    itself would assign.
    """
    depth = int(depth)
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if depth > 28:
        raise ValueError("depth above 28 needs more than 8 GB")
    if base not in BASES:
        raise ValueError(f"base must be one of {BASES}")
    bad = BadSet() if bad is None else BadSet(bad)
    bad.check_depth(depth)
    size = 1 << (depth + 1)
    a = np.empty(size)
    b = np.empty(size)
    _fill(depth, bad.as_mask(size), 1.0 if base == "formula" else 0.0, a, b)
    return RewardTable(depth, a, b, bad, base)


def leaf_minimum(table):
    """Smallest ``a/b`` over leaves; ties go to the smallest leaf."""
    lo = 2**table.depth
    b = table.b[lo:]
    if np.any(b <= 0):
        raise ValueError("a leaf has zero maturation time")
    ratios = table.a[lo:] / b
    i = int(np.argmin(ratios))  # argmin returns the first minimum
    return lo + i, float(ratios[i])


def lower_bound(table):
    return 1.0 + leaf_minimum(table)[1]


def internal_minimum(table, start=72):
    """Diagnostic scan of internal nodes in ``(start - 1, 2^depth)``.

    Mirrors the local-minimum scan of the reference program: it starts
    from node 3 and keeps strictly smaller ratios among nodes with b > 0.
    """
    best_x = 3
    best = table.a[3] / table.b[3] if table.b[3] > 0 else np.inf
    lo, hi = start, 2**table.depth
    b = table.b[lo:hi]
    ok = b > 0
    if ok.any():
        r = np.full(hi - lo, np.inf)
        r[ok] = table.a[lo:hi][ok] / b[ok]
        i = int(np.argmin(r))
        if r[i] < best:
            best_x, best = lo + i, float(r[i])
    return best_x, float(best)


def alternating(n_bits):
    """The integer 1010...1 (or 1010...10) with ``n_bits`` binary digits."""
    x = 0
    for i in range(n_bits):
        x = (x << 1) | (1 - i % 2)
    return x


def greedy_bad_set(depth, rounds=20, start=None, base="listing", floor=3):
    """Exploratory search: grow a bad set one internal node at a time.

    Each round marks the internal node (``floor <= x < 2^depth``) with the
    smallest positive-``b`` ratio and keeps the change when the leaf
    minimum improves. This is a heuristic with no validity claim beyond
    what the bound lemma requires of the leaves.
    """
    bad = set(start or ())
    table = reward_table(depth, bad, base)
    best = leaf_minimum(table)[1]
    tried = set()
    history = [best]
    for _ in range(rounds):
        hi = 2**depth
        b = table.b[floor:hi]
        r = np.full(hi - floor, np.inf)
        ok = b > 0
        r[ok] = table.a[floor:hi][ok] / b[ok]
        for x in tried | bad:
            if floor <= x < hi:
                r[x - floor] = np.inf
        i = int(np.argmin(r))
        if not np.isfinite(r[i]):
            break
        cand = floor + i
        tried.add(cand)
        trial = reward_table(depth, bad | {cand}, base)
        value = leaf_minimum(trial)[1]
        if value > best:
            bad.add(cand)
            table, best = trial, value
        history.append(best)
    return BadSet(bad), best, history
