"""Event-driven simulation of the continuous-time bit-flip chain.

Every site carries a rate-one clock. When the clock of a 1 rings, that bit
and every bit to its right are complemented; rings at a 0 change nothing.
The simulator keeps a finite window of ``L`` bits whose local index 0 is
the leading 1. Rings at zeros are never drawn: the next effective event
comes after an ``Exp(#ones)`` wait, at a uniformly chosen 1.

When the leading 1 itself flips, the leading run of ``j`` ones becomes
zeros, the zero behind it becomes the new leading 1, and the window slides
``j`` places to the right. Bits entering at the right edge come from the
pattern's continuation (frozen zeros complemented by every effective event
so far, or fresh fair coins). Bits inside the window only ever depend on
clocks at or to their left, so everything observed in the window is exact;
the only failure mode is a leading run that reaches the right edge, which
is reported through ``truncation_hit``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
import numpy as np
from numba import njit

from . import _bits

TAIL_ZEROS = 0
TAIL_COIN = 1
_TAILS = {"zeros": TAIL_ZEROS, "coin": TAIL_COIN}


@dataclass(frozen=True)
class Pattern:
    """Initial configuration: an explicit prefix followed by a tail.

    ``tail`` is ``"zeros"`` (all-zero continuation) or ``"coin"`` (IID fair
    bits). The prefix must start with a 1.
    """

    prefix: tuple
    tail: str = "zeros"

    @classmethod
    def all_ones(cls, r):
        return cls((1,) * int(r))

    @classmethod
    def single(cls):
        return cls((1,))

    @classmethod
    def coin(cls):
        return cls((1,), "coin")

    @classmethod
    def explicit(cls, bits, tail="zeros"):
        if isinstance(bits, str):
            bits = [int(c) for c in bits]
        return cls(tuple(int(b) for b in bits), tail)

    @classmethod
    def zeros_block(cls, j, tail="coin"):
        """``1 0^j 1`` followed by ``tail``; a member of the zeros_j class."""
        return cls((1,) + (0,) * int(j) + (1,), tail)


@dataclass
class Event:
    dt: float
    position: int
    is_leading: bool
    jump: int = 0


@dataclass
class JumpTrace:
    """Leading-one flips of one run: times ``sigma`` and advances ``jump``."""

    sigma: np.ndarray
    jump: np.ndarray
    truncation_hit: bool = False
    absorbed: bool = False
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.jump)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "sigma", "jump"])
            for n, (s, j) in enumerate(zip(self.sigma, self.jump), start=1):
                w.writerow([n, repr(float(s)), int(j)])

    @classmethod
    def from_csv(cls, path):
        sig, jmp = [], []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                sig.append(float(row["sigma"]))
                jmp.append(int(row["jump"]))
        return cls(np.asarray(sig, dtype=float), np.asarray(jmp, dtype=np.int64))


class ChainState:
    """Window of ``L`` bits with lazy suffix complements.

    ``origin`` is the absolute lattice position of local index 0 and
    ``time`` the chain clock. Mutating operations work in place.
    """

    def __init__(self, L, tail="zeros"):
        if L < 2:
            raise ValueError("domain length must be at least 2")
        if tail not in _TAILS:
            raise ValueError(f"unknown tail {tail!r}")
        self.L = int(L)
        self.tail = tail
        self.words, self.mask, self.cnt, self.width, self.tag = _bits.allocate(self.L)
        # [origin, parity of effective events, truncation flag, events]
        self.ivars = np.zeros(4, dtype=np.int64)
        self.time = np.zeros(1, dtype=np.float64)

    @property
    def _arrays(self):
        return self.words, self.mask, self.cnt, self.width, self.tag

    @property
    def origin(self):
        return int(self.ivars[0])

    @property
    def truncation_hit(self):
        return bool(self.ivars[2])

    @property
    def n_events(self):
        return int(self.ivars[3])

    @property
    def ones_count(self):
        return int(self.cnt[1])

    def copy(self):
        other = ChainState.__new__(ChainState)
        other.L = self.L
        other.tail = self.tail
        other.words, other.mask, other.cnt, other.width, other.tag = (
            a.copy() for a in self._arrays
        )
        other.ivars = self.ivars.copy()
        other.time = self.time.copy()
        return other

    def set_bits(self, bits):
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.shape != (self.L,):
            raise ValueError("bit vector length must equal L")
        self.words[:] = 0
        for w in range(0, self.L, 64):
            chunk = bits[w : w + 64]
            val = 0
            for i, b in enumerate(chunk):
                if b:
                    val |= 1 << i
            self.words[w // 64] = np.uint64(val)
        _bits.rebuild(*self._arrays)

    @property
    def bits(self):
        _bits.materialize(*self._arrays)
        raw = np.unpackbits(self.words.view(np.uint8), bitorder="little")
        return raw[: self.L].copy()

    def __getitem__(self, i):
        if not 0 <= i < self.L:
            raise IndexError(i)
        return int(_bits.get_bit(i, *self._arrays))

    def __str__(self):
        return "".join(map(str, self.bits))

    def binary_value(self):
        """Exact absolute binary value as a fraction ``(numerator, exponent)``.

        The value is ``sum_k 2**-(origin + k) * bit(k)``; returned as the
        pair ``(m, e)`` with value ``m / 2**e`` so comparisons are exact.
        """
        m = int("".join(map(str, self.bits)) or "0", 2)
        return m, self.origin + self.L - 1

    def ones_run(self):
        _nonzero(self)
        return _ones_run(self)

    def zeros_run(self):
        _nonzero(self)
        _bits.materialize(*self._arrays)
        pos = _bits.find_from(1, 1, self.words, self.mask)
        if pos < 0:
            raise ValueError("no 1 after the leading bit inside the window")
        return pos - 1

    def zeros_star(self):
        """Zeros between the first block of ones and the next 1."""
        _nonzero(self)
        run = _ones_run(self)
        pos = _bits.find_from(run, 1, self.words, self.mask)
        if run >= self.L or pos < 0:
            raise ValueError("first block of ones or its trailing zeros leave the window")
        return pos - run


def _nonzero(state):
    if state.ones_count == 0:
        raise ValueError("state is all zeros")


def _ones_run(state):
    _bits.materialize(*state._arrays)
    pos = _bits.find_from(1, 0, state.words, state.mask)
    return state.L if pos < 0 else pos


def new_state(pattern, L, rng=None):
    """Normalized window of length ``L`` holding ``pattern``."""
    if not isinstance(pattern, Pattern):
        pattern = Pattern.explicit(pattern)
    prefix = pattern.prefix
    if len(prefix) > L:
        raise ValueError(f"pattern of length {len(prefix)} does not fit in L={L}")
    if 1 not in prefix:
        raise ValueError("pattern contains no 1")
    if prefix[0] != 1:
        raise ValueError("pattern must begin with a 1")
    state = ChainState(L, pattern.tail)
    bits = np.zeros(L, dtype=np.uint8)
    if pattern.tail == "coin":
        if rng is None:
            raise ValueError("a coin tail needs an rng")
        bits[:] = rng.integers(0, 2, size=L)
    bits[: len(prefix)] = prefix
    state.set_bits(bits)
    return state


def suffix_flip(state, s):
    """Complement bits ``s, s+1, ...`` of the window; bit ``s`` must be 1."""
    if not 0 <= s < state.L:
        raise IndexError(s)
    if state[s] != 1:
        raise ValueError(f"bit {s} is 0; a ring there is a no-op")
    _bits.suffix_flip(s, *state._arrays)
    return state


def ones_run(state):
    return state.ones_run()


def zeros_run(state):
    return state.zeros_run()


def zeros_star(state):
    return state.zeros_star()


@njit(cache=True)
def _leading_flip(rng, tail, L, ivars, words, mask, cnt, width, tag):
    _bits.materialize(words, mask, cnt, width, tag)
    run = _bits.find_from(1, 0, words, mask)
    if run < 0:
        run = L
    if run >= L - 1:
        ivars[2] = 1
    _bits.suffix_flip(0, words, mask, cnt, width, tag)
    ivars[1] ^= 1
    _bits.materialize(words, mask, cnt, width, tag)
    _bits.shift_out(run, tail, ivars[1], rng, L, words, mask, cnt, width, tag)
    ivars[0] += run
    return run


@njit(cache=True, inline="always")
def _draw(rng, ones):
    dt = rng.standard_exponential() / ones
    # floor(u * ones) instead of rng.integers: same law up to 2**-53, much faster
    k = np.int64(rng.random() * ones)
    if k >= ones:
        k = ones - 1
    return dt, k


@njit(cache=True)
def _step(rng, tail, L, ivars, time, words, mask, cnt, width, tag):
    """One effective event. Returns (dt, position, jump); jump 0 off the lead."""
    ones = cnt[1]
    if ones == 0:
        return np.inf, -1, -1
    dt, k = _draw(rng, ones)
    pos = _bits.select(k, words, mask, cnt, width, tag)
    time[0] += dt
    ivars[3] += 1
    if pos == 0:
        jump = _leading_flip(rng, tail, L, ivars, words, mask, cnt, width, tag)
        return dt, 0, jump
    _bits.suffix_flip(pos, words, mask, cnt, width, tag)
    ivars[1] ^= 1
    return dt, pos, 0


@njit(cache=True)
def _run(rng, tail, L, n_leading, t_max, ivars, time, words, mask, cnt, width, tag):
    cap = n_leading if n_leading > 0 else 1024
    sig = np.empty(cap, dtype=np.float64)
    jmp = np.empty(cap, dtype=np.int64)
    n = 0
    absorbed = False
    t = time[0]
    parity = ivars[1]
    events = ivars[3]
    while True:
        if n_leading >= 0 and n >= n_leading:
            break
        if ivars[2]:
            break
        ones = cnt[1]
        if ones == 0:
            absorbed = True
            break
        dt, k = _draw(rng, ones)
        if t_max >= 0.0 and t + dt > t_max:
            t = t_max
            break
        pos = _bits.select(k, words, mask, cnt, width, tag)
        t += dt
        events += 1
        if pos != 0:
            _bits.suffix_flip(pos, words, mask, cnt, width, tag)
            parity ^= 1
            continue
        ivars[1] = parity
        jump = _leading_flip(rng, tail, L, ivars, words, mask, cnt, width, tag)
        parity = ivars[1]
        if n >= sig.shape[0]:
            sig2 = np.empty(2 * sig.shape[0], dtype=np.float64)
            jmp2 = np.empty(2 * sig.shape[0], dtype=np.int64)
            sig2[:n] = sig[:n]
            jmp2[:n] = jmp[:n]
            sig, jmp = sig2, jmp2
        sig[n] = t
        jmp[n] = jump
        n += 1
    time[0] = t
    ivars[1] = parity
    ivars[3] = events
    return sig[:n].copy(), jmp[:n].copy(), absorbed


def step(state, rng):
    """Advance ``state`` by one effective event drawn from ``rng``."""
    if state.ones_count == 0:
        raise ValueError("state is absorbed at zero")
    dt, pos, jump = _step(
        rng, _TAILS[state.tail], state.L, state.ivars, state.time, *state._arrays
    )
    return Event(float(dt), int(pos), pos == 0, int(jump))


def run(state, rng, n_leading_flips=None, t_max=None):
    """Simulate until ``n_leading_flips`` leading flips or time ``t_max``.

    Stops early on truncation or absorption; both are flagged on the trace.
    ``sigma`` values are absolute chain times.
    """
    if n_leading_flips is None and t_max is None:
        raise ValueError("give n_leading_flips or t_max")
    n = -1 if n_leading_flips is None else int(n_leading_flips)
    t = -1.0 if t_max is None else float(t_max)
    t0 = float(state.time[0])
    sig, jmp, absorbed = _run(
        rng, _TAILS[state.tail], state.L, n, t, state.ivars, state.time, *state._arrays
    )
    return JumpTrace(sig, jmp, truncation_hit=state.truncation_hit, absorbed=bool(absorbed),
                     meta={"t0": t0})


@njit(cache=True)
def _first_leading_batch(rng, template, tailmask, tail, L, out, words, mask, cnt, width, tag):
    ivars = np.zeros(4, dtype=np.int64)
    P = words.shape[0]
    for i in range(out.shape[0]):
        for w in range(P):
            x = template[w]
            if tail == TAIL_COIN:
                r = (np.uint64(rng.integers(0, 1 << 32)) << np.uint64(32)) | np.uint64(
                    rng.integers(0, 1 << 32)
                )
                x |= r & tailmask[w]
            words[w] = x
        _bits.rebuild(words, mask, cnt, width, tag)
        ivars[:] = 0
        while True:
            ones = cnt[1]
            dt, k = _draw(rng, ones)
            pos = _bits.select(k, words, mask, cnt, width, tag)
            if pos != 0:
                _bits.suffix_flip(pos, words, mask, cnt, width, tag)
                ivars[1] ^= 1
                continue
            jump = _leading_flip(rng, tail, L, ivars, words, mask, cnt, width, tag)
            break
        _bits.materialize(words, mask, cnt, width, tag)
        run = _bits.find_from(1, 0, words, mask)
        if run < 0:
            run = L
        nxt = _bits.find_from(1, 1, words, mask)
        after = _bits.find_from(run, 1, words, mask) if run < L else -1
        out[i, 0] = jump
        out[i, 1] = run
        out[i, 2] = nxt - 1 if nxt > 0 else -1
        out[i, 3] = after - run if after > 0 else -1
        out[i, 4] = ivars[2]


def first_leading_samples(pattern, L, n, rng):
    """Independent draws of the first leading flip from ``pattern``.

    Returns an ``(n, 5)`` int array with columns ``jump_1``, ``ones(Y_1)``,
    ``zeros(Y_1)``, ``zeros*(Y_1)`` and a truncation flag. ``ones`` equals
    ``L`` when the first block of ``Y_1`` runs off the window, and the zero
    counts are -1 when no 1 follows inside the window.
    """
    if not isinstance(pattern, Pattern):
        pattern = Pattern.explicit(pattern)
    proto = new_state(Pattern(pattern.prefix, "zeros"), L)
    template = proto.words.copy()
    tailmask = proto.mask.copy()
    for i in range(len(pattern.prefix)):
        tailmask[i >> 6] &= ~np.uint64(1 << (i & 63))
    out = np.zeros((int(n), 5), dtype=np.int64)
    _first_leading_batch(
        rng, template, tailmask, _TAILS[pattern.tail], L, out, *proto._arrays
    )
    return out
