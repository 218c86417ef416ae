"""Packed-word lazy segment tree over a finite bit window.

Leaves are 64-bit words; internal nodes carry a ones count and a pending
complement tag. Local index ``i`` lives in word ``i >> 6`` at bit ``i & 63``
(bit 0 is the least significant bit of the word).

All kernels take the raw arrays so they can be called from other jitted
code without object overhead:

    words : uint64[P]   leaf words
    mask  : uint64[P]   valid-bit mask per word (zero for padding leaves)
    cnt   : int64[2P]   ones count per node
    width : int64[2P]   valid bits per node
    tag   : uint8[P]    pending complement for the children of a node
"""
import numpy as np
from numba import njit

_ONE = np.uint64(1)
_ZERO = np.uint64(0)
_ALL = np.uint64(0xFFFFFFFFFFFFFFFF)
_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


@njit(cache=True, inline="always")
def popcount(x):
    x = x - ((x >> _ONE) & _M1)
    x = (x & _M2) + ((x >> np.uint64(2)) & _M2)
    x = (x + (x >> np.uint64(4))) & _M4
    return np.int64((x * _H01) >> np.uint64(56))


@njit(cache=True, inline="always")
def ctz(x):
    # x must be nonzero
    n = 0
    while (x & _ONE) == _ZERO:
        x >>= _ONE
        n += 1
    return n


@njit(cache=True, inline="always")
def select_in_word(x, k):
    """Bit position of the k-th (0-based) set bit of ``x``."""
    base = 0
    for _ in range(8):
        c = popcount(x & np.uint64(0xFF))
        if k < c:
            break
        k -= c
        x >>= np.uint64(8)
        base += 8
    for _ in range(k):
        x &= x - _ONE
    return base + ctz(x)


def allocate(L):
    nwords = (L + 63) // 64
    P = 1
    while P < nwords:
        P *= 2
    words = np.zeros(P, dtype=np.uint64)
    mask = np.zeros(P, dtype=np.uint64)
    width = np.zeros(2 * P, dtype=np.int64)
    for w in range(nwords):
        nb = min(64, L - 64 * w)
        mask[w] = np.uint64(0xFFFFFFFFFFFFFFFF) if nb == 64 else np.uint64((1 << nb) - 1)
        width[P + w] = nb
    for node in range(P - 1, 0, -1):
        width[node] = width[2 * node] + width[2 * node + 1]
    cnt = np.zeros(2 * P, dtype=np.int64)
    tag = np.zeros(max(P, 1), dtype=np.uint8)
    return words, mask, cnt, width, tag


@njit(cache=True)
def rebuild(words, mask, cnt, width, tag):
    P = words.shape[0]
    for w in range(P):
        words[w] &= mask[w]
        cnt[P + w] = popcount(words[w])
    for node in range(P - 1, 0, -1):
        cnt[node] = cnt[2 * node] + cnt[2 * node + 1]
        tag[node] = 0


# Pushes are written out by hand below: numba does not inline nested calls
# that take several arrays, and the call overhead dominates the tree walk.


@njit(cache=True)
def materialize(words, mask, cnt, width, tag):
    """Push every pending tag down to the leaf words."""
    P = words.shape[0]
    for node in range(1, P):
        if tag[node]:
            for ch in range(2 * node, 2 * node + 2):
                cnt[ch] = width[ch] - cnt[ch]
                if ch >= P:
                    words[ch - P] ^= mask[ch - P]
                else:
                    tag[ch] ^= np.uint8(1)
            tag[node] = 0


@njit(cache=True, inline="always")
def suffix_flip(s, words, mask, cnt, width, tag):
    """Complement every bit at local index >= s."""
    P = words.shape[0]
    w = s >> 6
    node = 1
    lo = 0
    hi = P
    while node < P:
        left = 2 * node
        if tag[node]:
            cnt[left] = width[left] - cnt[left]
            cnt[left + 1] = width[left + 1] - cnt[left + 1]
            if left >= P:
                words[left - P] ^= mask[left - P]
                words[left + 1 - P] ^= mask[left + 1 - P]
            else:
                tag[left] ^= np.uint8(1)
                tag[left + 1] ^= np.uint8(1)
            tag[node] = 0
        mid = (lo + hi) >> 1
        if w < mid:
            right = left + 1
            cnt[right] = width[right] - cnt[right]
            if right >= P:
                words[right - P] ^= mask[right - P]
            else:
                tag[right] ^= np.uint8(1)
            node = left
            hi = mid
        else:
            node = left + 1
            lo = mid
    words[w] ^= mask[w] & ~((_ONE << np.uint64(s & 63)) - _ONE)
    cnt[node] = popcount(words[w])
    node >>= 1
    while node > 0:
        cnt[node] = cnt[2 * node] + cnt[2 * node + 1]
        node >>= 1


@njit(cache=True, inline="always")
def select(k, words, mask, cnt, width, tag):
    """Local index of the k-th (0-based) one bit."""
    P = words.shape[0]
    node = 1
    while node < P:
        left = 2 * node
        if tag[node]:
            cnt[left] = width[left] - cnt[left]
            cnt[left + 1] = width[left + 1] - cnt[left + 1]
            if left >= P:
                words[left - P] ^= mask[left - P]
                words[left + 1 - P] ^= mask[left + 1 - P]
            else:
                tag[left] ^= np.uint8(1)
                tag[left + 1] ^= np.uint8(1)
            tag[node] = 0
        if k < cnt[left]:
            node = left
        else:
            k -= cnt[left]
            node = left + 1
    w = node - P
    return 64 * w + select_in_word(words[w], k)


@njit(cache=True)
def get_bit(i, words, mask, cnt, width, tag):
    P = words.shape[0]
    w = i >> 6
    # parity of pending tags on the root-to-leaf path
    flip = 0
    node = 1
    lo = 0
    hi = P
    while node < P:
        mid = (lo + hi) >> 1
        if w < mid:
            node = 2 * node
            hi = mid
        else:
            node = 2 * node + 1
            lo = mid
        flip ^= tag[node >> 1]
    return np.int64((words[w] >> np.uint64(i & 63)) & _ONE) ^ np.int64(flip)


@njit(cache=True)
def find_from(start, value, words, mask):
    """First local index >= start holding ``value``; -1 if none.

    Requires materialized words.
    """
    P = words.shape[0]
    w = start >> 6
    if w >= P:
        return -1
    first = True
    while w < P:
        x = words[w] if value == 1 else (~words[w]) & mask[w]
        if first:
            x &= ~((_ONE << np.uint64(start & 63)) - _ONE)
            first = False
        if x != _ZERO:
            return 64 * w + ctz(x)
        w += 1
    return -1


@njit(cache=True)
def shift_out(q, fill_kind, parity, rng, L, words, mask, cnt, width, tag):
    """Drop the first ``q`` bits and append ``q`` continuation bits.

    fill_kind 0: frozen zero continuation, complemented once per effective
    event so far (``parity``); fill_kind 1: fresh fair coins.
    Requires materialized words. Rebuilds counts.
    """
    P = words.shape[0]
    nwords = (L + 63) // 64
    qw = q >> 6
    qb = np.uint64(q & 63)
    ext = np.empty(nwords + qw + 1, dtype=np.uint64)
    for w in range(nwords - 1):
        ext[w] = words[w]
    for w in range(nwords - 1, ext.shape[0]):
        if fill_kind == 1:
            f = (np.uint64(rng.integers(0, 1 << 32)) << np.uint64(32)) | np.uint64(
                rng.integers(0, 1 << 32)
            )
        else:
            f = _ALL if parity else _ZERO
        if w < nwords:
            ext[w] = (words[w] & mask[w]) | (f & ~mask[w])
        else:
            ext[w] = f
    for w in range(nwords):
        if qb == _ZERO:
            words[w] = ext[w + qw]
        else:
            words[w] = (ext[w + qw] >> qb) | (ext[w + qw + 1] << (np.uint64(64) - qb))
    rebuild(words, mask, cnt, width, tag)
