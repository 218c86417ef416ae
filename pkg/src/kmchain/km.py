"""Finite Klee-Minty bit model: random-edge walk, exact step counts, duality.

Coordinates run 1..n from left to right and "right" means higher index.
Two integer encodings are used:

* value encoding (walks and dynamic programs): coordinate ``j`` is bit
  ``n - j`` of the integer, so a move strictly lowers the integer value;
* vector encoding (``Gf2Matrix``): coordinate ``j`` is bit ``j - 1``.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import _bits
from .upper import harmonic

log = logging.getLogger(__name__)

CONVENTIONS = ("pad-left-zeros", "standalone-length-r", "ones-prefix")
MAX_DP_N = 24


# ---------------------------------------------------------------- walks


@dataclass
class CubeState:
    n: int
    bits: tuple

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        self.bits = tuple(int(b) for b in self.bits)
        if len(self.bits) != self.n or any(b not in (0, 1) for b in self.bits):
            raise ValueError("bits must be a 0/1 sequence of length n")

    @classmethod
    def parse(cls, text):
        return cls(len(text), tuple(int(c) for c in text))

    @classmethod
    def from_value(cls, x, n):
        return cls(n, tuple((x >> (n - 1 - i)) & 1 for i in range(n)))

    @property
    def value(self):
        v = 0
        for b in self.bits:
            v = (v << 1) | b
        return v

    def flip(self, j):
        """Flip coordinate ``j`` (a 1) and every coordinate to its right."""
        if self.bits[j - 1] != 1:
            raise ValueError("the flipped coordinate must hold a 1")
        return CubeState(self.n, self.bits[: j - 1] + tuple(1 - b for b in self.bits[j - 1 :]))

    def __str__(self):
        return "".join(map(str, self.bits))


def random_edge_step(state, rng):
    ones = [j for j, b in enumerate(state.bits, 1) if b]
    if not ones:
        raise ValueError("the zero vertex is absorbing")
    return state.flip(ones[int(rng.integers(len(ones)))])


def suppressed_step(state, rng):
    """Pick a coordinate uniformly; move only if it holds a 1."""
    j = int(rng.integers(1, state.n + 1))
    if state.bits[j - 1]:
        return state.flip(j), True
    return state, False


# ------------------------------------------------------ dynamic programs


def _check_n(n):
    if n < 1:
        raise ValueError("n must be positive")
    if n > MAX_DP_N:
        raise ValueError(f"n above {MAX_DP_N} needs 2^n doubles beyond the memory budget")


@njit(cache=True)
def _effective_steps(n, out):
    # out[x] = expected number of moves from x to 0
    out[0] = 0.0
    for x in range(1, 1 << n):
        s = 0.0
        k = 0
        for p in range(n):
            if (x >> p) & 1:
                s += out[x ^ ((2 << p) - 1)]
                k += 1
        out[x] = 1.0 + s / k


@njit(cache=True)
def _inverse_ones(n, out):
    # out[x] = E sum over visited states of 1/ones; suppressed count is width * out[x]
    out[0] = 0.0
    for x in range(1, 1 << n):
        s = 0.0
        k = 0
        for p in range(n):
            if (x >> p) & 1:
                s += out[x ^ ((2 << p) - 1)]
                k += 1
        out[x] = (1.0 + s) / k


def step_table(n):
    """Expected moves to the minimum from every vertex (value encoding)."""
    _check_n(n)
    out = np.empty(1 << n)
    _effective_steps(n, out)
    return out


def expected_steps_dp(n):
    """E_n: expected moves to the minimum from a uniform random vertex."""
    return float(step_table(n).mean())


def ghz_bounds(n):
    return n * n / (4 * harmonic(n + 1) - 1), (n + 1) * n / 2


def l_star_table(n, convention):
    """``L*(x^r, n)`` for r = 1..n under a reading of x^r.

    pad-left-zeros: ``0^(n-r) 1^r`` among n coordinates;
    standalone-length-r: ``1^r`` as a cube of dimension r;
    ones-prefix: ``1^r 0^(n-r)`` among n coordinates.
    """
    _check_n(n)
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    w = np.empty(1 << n)
    _inverse_ones(n, w)
    r = np.arange(1, n + 1)
    if convention == "pad-left-zeros":
        return n * w[(1 << r) - 1]
    if convention == "standalone-length-r":
        return r * w[(1 << r) - 1]
    return n * w[((1 << r) - 1) << (n - r)]


def l_star_dp(r, n, convention="pad-left-zeros"):
    if not 1 <= r <= n:
        raise ValueError("need 1 <= r <= n")
    return float(l_star_table(n, convention)[r - 1])


def ghz_residual(n, convention):
    return abs(expected_steps_dp(n) - l_star_table(n, convention).sum() / (2 * n))


def resolve_convention(n_max=6, tol=1e-10):
    """Pick the reading of x^r under which the identity holds for n <= n_max.

    Returns the chosen convention and the worst residual of every candidate.
    """
    worst = {c: max(ghz_residual(n, c) for n in range(1, n_max + 1)) for c in CONVENTIONS}
    ok = [c for c in CONVENTIONS if worst[c] < tol]
    if len(ok) != 1:
        raise RuntimeError(f"convention not uniquely resolved: {worst}")
    return ok[0], worst


@dataclass
class DpResult:
    n: int
    e_n: float
    l_star: list
    convention: str
    residual: float
    bounds: tuple = ()
    meta: dict = field(default_factory=dict)

    def as_dict(self):
        return {"n": self.n, "e_n": self.e_n, "l_star": self.l_star,
                "convention": self.convention, "residual": self.residual,
                "bounds": list(self.bounds), **self.meta}


def km_exact(n, convention=None):
    if convention is None:
        convention, worst = resolve_convention()
        meta = {"convention_residuals": worst}
    else:
        meta = {}
    e = expected_steps_dp(n)
    ls = l_star_table(n, convention)
    return DpResult(n, e, ls.tolist(), convention, abs(e - ls.sum() / (2 * n)),
                    ghz_bounds(n), meta)


# ------------------------------------------------------------ Monte Carlo


@njit(cache=True)
def _en_kernel(rng, n, replicas, out, words, mask, cnt, width, tag):
    P = words.shape[0]
    for i in range(replicas):
        for w in range(P):
            x = (np.uint64(rng.integers(0, 1 << 32)) << np.uint64(32)) | np.uint64(
                rng.integers(0, 1 << 32)
            )
            words[w] = x & mask[w]
        _bits.rebuild(words, mask, cnt, width, tag)
        steps = 0
        while cnt[1] > 0:
            ones = cnt[1]
            k = np.int64(rng.random() * ones)
            if k >= ones:
                k = ones - 1
            s = _bits.select(k, words, mask, cnt, width, tag)
            _bits.suffix_flip(s, words, mask, cnt, width, tag)
            steps += 1
        out[i] = steps


@dataclass
class McEstimate:
    n: int
    replicas: int
    mean: float
    stderr: float
    samples: np.ndarray = field(repr=False, default=None)

    def as_dict(self):
        return {"n": self.n, "replicas": self.replicas, "e_n": self.mean,
                "stderr": self.stderr, "e_n_over_n2": self.mean / self.n**2}


def en_simulate(n, replicas, rng, keep=False):
    """Monte-Carlo E_n from uniform random starts."""
    if n < 1 or replicas < 1:
        raise ValueError("n and replicas must be positive")
    arrs = _bits.allocate(n)
    out = np.empty(replicas, dtype=np.int64)
    _en_kernel(rng, n, replicas, out, *arrs)
    se = float(out.std(ddof=1) / math.sqrt(replicas)) if replicas > 1 else float("nan")
    return McEstimate(n, replicas, float(out.mean()), se, out if keep else None)


# ------------------------------------------------------------ GF(2) part


class Gf2Matrix:
    """n x n matrix over GF(2), rows packed into 64-bit words (n <= 64).

    Entry (i, c) is bit ``c - 1`` of ``rows[i - 1]``. Column c is the image
    of the basis vector e_c.
    """

    def __init__(self, rows, n):
        if not 1 <= n <= 64:
            raise ValueError("dimension must be in 1..64")
        self.n = n
        self.rows = np.asarray(rows, dtype=np.uint64).copy()
        if self.rows.shape != (n,):
            raise ValueError("need n rows")

    @classmethod
    def identity(cls, n):
        return cls([1 << i for i in range(n)], n)

    @classmethod
    def from_rows(cls, rows, n):
        return cls(rows, n)

    def copy(self):
        return Gf2Matrix(self.rows, self.n)

    def __eq__(self, other):
        return self.n == other.n and np.array_equal(self.rows, other.rows)

    def apply(self, v):
        """Image of the vector ``v`` (vector encoding)."""
        out = 0
        for i, r in enumerate(self.rows.tolist()):
            out |= (bin(r & v).count("1") & 1) << i
        return out

    def row(self, i):
        return int(self.rows[i - 1])

    def column(self, c):
        return sum(((int(r) >> (c - 1)) & 1) << i for i, r in enumerate(self.rows))

    def transpose(self):
        return Gf2Matrix([self.column(c) for c in range(1, self.n + 1)], self.n)

    def rank(self):
        return _rank([int(r) for r in self.rows])

    def in_column_span(self, v):
        cols = [self.column(c) for c in range(1, self.n + 1)]
        return _rank(cols + [v]) == _rank(cols)

    def kernel(self):
        """A basis of the null space."""
        n = self.n
        rows = [int(r) for r in self.rows]
        pivots = []
        r = 0
        for c in range(n):
            bit = 1 << c
            p = next((i for i in range(r, n) if rows[i] & bit), None)
            if p is None:
                continue
            rows[r], rows[p] = rows[p], rows[r]
            for i in range(n):
                if i != r and rows[i] & bit:
                    rows[i] ^= rows[r]
            pivots.append(c)
            r += 1
        basis = []
        for f in (c for c in range(n) if c not in pivots):
            v = 1 << f
            for i, c in enumerate(pivots):
                if rows[i] >> f & 1:
                    v |= 1 << c
            basis.append(v)
        return basis

    def __repr__(self):
        lines = ["".join(str(int(r) >> c & 1) for c in range(self.n)) for r in self.rows]
        return "Gf2Matrix(\n  " + "\n  ".join(lines) + "\n)"


def _rank(vecs):
    basis = {}
    for v in vecs:
        while v:
            h = v.bit_length() - 1
            if h in basis:
                v ^= basis[h]
            else:
                basis[h] = v
                break
    return len(basis)


def suffix_mask(j, n):
    """Coordinates j..n in vector encoding."""
    return ((1 << n) - 1) ^ ((1 << (j - 1)) - 1)


def coupling_step(v, j, n):
    """Suppressed-move update at coordinate j, vector encoding."""
    return v ^ suffix_mask(j, n) if v >> (j - 1) & 1 else v


def coupling_apply(M, j):
    """Return ``L_j M`` where ``L_j x = x + x_j * (e_j + ... + e_n)``.

    Row j of ``L_j`` is zero and rows below j gain row j.
    """
    n = M.n
    if not 1 <= j <= n:
        raise ValueError("coordinate out of range")
    out = M.copy()
    rj = out.rows[j - 1]
    out.rows[j:] ^= rj
    out.rows[j - 1] = 0
    return out


def coupling_matrix(seq, n):
    M = Gf2Matrix.identity(n)
    for j in seq:
        M = coupling_apply(M, j)
    return M


def ones_prefix_vector(r):
    return (1 << r) - 1


def dual_state(seq, r, n):
    """Run the mirrored, time-reversed walk from ``0^(n-r) 1^r``.

    Returned in the original (unmirrored) orientation; it equals the
    suffix-parity transform of row r of the coupling matrix.
    """
    v = ones_prefix_vector(r)  # mirror of 0^(n-r) 1^r is 1^r 0^(n-r)
    for j in reversed(seq):
        # mirrored coordinate n+1-j with "right" pointing to lower index
        if v >> (j - 1) & 1:
            v ^= (1 << j) - 1
    return v


def dual_sequence(seq, n):
    """Mirrored coordinates in reversed time order."""
    return [n + 1 - j for j in reversed(seq)]


def forward_from_xr(seq, r, n):
    """The walk from ``0^(n-r) 1^r`` driven by ``seq`` (vector encoding)."""
    v = suffix_mask(n - r + 1, n)
    for j in seq:
        v = coupling_step(v, j, n)
    return v


def suffix_parity(v, n):
    """w_i = v_i + v_(i+1) + ... + v_n."""
    out = 0
    acc = 0
    for i in range(n - 1, -1, -1):
        acc ^= v >> i & 1
        out |= acc << i
    return out


@dataclass
class DualityReport:
    n: int
    t: int
    mode: str
    single: list
    max_single_residual: float
    set_max_residual: float
    realization_mismatches: int
    kernel_mismatches: int
    linearity_ok: bool | None = None
    samples: int | None = None
    stderr: float | None = None

    def as_dict(self):
        return dict(self.__dict__)

    @property
    def passed(self):
        tol = 1e-12 if self.mode == "exact" else 4 * (self.stderr or 0) + 1e-12
        return (self.max_single_residual < tol and self.set_max_residual < tol
                and self.realization_mismatches == 0 and self.kernel_mismatches == 0
                and self.linearity_ok is not False)


def _set_weight(seq, A, n):
    # 2^-rank if the all-ones column lies in the span of the dual rows
    rows = [dual_state(seq, r, n) for r in A]
    # the matrix has rows indexed by A; its columns live in GF(2)^|A|
    cols = []
    for c in range(n):
        cols.append(sum((rows[i] >> c & 1) << i for i in range(len(A))))
    u = _rank(cols)
    ones = (1 << len(A)) - 1
    return 2.0**-u if _rank(cols + [ones]) == u else 0.0


def _subsets(n):
    for k in range(1, n + 1):
        yield from itertools.combinations(range(1, n + 1), k)


def duality_check(n, t, mode="exact", samples=10_000, rng=None, max_enum=2**20):
    """Check the single-bit and set duality identities after t moves.

    exact: every coordinate sequence of length t; mc: ``samples`` random
    sequences. Both sides share the sequences; the dual side uses only the
    walks from the vectors ``0^(n-r) 1^r``.
    """
    if n < 1 or t < 0:
        raise ValueError("need n >= 1 and t >= 0")
    if mode == "exact":
        if n**t > max_enum or n > 10:
            raise ValueError("enumeration too large")
        seqs = itertools.product(range(1, n + 1), repeat=t)
        count = n**t
    elif mode == "mc":
        rng = rng or np.random.default_rng()
        arr = rng.integers(1, n + 1, size=(samples, t))
        seqs = (tuple(map(int, s)) for s in arr)
        count = samples
    else:
        raise ValueError("mode must be exact or mc")
    subsets = list(_subsets(n)) if n <= 6 else [tuple(range(1, n + 1))]
    lhs = np.zeros(n)
    rhs = np.zeros(n)
    set_l = np.zeros(len(subsets))
    set_r = np.zeros(len(subsets))
    per_l = []
    mism = kmis = 0
    starts = range(1 << n)
    for seq in seqs:
        M = coupling_matrix(seq, n)
        finals = [M.apply(x) for x in starts]
        for r in range(1, n + 1):
            lhs[r - 1] += sum(f >> (r - 1) & 1 for f in finals) / len(finals)
            alive = forward_from_xr(dual_sequence(seq, n), r, n) != 0
            rhs[r - 1] += 0.5 * alive
            row_alive = M.row(r) != 0
            if row_alive != (dual_state(seq, r, n) != 0):
                mism += 1
            if dual_state(seq, r, n) != suffix_parity(M.row(r), n):
                mism += 1
        for i, A in enumerate(subsets):
            a_mask = sum(1 << (r - 1) for r in A)
            set_l[i] += sum((f & a_mask) == a_mask for f in finals) / len(finals)
            set_r[i] += _set_weight(seq, A, n)
        if n <= 4:
            ker = {x for x in starts if finals[x] == 0}
            span = {0}
            for v in M.kernel():
                span |= {s ^ v for s in span}
            kmis += ker != span
        if mode == "mc":
            per_l.append([sum(f >> (r - 1) & 1 for f in finals) / len(finals)
                          - 0.5 * (forward_from_xr(dual_sequence(seq, n), r, n) != 0)
                          for r in range(1, n + 1)])
    lhs /= count
    rhs /= count
    set_l /= count
    set_r /= count
    se = None
    if mode == "mc":
        se = float(np.max(np.std(per_l, axis=0, ddof=1)) / math.sqrt(count)) if count > 1 else 0.0
    single = [{"r": r, "lhs": float(lhs[r - 1]), "rhs": float(rhs[r - 1])} for r in range(1, n + 1)]
    return DualityReport(
        n, t, mode, single,
        float(np.max(np.abs(lhs - rhs))),
        float(np.max(np.abs(set_l - set_r))) if len(subsets) else 0.0,
        mism, kmis,
        linearity_check(n) if n <= 4 else None,
        count, se,
    )


def linearity_check(n):
    """L_j(x + y) = L_j(x) + L_j(y) for every j and every pair, and the
    matrix of L_j agrees with the direct update."""
    full = range(1 << n)
    for j in range(1, n + 1):
        Mj = coupling_apply(Gf2Matrix.identity(n), j)
        for x in full:
            if Mj.apply(x) != coupling_step(x, j, n):
                return False
            for y in full:
                if coupling_step(x ^ y, j, n) != coupling_step(x, j, n) ^ coupling_step(y, j, n):
                    return False
    return True
