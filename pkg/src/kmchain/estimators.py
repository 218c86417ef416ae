"""Speed estimates, exact laws of the dominating variables, and dominance tests."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy import stats

from . import chain
from .upper import harmonic

log = logging.getLogger(__name__)

THETA_CAP = 10**9
_THETA_TABLE = 2**20


@dataclass
class SpeedEstimate:
    n_jumps: int
    spd_sigma: float
    spd_count: float
    stderr: float
    seed: int | None = None
    stderr_count: float = float("nan")
    n_batches: int = 32
    valid: bool = True


def speed_estimate(trace, n_batches=32, seed=None, allow_truncated=False):
    """Average speed of the leading 1 over a trace.

    ``spd_sigma`` divides the total advance by the elapsed time, ``spd_count``
    by the number of leading flips. Standard errors come from ``n_batches``
    contiguous batch means (ratio estimator per batch for ``spd_sigma``).
    """
    n = len(trace)
    if n == 0:
        raise ValueError("empty trace")
    if trace.truncation_hit and not allow_truncated:
        raise ValueError("trace hit the window edge; refusing to estimate")
    jumps = np.asarray(trace.jump, dtype=np.float64)
    sig = np.asarray(trace.sigma, dtype=np.float64)
    t0 = float(trace.meta.get("t0", 0.0))
    dt = np.diff(np.concatenate([[t0], sig]))
    spd_sigma = jumps.sum() / (sig[-1] - t0)
    spd_count = jumps.mean()
    se_sigma = se_count = float("nan")
    nb = min(n_batches, n)
    if nb >= 2:
        edges = np.linspace(0, n, nb + 1).astype(int)
        js = np.add.reduceat(jumps, edges[:-1])
        ts = np.add.reduceat(dt, edges[:-1])
        cs = np.diff(edges)
        se_sigma = float(np.std(js / ts, ddof=1) / math.sqrt(nb))
        se_count = float(np.std(js / cs, ddof=1) / math.sqrt(nb))
    return SpeedEstimate(n, float(spd_sigma), float(spd_count), se_sigma,
                         seed if seed is not None else trace.seed, se_count, nb,
                         not trace.truncation_hit)


def speed_checkpoints(trace, base=2.0):
    """spd(n) at exponentially spaced n, with running min and max.

    These are finite-n proxies for the lower and upper limits of the speed;
    no limit is implied.
    """
    n = len(trace)
    if n == 0:
        raise ValueError("empty trace")
    t0 = float(trace.meta.get("t0", 0.0))
    cum = np.cumsum(trace.jump)
    ns = sorted({int(round(base**p)) for p in range(int(math.log(n, base)) + 1)} | {n})
    ns = [m for m in ns if 1 <= m <= n]
    spd = np.array([cum[m - 1] / (trace.sigma[m - 1] - t0) for m in ns])
    return {
        "n": ns,
        "spd": spd.tolist(),
        "running_min": np.minimum.accumulate(spd).tolist(),
        "running_max": np.maximum.accumulate(spd).tolist(),
    }


@dataclass
class LawTable:
    """A law on integers, stored as pmf or survival ``P(X >= k)``."""

    support: np.ndarray
    values: np.ndarray
    kind: str
    survival: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.support = np.asarray(self.support, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.support.shape != self.values.shape:
            raise ValueError("support and values differ in length")

    def as_dict(self):
        return dict(zip(self.support.tolist(), self.values.tolist()))

    def mean(self):
        if self.survival:
            raise ValueError("mean needs a pmf table")
        return float(np.dot(self.support, self.values))

    def to_survival(self):
        if self.survival:
            return self
        tail = np.cumsum(self.values[::-1])[::-1]
        return LawTable(self.support, tail, self.kind, True, dict(self.meta))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "survival" if self.survival else "pmf"])
            for k, v in zip(self.support, self.values):
                w.writerow([int(k), repr(float(v))])


def jump1_law_exact(j):
    """Law of the first leading jump from a state opening with ``j`` ones.

    ``P(k) = 1/(k(k+1))`` for ``k < j`` and ``P(j) = 1/j``.
    """
    j = int(j)
    if j < 1:
        raise ValueError("j must be positive")
    k = np.arange(1, j + 1, dtype=np.float64)
    pmf = 1.0 / (k * (k + 1.0))
    pmf[-1] = 1.0 / j
    return LawTable(np.arange(1, j + 1), pmf, f"jump1({j})")


def theta_survival(j):
    """P(T >= j) = H_j / j."""
    arr = np.asarray(j)
    if np.any(arr < 1):
        raise ValueError("theta survival is defined for j >= 1")
    out = harmonic(arr) / arr
    return float(out) if arr.ndim == 0 else out


def theta_law(cutoff):
    k = np.arange(1, cutoff + 1)
    return LawTable(k, theta_survival(k), "theta", survival=True)


def s_increment_pmf(k):
    arr = np.asarray(k)
    if np.any(arr < 1):
        raise ValueError("increments are at least 1")
    out = 2.0 / ((arr + 1.0) * (arr + 2.0))
    return float(out) if arr.ndim == 0 else out


@lru_cache(maxsize=4)
def _s_pmf(cutoff):
    inc = 2.0 / ((np.arange(1, cutoff + 1) + 1.0) * (np.arange(1, cutoff + 1) + 2.0))
    p = np.zeros(cutoff + 1)
    p[0] = 0.5
    # S = 0 w.p. 1/2, else one increment plus an independent copy of S
    for n in range(1, cutoff + 1):
        p[n] = 0.5 * np.dot(inc[:n], p[n - 1 :: -1])
    return p


def s_pmf(cutoff=4096):
    """Exact pmf of S on ``0..cutoff`` (renewal recursion)."""
    p = _s_pmf(int(cutoff))
    return LawTable(np.arange(cutoff + 1), p.copy(), "s_total")


def s_shift_survival(j, cutoff=4096):
    """Survival table of ``S + j`` on ``1..cutoff + j``."""
    p = _s_pmf(int(cutoff))
    surv = 1.0 - np.concatenate([[0.0], np.cumsum(p)[:-1]])
    support = np.arange(cutoff + 1) + j
    full = np.concatenate([np.ones(j - 1), surv]) if j > 1 else surv
    full_support = np.concatenate([np.arange(1, j), support]) if j > 1 else support
    if j == 0:
        full, full_support = surv[1:], support[1:]
    return LawTable(full_support, np.clip(full, 0.0, 1.0), f"s_plus_{j}", survival=True)


@lru_cache(maxsize=1)
def _theta_table():
    k = np.arange(1, _THETA_TABLE + 1)
    return harmonic(k) / k


def sample_theta(rng, size=None):
    """Draw T with ``P(T >= j) = H_j / j`` by inversion.

    Values above ``THETA_CAP`` are clipped to it; the clip count is logged.
    """
    n = 1 if size is None else int(np.prod(size))
    u = 1.0 - rng.random(n)  # (0, 1]
    surv = _theta_table()
    # surv is decreasing; T = max{j : surv[j-1] >= u}
    out = np.searchsorted(-surv, -u, side="right").astype(np.int64)
    far = out >= _THETA_TABLE
    if far.any():
        uf = u[far]
        lo = np.full(uf.shape, float(_THETA_TABLE))
        hi = np.full(uf.shape, float(THETA_CAP))
        s_cap = float(harmonic(THETA_CAP)) / THETA_CAP
        capped = uf < s_cap
        for _ in range(40):
            mid = np.floor((lo + hi) / 2)
            ok = harmonic(mid.astype(np.int64)) / mid >= uf
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        res = lo.astype(np.int64)
        res[capped] = THETA_CAP
        if capped.any():
            log.info("theta sampler clipped %d draws at %d", int(capped.sum()), THETA_CAP)
        out[far] = res
    return int(out[0]) if size is None else out.reshape(size)


def sample_S(rng, size=None):
    """Draw S: a geometric(1/2) number (mean 1) of heavy-tailed increments.

    Increments use ``P(I >= k) = 2/(k+1)``, i.e. ``I = floor(2/u) - 1``.
    """
    n = 1 if size is None else int(np.prod(size))
    g = rng.geometric(0.5, n) - 1
    total = int(g.sum())
    u = 1.0 - rng.random(total)
    inc = np.floor(2.0 / u) - 1.0
    idx = np.repeat(np.arange(n), g)
    s = np.bincount(idx, weights=inc, minlength=n)
    out = np.minimum(s, 2.0**62).astype(np.int64)
    return int(out[0]) if size is None else out.reshape(size)


def empirical_survival(samples, support, censored_high=None):
    """``P(X >= k)`` for each ``k`` in ``support``.

    ``censored_high`` marks samples known only to be at least their value;
    they count as exceeding every ``k`` up to that value and are rejected
    as ambiguous above it.
    """
    x = np.asarray(samples)
    support = np.asarray(support)
    if len(x) == 0:
        raise ValueError("no samples")
    xs = np.sort(x)
    surv = 1.0 - np.searchsorted(xs, support, side="left") / len(x)
    if censored_high is not None:
        c = np.asarray(censored_high, dtype=bool)
        if c.any() and support.max() > x[c].min():
            raise ValueError("support extends beyond a censored observation")
    return LawTable(support, surv, "empirical", survival=True, meta={"n": int(len(x))})


@dataclass
class DominanceReport:
    passed: bool
    max_violation: float
    worst_k: int
    n_samples: int
    confidence: float
    z: float
    details: list = field(default_factory=list)

    def as_dict(self):
        return asdict(self)

    def to_json(self, path, **extra):
        with open(path, "w") as fh:
            json.dump({**self.as_dict(), **extra}, fh, indent=2, sort_keys=True)


def dominance_check(empirical, reference, n_samples, confidence=0.999):
    """Does the empirical survival sit below the reference at every point?

    Each point gets a one-sided binomial margin ``z sqrt(p (1 - p) / n)``
    at reference level ``p``, with ``z`` Bonferroni-corrected over the
    support. ``max_violation`` is the largest excess over the reference
    before margins.
    """
    if not (empirical.survival and reference.survival):
        raise ValueError("dominance is checked on survival tables")
    if not np.array_equal(empirical.support, reference.support):
        raise ValueError("survival tables have different supports")
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    m = len(reference.support)
    z = float(stats.norm.ppf(1.0 - (1.0 - confidence) / max(m, 1)))
    p = np.clip(reference.values, 0.0, 1.0)
    margin = z * np.sqrt(p * (1 - p) / n_samples) + 1.0 / n_samples
    excess = empirical.values - p
    i = int(np.argmax(excess))
    passed = bool(np.all(excess <= margin))
    details = [
        {"k": int(k), "empirical": float(e), "reference": float(r), "margin": float(g)}
        for k, e, r, g in zip(reference.support, empirical.values, p, margin)
    ]
    return DominanceReport(passed, float(excess[i]), int(reference.support[i]),
                           int(n_samples), confidence, z, details)


def conditional_zeros_bound(k, j):
    """Bound (k+1)/(k+j) on P(zeros*(Y_1) >= j | jump_1 = k)."""
    return (k + 1) / (k + j)


def binomial_band(p, n, z=4.0):
    return z * np.sqrt(np.asarray(p) * (1 - np.asarray(p)) / n)


def jump1_check(r, n, rng, L=None, z=4.0):
    """Empirical jump_1 law from the all-ones start against the exact law."""
    L = L or max(2 * r + 2, 16)
    out = chain.first_leading_samples(chain.Pattern.all_ones(r), L, n, rng)
    exact = jump1_law_exact(r)
    counts = np.bincount(out[:, 0], minlength=r + 1)[1 : r + 1]
    emp = counts / n
    band = binomial_band(exact.values, n, z)
    mean = out[:, 0].mean()
    h = harmonic(r)
    var = float(np.dot(exact.support.astype(float) ** 2, exact.values) - h * h)
    mean_band = z * math.sqrt(var / n) if var > 0 else 0.0
    return {
        "r": r,
        "n": n,
        "empirical": emp.tolist(),
        "exact": exact.values.tolist(),
        "max_abs_err": float(np.max(np.abs(emp - exact.values))),
        "cells_ok": bool(np.all(np.abs(emp - exact.values) <= band)),
        "mean": float(mean),
        "harmonic": h,
        "mean_ok": bool(abs(mean - h) <= mean_band + 1e-12),
    }


def lemma_eight_check(r, n, rng, L=256, jmax=50, tail="coin", confidence=0.999):
    """Survival of zeros*(Y_1) from a state opening with ``r`` ones.

    With ``tail="coin"`` the start is ``1^r 0`` followed by fair coins. With
    ``tail="zeros"`` the start is ``1^r 0 0 ...``; then ``Y_1`` is all ones
    whenever the leading clock rings first (so with probability at least
    1/r), and it can also be ``1^m 0 0 ...``; either way zeros* is infinite. Those draws are
    reported in ``degenerate`` and the survival is taken over the rest.
    """
    prefix = (1,) * r + ((0,) if tail == "coin" else ())
    out = chain.first_leading_samples(chain.Pattern(prefix, tail), L, n, rng)
    degenerate = out[:, 1] >= L
    all_ones = int(degenerate.sum())
    if tail == "zeros":
        degenerate |= out[:, 3] < 0
    zs = out[~degenerate, 3]
    # no 1 inside the window after the block: at least L - ones - jump zeros
    censored = zs < 0
    zs = np.where(censored, L - out[~degenerate, 1], zs)
    support = np.arange(1, jmax + 1)
    info_n = int(len(zs))
    if info_n == 0:
        # every draw degenerate (r = 1 on a zero tail): nothing to test
        return DominanceReport(True, 0.0, 1, 0, confidence, float("nan")), {
            "degenerate": int(degenerate.sum()), "all_ones": all_ones, "censored": 0,
            "n_used": 0}
    emp = empirical_survival(zs, support, censored_high=censored)
    ref = LawTable(support, theta_survival(support), "theta", survival=True)
    rep = dominance_check(emp, ref, len(zs), confidence)
    return rep, {"degenerate": int(degenerate.sum()), "all_ones": all_ones,
                 "censored": int(censored.sum()),
                 "n_used": int(len(zs))}


def lemma_second_check(j, n, rng, L=256, kmax=None, confidence=0.999):
    """Survival of ones(Y_1) from ``1 0^j 1`` + fair coins against ``S + j``."""
    out = chain.first_leading_samples(chain.Pattern.zeros_block(j, "coin"), L, n, rng)
    ones = out[:, 1]
    censored = ones >= L - 1
    kmax = kmax or min(L - 2, 200)
    support = np.arange(1, kmax + 1)
    emp = empirical_survival(ones, support, censored_high=censored)
    ref_full = s_shift_survival(j, cutoff=4096)
    ref = LawTable(support, ref_full.values[: len(support)], f"s_plus_{j}", survival=True)
    rep = dominance_check(emp, ref, n, confidence)
    return rep, {"censored": int(censored.sum())}


def window_census(state, rng, offset, width, n_samples=1, dt=1.0, identify_complement=True):
    """Pattern frequencies in the window ``[offset, offset + width)``.

    The window is read in the frame of the leading 1 at ``n_samples`` times
    spaced ``dt`` apart, the first at the current time. With
    ``identify_complement`` a pattern and its complement share one class,
    keyed by the lexicographically smaller string.
    """
    if width < 0 or offset < 0 or offset + width > state.L:
        raise ValueError("window outside the domain")
    counts = {}
    if width == 0:
        return counts
    t = float(state.time[0])
    for i in range(n_samples):
        if i:
            t += dt
            chain.run(state, rng, t_max=t)
            if state.truncation_hit:
                log.warning("window census stopped at truncation after %d samples", i)
                break
        word = "".join(map(str, state.bits[offset : offset + width]))
        if identify_complement:
            comp = "".join("1" if c == "0" else "0" for c in word)
            word = min(word, comp)
        counts[word] = counts.get(word, 0) + 1
    return counts
