"""Numerics behind the upper speed bound.

Two quantities are combined through concavity of the harmonic numbers,

    E H(T1 + T2 + S) <= E H(T1 + T2) + (E H(S + 1) - 1),

where ``T1, T2`` are independent copies of the heavy-tailed variable with
``P(T >= j) = H_j / j`` and ``S`` is a geometric(1/2)-length sum of
increments with ``P(k) = 2 / ((k + 1)(k + 2))``.

``e_h_s_plus_1`` evaluates the generating-function integral for
``E H(S + 1) - 1``. ``e_h_theta2`` evaluates the reference double series
(which starts from a constant 1 where ``E H(T2)`` belongs); the exact value
of ``E H(T1 + T2)`` is available from ``e_h_theta2_exact``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special

EULER_GAMMA = 0.57721566490153286061
_EXACT_LIMIT = 10**6


@dataclass
class SeriesResult:
    value: float
    truncation_j: int
    truncation_k: int
    tail_estimate: float


@dataclass
class QuadratureResult:
    value: float
    abs_tol: float
    panel_count: int
    meta: dict = field(default_factory=dict)


@lru_cache(maxsize=1)
def _harmonic_table():
    # extended precision keeps the running sum accurate to ~1e-16 relative
    terms = 1.0 / np.arange(1, _EXACT_LIMIT + 1, dtype=np.longdouble)
    table = np.empty(_EXACT_LIMIT + 1, dtype=np.longdouble)
    table[0] = 0
    np.cumsum(terms, out=table[1:])
    return table.astype(np.float64)


def _harmonic_asymptotic(n):
    n = np.asarray(n, dtype=np.float64)
    inv2 = 1.0 / (n * n)
    return np.log(n) + EULER_GAMMA + 0.5 / n - inv2 / 12.0 + inv2 * inv2 / 120.0


def harmonic(n):
    """H_n = 1 + 1/2 + ... + 1/n, with H_0 = 0. Accepts arrays."""
    arr = np.asarray(n)
    if np.any(arr < 0):
        raise ValueError("harmonic numbers need n >= 0")
    if arr.ndim == 0:
        k = int(arr)
        if k <= _EXACT_LIMIT:
            return float(_harmonic_table()[k])
        return float(_harmonic_asymptotic(k))
    arr = arr.astype(np.int64)
    out = np.empty(arr.shape, dtype=np.float64)
    small = arr <= _EXACT_LIMIT
    out[small] = _harmonic_table()[arr[small]]
    if not small.all():
        out[~small] = _harmonic_asymptotic(arr[~small])
    return out


def _log_term(z):
    # log(1/(1-z))
    return -np.log1p(-z)


def _log_minus_z(z):
    """log(1/(1-z)) - z without cancellation for small z."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    small = z <= 1e-3
    zs = z[small]
    # z^2/2 + z^3/3 + ...; ten terms reach 1e-30 at z = 1e-3
    acc = np.zeros_like(zs)
    p = zs * zs
    for m in range(2, 12):
        acc += p / m
        p = p * zs
    out[small] = acc
    zb = z[~small]
    out[~small] = _log_term(zb) - zb
    return out


def _f(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    small = z <= 1e-3
    zs = z[small]
    acc = np.zeros_like(zs)
    p = zs.copy()
    for k in range(1, 10):
        acc += 2.0 * p / ((k + 1) * (k + 2))
        p = p * zs
    out[small] = acc
    zb = z[~small]
    out[~small] = (2 * zb - zb * zb - 2 * (1 - zb) * _log_term(zb)) / (zb * zb)
    return out


def _check_unit(z, closed_right=False):
    z = np.asarray(z, dtype=np.float64)
    bad = (z < 0) | ((z > 1) if closed_right else (z >= 1))
    if np.any(bad):
        raise ValueError("argument outside the unit interval")
    return z


def f_gen(z):
    """Generating function of the S-walk increments, sum 2 z^k / ((k+1)(k+2)).

    Closed form for z > 1e-3, power series below (the closed-form numerator
    is O(z^3)). ``f(0) = 0`` is returned as the limit.
    """
    z = _check_unit(z)
    out = _f(np.atleast_1d(z))
    return float(out[0]) if np.ndim(z) == 0 else out


def phi_gen(z):
    """Generating function of S: 1 / (2 - f(z))."""
    z = _check_unit(z)
    out = 1.0 / (2.0 - _f(np.atleast_1d(z)))
    return float(out[0]) if np.ndim(z) == 0 else out


def _hs_integrand(z):
    # z (1 - phi) / (1 - z) rewritten as 2 (L - z) / (z (2 - f)) with L = log(1/(1-z));
    # both factors are free of cancellation on (0, 1)
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    out = np.empty_like(z)
    pos = z > 0
    zp = z[pos]
    out[pos] = 2.0 * _log_minus_z(zp) / (zp * (2.0 - _f(zp)))
    out[~pos] = 0.0
    return out


def hs_integrand(z):
    """Integrand whose integral over (0, 1) is E H(S+1) - 1."""
    z = _check_unit(z)
    out = _hs_integrand(z)
    return float(out[0]) if np.ndim(z) == 0 else out


def e_h_s_plus_1(tol=1e-10, limit=200):
    """Integral of ``hs_integrand`` over (0, 1), i.e. ``E H(S+1) - 1``.

    Split at 1/2; the upper half is integrated in ``u = 1 - z`` so the
    logarithmic endpoint singularity sits at the origin.
    """
    if tol < 1e-10:
        raise ValueError("tolerance below 1e-10 is not supported")
    scalar = lambda z: float(_hs_integrand(z)[0])
    lo, err_lo, info_lo = integrate.quad(
        scalar, 0.0, 0.5, epsabs=tol / 4, epsrel=0.0, limit=limit, full_output=True
    )[:3]
    hi, err_hi, info_hi = integrate.quad(
        lambda u: scalar(1.0 - u), 0.0, 0.5, epsabs=tol / 4, epsrel=0.0, limit=limit,
        full_output=True,
    )[:3]
    err = err_lo + err_hi
    if err > tol:
        raise RuntimeError(f"quadrature error {err:.3g} exceeds tolerance {tol:.3g}")
    panels = int(info_lo["last"] + info_hi["last"])
    return QuadratureResult(lo + hi, max(err, np.finfo(float).eps), panels,
                            {"neval": int(info_lo["neval"] + info_hi["neval"])})


def theta_term_factors(J, K):
    j = np.arange(1, J + 1, dtype=np.float64)
    k = np.arange(1, K + 1, dtype=np.float64)
    a = harmonic(np.arange(1, J + 1)) / j
    b = (harmonic(np.arange(2, K + 2)) - 1.0) / (k * (k + 1.0))
    return j, k, a, b


def e_h_theta2(J=10_000, K=10_000, budget=None, chunk=512):
    """Reference double series ``1 + sum_{j,k} (H_j/j) (H_{k+1}-1)/(k(k+1)) / (j+k)``.

    ``tail_estimate`` bounds the omitted terms (``j > J`` or ``k > K``)
    using ``H_m <= 1 + log m`` and integral comparison.
    """
    if J < 10 or K < 10:
        raise ValueError("cutoffs must be at least 10")
    j, k, a, b = theta_term_factors(J, K)
    total = 0.0
    comp = 0.0
    for start in range(0, J, chunk):
        jj = j[start : start + chunk, None]
        block = (a[start : start + chunk, None] * b[None, :]) / (jj + k[None, :])
        # Kahan over row blocks; numpy sums each block pairwise
        y = float(block.sum()) - comp
        t = total + y
        comp = (t - total) - y
        total = t
    b_tail = (math.log(K + 1) + 1.0) / K
    b_total = float(b.sum()) + b_tail
    tail_j = (2.0 + math.log(J)) / J * b_total
    tail_k = float(a.sum()) * (math.log(K) / (2.0 * K**2) + 1.0 / (4.0 * K**2) + 1.0 / (3.0 * K**3))
    tail = tail_j + tail_k
    if budget is not None and tail > budget:
        raise ValueError(f"cutoffs give tail {tail:.3g} above budget {budget:.3g}")
    return SeriesResult(1.0 + total, int(J), int(K), tail)


def theta_tail_sum(z):
    """sum_{j>=1} P(T >= j) z^j = Li2(z) + log(1-z)^2 / 2."""
    z = np.asarray(z, dtype=np.float64)
    return special.spence(1.0 - z) + 0.5 * np.log1p(-z) ** 2


def theta_pgf(z):
    """E z^T for the heavy-tailed T with survival H_j / j."""
    z = np.asarray(z, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = 1.0 - (1.0 - z) * theta_tail_sum(z) / z
    return np.where(z == 0, 0.0, out)


def e_h_theta2_exact(tol=1e-12):
    """E H(T1 + T2) from the generating function of T.

    Uses ``E H(X) = int_0^1 (1 - E z^X) / (1 - z) dz``; with
    ``1 - E z^T = (1 - z) G(z) / z`` the integrand is ``G (1 + psi) / z``.
    """

    def integrand(z):
        if z == 0.0:
            return 1.0
        g = float(theta_tail_sum(z))
        psi = 1.0 - (1.0 - z) * g / z
        return g * (1.0 + psi) / z

    val, err = integrate.quad(integrand, 0.0, 1.0, epsabs=tol, epsrel=tol, limit=200)
    return QuadratureResult(val, max(err, np.finfo(float).eps), 0)


def e_h_theta():
    """E H(T) = sum_j H_j / j^2 = 2 zeta(3)."""
    return 2.0 * float(special.zeta(3.0))


@dataclass
class UpperBound:
    theta2: SeriesResult
    hs1: QuadratureResult
    bound: float
    error_budget: float

    def as_dict(self):
        return {
            "theta2": self.theta2.value,
            "theta2_tail": self.theta2.tail_estimate,
            "theta2_cutoffs": [self.theta2.truncation_j, self.theta2.truncation_k],
            "hs1": self.hs1.value,
            "hs1_abs_tol": self.hs1.abs_tol,
            "bound": self.bound,
            "error_budget": self.error_budget,
        }


def upper_bound(J=10_000, K=10_000, tol=1e-10):
    """Series route: series value for E H(T1+T2) plus the S integral.

    The integral already equals ``E H(S+1) - 1``, so the two are added.
    """
    theta2 = e_h_theta2(J, K)
    hs1 = e_h_s_plus_1(tol)
    bound = theta2.value + hs1.value
    return UpperBound(theta2, hs1, bound, theta2.tail_estimate + hs1.abs_tol)


def upper_bound_corrected(tol=1e-10):
    """Same chain of inequalities with the exact E H(T1 + T2)."""
    exact = e_h_theta2_exact()
    hs1 = e_h_s_plus_1(tol)
    return exact.value + hs1.value, exact.abs_tol + hs1.abs_tol
