"""Upper-bound constants, checked against sampling.

The series route gives a value just under 2.92. Sampling the same
quantities shows that the series does not equal E H(T1 + T2); the exact
value comes from the generating function and gives a weaker constant.
"""
import math

import numpy as np

from kmchain import estimators as E, upper
from kmchain.upper import harmonic

N = 2 * 10**6
rng = np.random.default_rng(2024)

ub = upper.upper_bound()
print(f"integral E H(S+1) - 1     {ub.hs1.value:.7f}")
print(f"double series             {ub.theta2.value:.6f} (tail <= {ub.theta2.tail_estimate:.1e})")
print(f"series route bound        {ub.bound:.6f}")
print(f"E H(T1+T2) exact          {upper.e_h_theta2_exact().value:.6f}")
print(f"corrected bound           {upper.upper_bound_corrected()[0]:.4f}")


def mc(x, shift=0.0):
    h = harmonic(x) - shift
    return f"{h.mean():.4f} +- {h.std() / math.sqrt(len(h)):.4f}"


s = E.sample_S(rng, N)
t2 = E.sample_theta(rng, N) + E.sample_theta(rng, N)
print("MC H(S+1) - 1            ", mc(s + 1, 1.0))
print("MC H(T1+T2)              ", mc(t2))
print("MC H(T1+T2+S)            ", mc(t2 + s))
