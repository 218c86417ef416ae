"""Finite cube: exact expected steps, sampling, and the dual chain."""
import numpy as np

from kmchain import km

rng = np.random.default_rng(3)
conv, residuals = km.resolve_convention(6)
print("L* convention:", conv, {c: round(float(w), 3) for c, w in residuals.items()})
for n in (1, 2, 5, 10, 20):
    lo, hi = km.ghz_bounds(n)
    print(f"E_{n:<3d} = {km.expected_steps_dp(n):10.4f}   bounds [{lo:.2f}, {hi:.2f}]")

for n in (50, 200):
    est = km.en_simulate(n, 400, rng)
    print(f"E_{n} ~ {est.mean:.1f} +- {est.stderr:.1f}  (E/n^2 = {est.mean / n**2:.4f})")

rep = km.duality_check(4, 6, "exact")
print("duality n=4 t=6:", "pass" if rep.passed else "FAIL",
      f"max residual {rep.max_single_residual:.1e}")
