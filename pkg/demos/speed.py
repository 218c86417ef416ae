"""Drift speed of the leftmost 1 from a fair-coin start.

A shorter run than the acceptance test (10^5 leading flips); pass a count
on the command line for more.
"""
import sys

import numpy as np

from kmchain import chain, estimators as E

n = int(sys.argv[1]) if len(sys.argv) > 1 else 10**5
rng = np.random.default_rng(7)
state = chain.new_state(chain.Pattern.coin(), 4096, rng)
trace = chain.run(state, rng, n_leading_flips=n)
est = E.speed_estimate(trace, allow_truncated=True)
print(f"{len(trace)} leading flips, truncated: {trace.truncation_hit}")
print(f"speed (time)  {est.spd_sigma:.4f} +- {est.stderr:.4f}")
print(f"speed (count) {est.spd_count:.4f}")
cp = E.speed_checkpoints(trace)
for k, v, lo, hi in list(zip(cp["n"], cp["spd"], cp["running_min"], cp["running_max"]))[-5:]:
    print(f"  after {k:>7d} flips: {v:.4f}, running range [{lo:.4f}, {hi:.4f}]")
