"""Speed lower bound from the reward/maturation table.

Fills the table at depths 15 and 18 with the shipped bad set, prints the
worst leaf, and shows how the base-case choice moves the constant.
"""
from kmchain import lower

bad = lower.paper_bad_set()
for depth in (15, 18):
    for base in lower.BASES:
        table = lower.reward_table(depth, bad, base)
        x, ratio = lower.leaf_minimum(table)
        print(f"depth {depth:2d}  base {base:8s}  worst leaf {x:>7d} = {x:b}  "
              f"ratio {ratio:.6f}  bound {1 + ratio:.4f}")

table = lower.reward_table(18, bad)
print("internal scan:", lower.internal_minimum(table))
print("without a bad set:", lower.lower_bound(lower.reward_table(18)))
