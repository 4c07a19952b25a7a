"""
Counting a fixed number of atoms versus counting for a fixed time
=================================================================

The field settles to the same steady state either way, yet the atom counts
do not share their statistics.  Finite windows interpolate between one atom
and the asymptotic values.
"""

import numpy as np

from micromaser import PumpConfig
from micromaser.maps import MapKind, steady_state
from micromaser.stats import Window, count_distribution, q_direct

cfg = PumpConfig(gt_int=1.54, nex=5.0, nbar=0.145, p=0.5)

a = steady_state(MapKind.fixed_N(), cfg)
b = steady_state(MapKind.fixed_t(), cfg)
print("trace distance of the two steady states:", a.trace_distance(b))

print(f"\n{'K':>6} {'Q_g (N=K)':>12} {'~Q_g (t=K T)':>14}")
for K in (1, 2, 5, 10, 50, 200, 1000):
    qn = q_direct(cfg, Window.fixed_n(K)).q_g
    qt = q_direct(cfg, Window.fixed_t(K * cfg.slot)).q_g
    print(f"{K:6d} {qn:12.5f} {qt:14.5f}")
print(f"{'inf':>6} {q_direct(cfg, Window.fixed_n()).q_g:12.5f} {q_direct(cfg, Window.fixed_t()).q_g:14.5f}")

# the whole distribution of ground-state counts in 20 atoms
dist = count_distribution(Window.fixed_n(20), cfg)
w_g = dist.w_g
print("\nP(N_g) for N = 20:")
for n, w in enumerate(w_g):
    if w > 1e-4:
        print(f"{n:3d} {w:.5f} " + "#" * int(200 * w))
print("sum =", dist.total, " Q from the table:", dist.mandel_q("g"))
