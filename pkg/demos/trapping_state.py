"""
Atom statistics at a trapping state
===================================

At gt_int = pi/sqrt(2) an excited atom meeting one photon cannot emit, so a
cold cavity never holds more than one photon.  The counting statistics then
have closed forms, which we compare with the general numerical pipeline.
"""

import math

import numpy as np

from micromaser import PumpConfig
from micromaser.maps import MapKind, default_space, steady_state
from micromaser.stats import Window, q_closed_form_two_level, q_direct, q_spectral

gt = math.pi / math.sqrt(2)

# the truncation picks the trapping state by itself: two levels suffice
cfg = PumpConfig(gt, nex=10.0)
print("n_max =", default_space(cfg).n_max)
print("steady populations:", steady_state(MapKind.fixed_t(), cfg).populations)

# asymptotic Q for many atoms (N) and long collection times (t)
print(f"\n{'N_ex':>8} {'Q_e':>9} {'Q_g':>9} {'~Q_e':>9} {'~Q_g':>9}   max |numeric - closed|")
for nex in np.geomspace(0.01, 100, 9):
    cfg = PumpConfig(gt, nex)
    fixed_n = q_direct(cfg, Window.fixed_n())
    fixed_t = q_direct(cfg, Window.fixed_t())
    err = max(abs(r.q(nu) - q_closed_form_two_level(cfg, nu, r.window))
              for r in (fixed_n, fixed_t) for nu in "eg")
    print(f"{nex:8.3g} {fixed_n.q_e:9.4f} {fixed_n.q_g:9.4f} {fixed_t.q_e:9.4f} {fixed_t.q_g:9.4f}"
          f"   {err:.1e}")

# Q_e heads to -1: with the field locked in |1>, every atom leaves excited.
# The same numbers also come out of the eigenmode expansion
cfg = PumpConfig(gt, 3.0, p=0.5)
for window in (Window.fixed_n(), Window.fixed_n(25), Window.fixed_t(4.0)):
    a, b = q_direct(cfg, window), q_spectral(cfg, window)
    print(window.label, a.q_g, b.q_g)
