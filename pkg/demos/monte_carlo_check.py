"""
Checking the operator results against simulated trajectories
============================================================

The Monte Carlo oracle follows single atoms through the cavity, draws each
detector click from the conditional field and collapses the field on it.
Nothing in it uses the ensemble maps, so agreement is a real test.
"""

from micromaser import PumpConfig
from micromaser.oracle import replay, simulate
from micromaser.stats import Window, q_direct

cfg = PumpConfig(gt_int=1.54, nex=5.0, nbar=0.145, p=0.5, eta_e=0.9, eta_g=0.8)
windows = [Window.fixed_n(20), Window.fixed_t(2.0)]

reports = simulate(cfg, 20_000, windows, seed=7)
for rep in reports:
    exact = q_direct(cfg, rep.window)
    for nu in "eg":
        z = (rep.q(nu) - exact.q(nu)) / rep.stderr(nu)
        print(f"{rep.window.label:6s} Q_{nu}: simulated {rep.q(nu):+.4f} +- {rep.stderr(nu):.4f}"
              f"   exact {exact.q(nu):+.4f}   ({z:+.1f} sigma)")

# any single trajectory can be replayed with its detector record
tr = replay(cfg, windows[0], seed=7, index=12, n_traj=20_000)
print("\ntrajectory 12:", "".join(o.value for _, o in tr.events), f"(N_e={tr.n_e}, N_g={tr.n_g})")
