"""
A few thermal photons destroy the trapping state
================================================

With nbar = 0.1 a thermal photon can lift the field past |1>, after which the
atoms pump it far up the ladder.  The count statistics turn super-Poissonian
where the cold cavity gave Q_e -> -1.
"""

from micromaser.cli import RECIPES, build_spec, run_sweep

for name in ("fig1", "fig2"):
    spec = build_spec([RECIPES[name]], ["steps=9"])
    print(f"{name}: nbar = {spec.base['nbar']}")
    print(f"{'N_ex':>8} {'Q_e':>10} {'Q_g':>10} {'~Q_e':>10} {'~Q_g':>10} {'Q_f':>8}")
    for row in run_sweep(spec):
        vals = [float(row[k]) for k in ("nex_or_gtint", "Q_e", "Q_g", "Qt_e", "Qt_g", "Q_f")]
        print("{:8.3g} {:10.4f} {:10.4f} {:10.4f} {:10.4f} {:8.4f}".format(*vals))
    print()
