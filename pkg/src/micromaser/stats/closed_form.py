"""Closed forms at the solvable point and limiting laws.

At ``gt_int = pi/sqrt(2)`` with a cold reservoir, ``|1>`` is a trapping state
and the field never leaves ``{|0>, |1>}``.  Everything then reduces to a
two-state chain with

* ``beta1 = sin^2(pi/sqrt(2))``, ``alpha1 = 1 - beta1``;
* ``d = exp(-p/N_ex)``, the decay factor per slot;
* ``D = 1 - d + p beta1 d``.
"""

import math

from ..errors import WindowError
from ..fock import make_space, thermal_populations
from ..superop import PumpConfig, beta, gain_maps
from .process import Window
from .qparam import QReport

SOLVABLE_GT = math.pi / math.sqrt(2)
SOLVABLE_TOL = 1e-12


def is_solvable(cfg: PumpConfig) -> bool:
    return abs(cfg.gt_int - SOLVABLE_GT) < SOLVABLE_TOL and cfg.nbar == 0


def _binomial(p, nex, which, tilde):
    b = float(beta(1, SOLVABLE_GT))
    a = 1.0 - b
    d = math.exp(-p / nex)
    D = 1.0 - d + p * b * d
    mid = a * (1.0 - d) + p * b * d
    if tilde and which == "e":
        return -(2 * p * p * b * b * (1 - d) * (a + p * b * d - d) * d / (D * mid) + p * mid) / D
    if tilde:
        return -(2 * p * b * (1 - p * b) * (1 - d) * d / D + p * b * (1 - d)) / D
    if which == "e":
        return -(2 * p * b * b * a * (1 - d) ** 2 * d / (D * mid) + mid) / D
    return -(2 * p * b * a * (1 - d) * d / D + b * (1 - d)) / D


def _poisson(nex, which, tilde):
    b = float(beta(1, SOLVABLE_GT))
    a = 1.0 - b
    x = b * nex
    if tilde and which == "e":
        return 2 * b * x * x / ((x + a) * (x + 1) ** 2)
    if tilde:
        return -2 * x / (x + 1) ** 2
    if which == "e":
        return -(2 * b * a * x / ((x + 1) * (x + a)) + x + a) / (x + 1)
    return -(2 * a * x / (x + 1) + b) / (x + 1)


def q_closed_form_two_level(cfg: PumpConfig, which: str, window: Window) -> float:
    """Asymptotic Q of atoms detected in ``which`` at the solvable point.

    ``window.kind`` selects the fixed-N (``'N'``) or fixed-time (``'t'``) value;
    only asymptotic windows have a closed form.
    """
    if not is_solvable(cfg):
        raise ValueError(
            f"closed forms need gt_int = pi/sqrt(2) and nbar = 0, got gt_int={cfg.gt_int!r}, nbar={cfg.nbar!r}")
    if not window.asymptotic:
        raise WindowError("closed forms exist only for asymptotic windows")
    if which not in ("e", "g"):
        raise ValueError(f"which must be 'e' or 'g', got {which!r}")
    eta = cfg.efficiency(which)
    if cfg.nex == 0:
        return 0.0
    tilde = window.kind == "t"
    if cfg.poisson:
        return eta * _poisson(cfg.nex, which, tilde)
    return eta * _binomial(cfg.p, cfg.nex, which, tilde)


def closed_form_report(cfg: PumpConfig, window: Window) -> QReport:
    rep = QReport(window, "closed_form")
    rep.q_e = q_closed_form_two_level(cfg, "e", window)
    rep.q_g = q_closed_form_two_level(cfg, "g", window)
    return rep


def thermal_beta(cfg: PumpConfig, n_max=None) -> float:
    """``Tr[F_g rho_th]``: chance that an atom meeting a thermal field leaves in ``g``."""
    space = make_space(n_max or max(200, int(60 * (cfg.nbar + 1))))
    pops = thermal_populations(cfg.nbar, space, warn=False)
    _, F_g, _ = gain_maps(cfg.gt_int, space)
    return float(F_g.apply_populations(pops).sum())


def limit_predictions(cfg: PumpConfig) -> dict:
    """Analytic Q-parameters for very weak and very strong pumping.

    Keys are ``("low" | "high", "N" | "t")``.  For weak pumping every atom meets
    the thermal field, so counts are binomial in the number of atoms and a
    Poissonian atom number washes the fixed-time values out.  For strong
    pumping at a trapping state every atom leaves excited.  The strong-pumping
    values assume such a trapping state.
    """
    bg = thermal_beta(cfg)
    p = 0.0 if cfg.poisson else cfg.p
    eta_e, eta_g = cfg.eta_e, cfg.eta_g
    out = {}
    out["low", "N"] = QReport(Window.fixed_n(), "limit", q_e=-eta_e * (1 - bg), q_g=-eta_g * bg)
    out["low", "t"] = QReport(Window.fixed_t(), "limit", q_e=-p * eta_e * (1 - bg), q_g=-p * eta_g * bg)
    out["high", "N"] = QReport(Window.fixed_n(), "limit", q_e=-eta_e, q_g=0.0)
    out["high", "t"] = QReport(Window.fixed_t(), "limit", q_e=-p * eta_e, q_g=0.0)
    for rep in out.values():
        rep.extra["beta_g"] = bg
    return out


__all__ = ["SOLVABLE_GT", "is_solvable", "q_closed_form_two_level", "closed_form_report",
           "thermal_beta", "limit_predictions"]
