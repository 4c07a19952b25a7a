"""Mandel Q-parameters of the detected atom counts.

For a window with per-step map ``M`` and counting weight ``B`` (see
:mod:`micromaser.stats.process`), starting in the steady state ``rho``::

    Q = -mu + (2/mu) Tr[B f(M; K) u']

with ``u = B rho``, ``mu = Tr u`` and ``u' = u - mu rho``.  Here
``f(lam; K) = [1 - (1 - lam^K) / (K (1 - lam))] / (1 - lam)`` and ``f(M; inf)
= (1 - M)^{-1}`` on traceless matrices.  For continuous windows ``f(M; K)`` is
replaced by ``[exp(M t) - 1 - M t] / (M^2 t)`` and the ``-mu`` term is
absent, since no two counts share an instant.  The fixed-point component of
``u`` contributes ``(K - 1) mu`` to the first term and cancels against the
mean, which is why only ``u'`` appears.

Every Q is computed at unit efficiency and scaled by ``eta`` afterwards: the
detector thins the counts binomially, which multiplies Q by ``eta`` exactly.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as la

from ..errors import UndefinedStatisticError
from ..fock import FockSpace, mandel_q_populations
from ..maps import default_space, steady_populations
from ..superop import PumpConfig
from .counting import CountDistribution, count_distribution, moments
from .process import CountingProcess, Window, counting_process
from .spectral import decompose

SERIES_SWITCH = 1e-3


@dataclass
class QReport:
    """Q-parameters of one window.

    ``q_e``/``q_g`` are the fixed-N values for an ``N`` window and the
    fixed-time values for a ``t`` window.  ``mean_e``/``mean_g`` are the mean
    detected counts in the window, or per active atom for asymptotic windows.
    """

    window: Window
    method: str
    q_e: Optional[float] = None
    q_g: Optional[float] = None
    mean_e: Optional[float] = None
    mean_g: Optional[float] = None
    q_f: Optional[float] = None
    stderr_e: Optional[float] = None
    stderr_g: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def q(self, which: str) -> Optional[float]:
        return self.q_e if which == "e" else self.q_g

    def mean(self, which: str) -> Optional[float]:
        return self.mean_e if which == "e" else self.mean_g

    def stderr(self, which: str) -> Optional[float]:
        return self.stderr_e if which == "e" else self.stderr_g

    @property
    def tilde(self) -> bool:
        return self.window.kind == "t"


def _deflated_solve(A: np.ndarray, rho: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``A x = rhs`` for traceless ``rhs`` where ``A`` annihilates ``rho``
    and is invertible on traceless vectors; the solution is traceless."""
    return np.linalg.solve(A + np.outer(rho, np.ones(rho.size)), rhs)


def _unit_terms(proc: CountingProcess, which: str):
    rho = proc.rho_ss
    B = proc.B[which]
    u = B @ rho
    mu = float(u.sum())
    if mu <= 0.0:
        raise UndefinedStatisticError(f"no atoms are ever detected in state {which!r}")
    return rho, B, u, mu, u - mu * rho


def _q_unit_direct(proc: CountingProcess, which: str) -> float:
    rho, B, u, mu, up = _unit_terms(proc, which)
    M, dim = proc.M, proc.space.dim
    if proc.continuous:
        x1 = _deflated_solve(M, rho, up)
        if proc.window.asymptotic:
            y = -x1
        else:
            t = proc.duration
            e_up = la.expm(M * t) @ up
            x2 = _deflated_solve(M, rho, e_up - up)
            y = (_deflated_solve(M, rho, x2) - t * x1) / t
        # counts in continuous time carry no self-pair term
        return (2.0 / mu) * float(B.sum(axis=0) @ y)
    A = np.eye(dim) - M
    rhs = up
    if not proc.window.asymptotic:
        K = int(proc.steps)
        r = up - np.linalg.matrix_power(M, K) @ up
        rhs = up - _deflated_solve(A, rho, r) / K
    y = _deflated_solve(A, rho, rhs)
    return -mu + (2.0 / mu) * float(B.sum(axis=0) @ y)


def _f_discrete(lam: np.ndarray, K: float) -> np.ndarray:
    if math.isinf(K):
        return 1.0 / (1.0 - lam)
    K = int(K)
    delta = 1.0 - lam
    out = np.empty_like(lam, dtype=complex)
    small = np.abs(delta) * K < SERIES_SWITCH
    big = ~small
    d = delta[big]
    out[big] = (K * d - 1.0 + lam[big] ** K) / (K * d * d)
    if small.any():
        # (1/K) sum_m (K-1-m) lam^m, summed directly to avoid cancellation
        m = np.arange(K)
        out[small] = ((K - 1 - m)[None, :] * lam[small][:, None] ** m[None, :]).sum(axis=1) / K
    return out


def _g_continuous(mu: np.ndarray, t: float) -> np.ndarray:
    if math.isinf(t):
        return -1.0 / mu
    x = mu * t
    out = np.empty_like(mu, dtype=complex)
    small = np.abs(x) < SERIES_SWITCH
    big = ~small
    out[big] = (np.expm1(x[big]) - x[big]) / (mu[big] ** 2 * t)
    xs = x[small]
    out[small] = t * (0.5 + xs / 6.0 + xs * xs / 24.0 + xs ** 3 / 120.0)
    return out


def _q_unit_spectral(proc: CountingProcess, which: str, decomp=None) -> float:
    sd = decomp or decompose(proc)
    mu = float(sd.c_right[which][0].real)
    if mu <= 0.0:
        raise UndefinedStatisticError(f"no atoms are ever detected in state {which!r}")
    lam = sd.eigenvalues[1:]
    if proc.continuous:
        f = _g_continuous(lam, proc.duration)
    else:
        f = _f_discrete(lam, proc.steps)
    s = np.sum(sd.c_right[which][1:] * sd.c_left[which][1:] * f)
    lead = 0.0 if proc.continuous else -mu
    return lead + (2.0 / mu) * float(s.real)


def _unit_mean(proc: CountingProcess, which: str) -> float:
    mu = float((proc.B[which] @ proc.rho_ss).sum())
    if proc.window.asymptotic:
        # per active atom
        if proc.continuous:
            return mu / proc.cfg.rate
        return mu / proc.cfg.p if proc.window.kind == "t" else mu
    if proc.continuous:
        return mu * proc.duration
    return mu * proc.steps


def _report(cfg, window, space, method, unit_q, which):
    proc = counting_process(cfg, window, space)
    rep = QReport(window, method)
    for nu in which:
        eta = cfg.efficiency(nu)
        q = 0.0 if eta == 0.0 else eta * unit_q(proc, nu)
        mean = eta * _unit_mean(proc, nu)
        setattr(rep, f"q_{nu}", q)
        setattr(rep, f"mean_{nu}", mean)
    rep.q_f = field_q(cfg, proc.space)
    return rep


def q_direct(cfg: PumpConfig, window: Window, which=("e", "g"),
             space: Optional[FockSpace] = None) -> QReport:
    """Q-parameters from linear solves and matrix powers of the one-step map.

    The fixed-point component is handled analytically, the rest through the
    resolvent restricted to traceless matrices; no eigen-decomposition is used.
    """
    return _report(cfg, window, space, "direct", _q_unit_direct, which)


def q_spectral(cfg: PumpConfig, window: Window, which=("e", "g"),
               space: Optional[FockSpace] = None) -> QReport:
    """Q-parameters as a sum over the non-stationary eigenmodes of the one-step map."""
    cache = {}

    def unit(proc, nu):
        if "sd" not in cache:
            cache["sd"] = decompose(proc)
        return _q_unit_spectral(proc, nu, cache["sd"])

    return _report(cfg, window, space, "spectral", unit, which)


def q_from_distribution(dist: CountDistribution, cfg: PumpConfig,
                        space: Optional[FockSpace] = None) -> QReport:
    rep = QReport(dist.window, "distribution")
    for nu in "eg":
        mean, fact2 = dist.moments(nu)
        setattr(rep, f"mean_{nu}", mean)
        setattr(rep, f"q_{nu}", fact2 / mean - mean if mean > 0 else 0.0)
    rep.q_f = field_q(cfg, space)
    return rep


def q_from_moments(cfg: PumpConfig, window: Window, which=("e", "g"),
                   space: Optional[FockSpace] = None) -> QReport:
    """Q-parameters from jointly propagated factorial moments (finite windows)."""
    rep = QReport(window, "moments")
    for nu in which:
        mean, fact2 = moments(window, cfg, nu, space=space)
        setattr(rep, f"mean_{nu}", mean)
        setattr(rep, f"q_{nu}", fact2 / mean - mean if mean > 0 else 0.0)
    rep.q_f = field_q(cfg, space)
    return rep


def q_distribution(cfg: PumpConfig, window: Window, space: Optional[FockSpace] = None,
                   cap: int = 200) -> QReport:
    return q_from_distribution(count_distribution(window, cfg, space=space, cap=cap), cfg, space)


def field_q(cfg: PumpConfig, space: Optional[FockSpace] = None) -> Optional[float]:
    """Mandel Q of the steady cavity field (``None`` if the mean photon number is 0)."""
    from ..maps import MapKind

    space = space or default_space(cfg)
    pops = steady_populations(MapKind.fixed_t(), cfg, space, warn=False)
    try:
        return mandel_q_populations(pops)
    except UndefinedStatisticError:
        return None
