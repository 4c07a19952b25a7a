"""Joint count distributions and factorial moments of detected atoms.

Distributions are obtained exactly by propagating the coefficients of the
bivariate generating polynomial in ``(y, z)``; no numerical differentiation is
involved.  Moments propagate the value and the first two ``z``-derivatives of
the generating map together.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as la
from scipy import stats as sps

from ..errors import WindowError
from ..fock import DensityMatrix, FockSpace
from ..superop import PumpConfig
from .process import CountingProcess, Window, counting_process

DEFAULT_CAP = 200
MAX_UNIFORMIZATION_TERMS = 200_000


@dataclass(frozen=True)
class CountDistribution:
    """``table[a, b]`` is the probability of ``a`` atoms detected excited and ``b``
    detected in the ground state within the window."""

    window: Window
    table: np.ndarray
    truncated_mass: float = 0.0

    @property
    def total(self) -> float:
        return float(self.table.sum())

    @property
    def w_e(self) -> np.ndarray:
        return self.table.sum(axis=1)

    @property
    def w_g(self) -> np.ndarray:
        return self.table.sum(axis=0)

    def marginal(self, which: str) -> np.ndarray:
        return self.w_e if which == "e" else self.w_g

    def moments(self, which: str):
        """``(<N>, <N(N-1)>)`` of the marginal count."""
        w = self.marginal(which)
        n = np.arange(w.size, dtype=float)
        return float(n @ w), float((n * (n - 1)) @ w)

    def mandel_q(self, which: str) -> float:
        mean, fact2 = self.moments(which)
        return fact2 / mean - mean


def _start_populations(proc: CountingProcess, rho_start) -> np.ndarray:
    if rho_start is None:
        return proc.rho_ss.copy()
    if isinstance(rho_start, DensityMatrix):
        if rho_start.space != proc.space:
            raise ValueError("starting state lives on a different Fock space")
        if not rho_start.is_diagonal(1e-12):
            raise ValueError("counting needs a starting state diagonal in the photon number")
        return rho_start.populations
    pops = np.asarray(rho_start, dtype=float)
    if pops.shape != (proc.space.dim,) or abs(pops.sum() - 1.0) > 1e-10 or pops.min() < -1e-10:
        raise ValueError("invalid starting populations")
    return pops


def _shift(c, axis):
    out = np.zeros_like(c)
    if axis == 1:
        out[:, 1:, :] = c[:, :-1, :]
    else:
        out[:, :, 1:] = c[:, :, :-1]
    return out


def count_distribution(window: Window, cfg: PumpConfig, rho_start=None,
                       space: Optional[FockSpace] = None, cap: int = DEFAULT_CAP,
                       tol: float = 1e-13) -> CountDistribution:
    """Joint distribution ``w(N_e, N_g)`` of detected counts in a finite window.

    ``rho_start`` is the field at the window start (at the first active atom for
    fixed-N windows, at a slot boundary for fixed-t windows); by default the
    steady state.  Discrete windows are exact.  In the Poisson fixed-t window
    the number of atoms is unbounded; counts are then kept up to ``cap`` and
    the neglected probability is reported as ``truncated_mass``.
    """
    if window.asymptotic:
        raise WindowError("count distributions need a finite window")
    proc = counting_process(cfg, window, space)
    pops = _start_populations(proc, rho_start)
    Be, Bg = proc.weight("e"), proc.weight("g")
    M0 = proc.M - Be - Bg
    if not proc.continuous:
        K = int(proc.steps)
        if K > cap:
            raise WindowError(f"window holds {K} steps, above the cap {cap}")
        c = np.zeros((proc.space.dim, K + 1, K + 1))
        c[:, 0, 0] = pops
        for _ in range(K):
            c = (np.tensordot(M0, c, axes=1) + np.tensordot(Be, _shift(c, 1), axes=1)
                 + np.tensordot(Bg, _shift(c, 2), axes=1))
        return CountDistribution(window, c.sum(axis=0))
    return _poisson_distribution(proc, pops, M0, Be, Bg, cap, tol)


def _apply(P, c):
    return (P @ c.reshape(c.shape[0], -1)).reshape(P.shape[0], *c.shape[1:])


def _poisson_distribution(proc, pops, M0, Be, Bg, cap, tol):
    # uniformization: exp(X t) = sum_k Pois(k; nu t) (1 + X/nu)^k
    t = proc.duration
    nu = max(float(-np.diag(M0).min()), 1e-300)
    lam = nu * t
    kmax = int(lam + 12.0 * np.sqrt(lam) + 40.0)
    while sps.poisson.logsf(kmax, lam) > -40.0:
        kmax += int(np.sqrt(lam)) + 10
    if kmax > MAX_UNIFORMIZATION_TERMS:
        raise WindowError(f"window too long for exact counting ({kmax} uniformization terms)")
    P0 = np.eye(proc.space.dim) + M0 / nu
    Pe, Pg = Be / nu, Bg / nu
    weights = sps.poisson.pmf(np.arange(kmax + 1), lam)
    dim = proc.space.dim
    size = min(cap, kmax) + 1
    acc = np.zeros((dim, size, size))
    c = np.zeros((dim, 1, 1))
    c[:, 0, 0] = pops
    acc[:, 0, 0] = weights[0] * pops
    for k in range(1, kmax + 1):
        # after k jumps no count exceeds k, so the table grows one row at a time
        n = min(k, cap) + 1
        new = np.zeros((dim, n, n))
        m = c.shape[1]
        new[:, :m, :m] = _apply(P0, c)
        new[:, 1:m + 1, :m] += _apply(Pe, c[:, :n - 1, :])
        new[:, :m, 1:m + 1] += _apply(Pg, c[:, :, :n - 1])
        c = new
        acc[:, :n, :n] += weights[k] * c
    table = acc.sum(axis=0)
    a, b = np.indices(table.shape)
    table[a + b > cap] = 0.0
    lost = max(0.0, 1.0 - table.sum())
    if lost > tol:
        raise WindowError(
            f"count cap {cap} truncates {lost:.3g} of the probability; raise the cap"
        )
    return CountDistribution(proc.window, table, lost)


def moments(window: Window, cfg: PumpConfig, which: str, rho_start=None,
            space: Optional[FockSpace] = None):
    """``(<N>, <N(N-1)>)`` for atoms detected in state ``which`` in a finite window.

    The state and its first two derivatives with respect to the counting
    variable are propagated jointly: one step maps ``(v0, v1, v2)`` to
    ``(M v0, M v1 + B v0, M v2 + 2 B v1)``.
    """
    if window.asymptotic:
        raise WindowError("moments need a finite window")
    proc = counting_process(cfg, window, space)
    pops = _start_populations(proc, rho_start)
    B = proc.weight(which)
    M = proc.M
    d = proc.space.dim
    Z = np.zeros((d, d))
    big = np.block([[M, Z, Z], [B, M, Z], [Z, 2 * B, M]])
    if proc.continuous:
        prop = la.expm(big * proc.duration)
    else:
        prop = np.linalg.matrix_power(big, int(proc.steps))
    v = prop[:, :d] @ pops
    return float(v[d:2 * d].sum()), float(v[2 * d:].sum())

