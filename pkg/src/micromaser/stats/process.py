"""Counting windows and the per-step maps that generate atom counts in them."""

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from ..errors import RoundingWarning, WindowError
from ..fock import FockSpace
from ..maps import MapKind, default_space, steady_populations
from ..superop import PumpConfig, operators

SLOT_ROUNDING_TOL = 1e-6


@dataclass(frozen=True)
class Window:
    """A counting window: a fixed number of active atoms or a fixed duration.

    ``size`` may be ``math.inf`` for the asymptotic window.  Durations are in
    the time units of :class:`PumpConfig` (cavity lifetimes by default).
    """

    kind: str
    size: float

    def __post_init__(self):
        if self.kind not in ("N", "t"):
            raise WindowError(f"window kind must be 'N' or 't', got {self.kind!r}")
        if not self.size > 0:
            raise WindowError(f"window size must be positive, got {self.size!r}")
        if self.kind == "N" and math.isfinite(self.size) and int(self.size) != self.size:
            raise WindowError("a fixed-N window needs an integer number of atoms")

    @classmethod
    def fixed_n(cls, n=math.inf):
        return cls("N", float(n))

    @classmethod
    def fixed_t(cls, t=math.inf):
        return cls("t", float(t))

    @property
    def asymptotic(self) -> bool:
        return math.isinf(self.size)

    @property
    def label(self) -> str:
        size = "inf" if self.asymptotic else f"{self.size:g}"
        return f"{self.kind}={size}"

    def map_kind(self) -> MapKind:
        return MapKind.fixed_N() if self.kind == "N" else MapKind.fixed_t()


@dataclass(frozen=True)
class CountingProcess:
    """Population-block maps generating counts for one window.

    The count generating function is ``Tr[(M + (y-1) B_e + (z-1) B_g)^K rho]``
    for discrete windows and ``Tr[exp((M + (y-1) B_e + (z-1) B_g) t) rho]`` for
    the continuous (Poisson, fixed-t) window, where ``M`` is then a generator.
    ``B_e``, ``B_g`` are built at unit efficiency; ``eta`` holds the
    efficiencies, which enter every count as a thinning.
    """

    cfg: PumpConfig
    window: Window
    space: FockSpace
    continuous: bool
    M: np.ndarray
    B: dict
    steps: float
    rho_ss: np.ndarray

    @property
    def duration(self) -> float:
        return self.window.size

    def weight(self, which: str) -> np.ndarray:
        """``B_nu`` including the detector efficiency."""
        return self.cfg.efficiency(which) * self.B[which]


def window_steps(cfg: PumpConfig, window: Window) -> float:
    """Number of discrete steps K for the window (``inf`` for asymptotic)."""
    if window.kind == "N" or window.asymptotic:
        return window.size
    if cfg.poisson:
        raise WindowError("Poisson fixed-t windows have no discrete step count")
    exact = cfg.rate * window.size / cfg.p
    k = round(exact)
    if abs(exact - k) > SLOT_ROUNDING_TOL:
        warnings.warn(f"R t / p = {exact:.9g} rounded to {k} slots", RoundingWarning, stacklevel=3)
    if k < 1:
        raise WindowError(f"window t={window.size} holds no complete slot")
    return float(k)


@lru_cache(maxsize=512)
def _process(cfg: PumpConfig, window: Window, space: FockSpace) -> CountingProcess:
    ops = operators(cfg.replace(eta_e=1.0, eta_g=1.0), space)
    rho_ss = np.array(steady_populations(window.map_kind(), cfg, space))
    if window.kind == "N":
        lam = ops.Lambda.diagonal
        M = lam @ ops.F_0.diagonal
        B = {w: lam @ ops.F(w).diagonal for w in "eg"}
        return CountingProcess(cfg, window, space, False, M, B, window.size, rho_ss)
    if cfg.poisson:
        M = ops.generator.diagonal
        B = {w: cfg.rate * ops.F(w).diagonal for w in "eg"}
        return CountingProcess(cfg, window, space, True, M, B, math.nan, rho_ss)
    E = ops.Lambda_tilde.diagonal
    M = E @ ops.F0_tilde.diagonal
    B = {w: cfg.p * E @ ops.F(w).diagonal for w in "eg"}
    return CountingProcess(cfg, window, space, False, M, B, window_steps(cfg, window), rho_ss)


def counting_process(cfg: PumpConfig, window: Window,
                     space: Optional[FockSpace] = None) -> CountingProcess:
    space = space or default_space(cfg)
    return _process(cfg, window, space)
