"""Superoperators of the stroboscopic micromaser theory.

Every map is stored twice: as a ``dim**2 x dim**2`` matrix acting on row-major
vectorized density matrices (built lazily, since it is large), and, for maps
that send diagonal matrices to diagonal matrices, as a ``dim x dim`` matrix
acting on the photon-number populations.  All statistics only ever need the
population block; the full matrices exist for coherences and for checking.
"""

import math
from dataclasses import dataclass, replace
from functools import cached_property, lru_cache

import numpy as np
import scipy.linalg as la

from .errors import SingularMapError
from .fock import DensityMatrix, FockSpace


def vec(rho) -> np.ndarray:
    return np.asarray(rho, dtype=complex).reshape(-1)


def unvec(v, dim: int) -> np.ndarray:
    return np.asarray(v).reshape(dim, dim)


def sandwich(left, right) -> np.ndarray:
    """Matrix of ``rho -> left @ rho @ right`` in the row-major vectorization."""
    return np.kron(left, np.asarray(right).T)


class Superoperator:
    """Linear map on density matrices of a fixed :class:`FockSpace`.

    Parameters
    ----------
    space : FockSpace
    diagonal : ndarray or None
        Real ``dim x dim`` action on the population vector.  ``None`` for maps
        that do not preserve diagonality.
    matrix : ndarray or callable, optional
        Full ``dim**2 x dim**2`` matrix, or a zero-argument callable producing it.
    trace_preserving : bool
        Informational flag used by tests and sanity checks.
    """

    def __init__(self, space: FockSpace, diagonal=None, matrix=None,
                 trace_preserving=False, name=""):
        self.space = space
        if diagonal is not None:
            diagonal = np.array(diagonal, dtype=float)
            diagonal.setflags(write=False)
        self.diagonal = diagonal
        self._matrix_src = matrix
        self.trace_preserving = bool(trace_preserving)
        self.name = name

    def __repr__(self):
        tag = self.name or "Superoperator"
        return f"<{tag} dim={self.space.dim}>"

    @cached_property
    def matrix(self) -> np.ndarray:
        src = self._matrix_src
        m = src() if callable(src) else src
        if m is None:
            raise ValueError(f"{self!r} has no full matrix representation")
        m = np.array(m, dtype=complex)
        m.setflags(write=False)
        self._matrix_src = None
        return m

    @property
    def preserves_diagonal(self) -> bool:
        return self.diagonal is not None

    def apply(self, rho) -> np.ndarray:
        """Apply to a density matrix (or any ``dim x dim`` array)."""
        arr = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
        dim = self.space.dim
        if self.diagonal is not None:
            off = arr - np.diag(arr.diagonal())
            if not np.any(off):
                return np.diag(self.diagonal @ arr.diagonal()).astype(complex)
        return unvec(self.matrix @ vec(arr), dim)

    def apply_populations(self, pops) -> np.ndarray:
        if self.diagonal is None:
            raise ValueError(f"{self!r} does not preserve diagonality")
        return self.diagonal @ np.asarray(pops)

    __call__ = apply

    # algebra; the full matrix of a result is only formed on demand
    def _combine(self, other, dfun, mfun, name):
        if not isinstance(other, Superoperator):
            return NotImplemented
        if other.space != self.space:
            raise ValueError("superoperators act on different spaces")
        diag = None
        if self.diagonal is not None and other.diagonal is not None:
            diag = dfun(self.diagonal, other.diagonal)
        return Superoperator(self.space, diag, lambda: mfun(self.matrix, other.matrix), name=name)

    def __matmul__(self, other):
        out = self._combine(other, np.matmul, np.matmul, "product")
        if out is not NotImplemented:
            out.trace_preserving = self.trace_preserving and other.trace_preserving
        return out

    def __add__(self, other):
        return self._combine(other, np.add, np.add, "sum")

    def __sub__(self, other):
        return self._combine(other, np.subtract, np.subtract, "difference")

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        diag = None if self.diagonal is None else scalar * self.diagonal
        return Superoperator(self.space, diag, lambda: scalar * self.matrix, name="scaled")

    __rmul__ = __mul__

    def __neg__(self):
        return -1.0 * self

    def power(self, k: int) -> "Superoperator":
        diag = None if self.diagonal is None else np.linalg.matrix_power(self.diagonal, k)
        out = Superoperator(self.space, diag, lambda: np.linalg.matrix_power(self.matrix, k),
                            trace_preserving=self.trace_preserving, name=f"power{k}")
        return out

    def exp(self, t: float = 1.0) -> "Superoperator":
        diag = None if self.diagonal is None else la.expm(t * self.diagonal)
        return Superoperator(self.space, diag, lambda: la.expm(t * self.matrix), name="exp")

    def inverse(self) -> "Superoperator":
        diag = None if self.diagonal is None else np.linalg.inv(self.diagonal)
        return Superoperator(self.space, diag, lambda: np.linalg.inv(self.matrix), name="inverse")

    def is_close(self, other: "Superoperator", atol=1e-12, full=False) -> bool:
        if full or self.diagonal is None or other.diagonal is None:
            return bool(np.allclose(self.matrix, other.matrix, rtol=0, atol=atol))
        return bool(np.allclose(self.diagonal, other.diagonal, rtol=0, atol=atol))


def identity_map(space: FockSpace) -> Superoperator:
    d = space.dim
    return Superoperator(space, np.eye(d), lambda: np.eye(d * d), trace_preserving=True,
                         name="identity")


def zero_map(space: FockSpace) -> Superoperator:
    d = space.dim
    return Superoperator(space, np.zeros((d, d)), lambda: np.zeros((d * d, d * d)), name="zero")


@dataclass(frozen=True)
class PumpConfig:
    """Pumping statistics, cavity parameters and detector efficiencies.

    Time is measured in the same units as ``1/kappa``; the defaults put the
    cavity lifetime ``T_c = 1/(2 kappa)`` at one time unit.  ``p = 0`` selects
    continuous-time Poisson pumping at rate ``R = 2 kappa nex``; for ``p > 0``
    atoms arrive on a grid of spacing ``T = p/R`` and each is excited with
    probability ``p``.
    """

    gt_int: float
    nex: float
    nbar: float = 0.0
    p: float = 0.0
    kappa: float = 0.5
    eta_e: float = 1.0
    eta_g: float = 1.0

    def __post_init__(self):
        for name in ("gt_int", "nex", "nbar", "p", "kappa", "eta_e", "eta_g"):
            val = getattr(self, name)
            if not math.isfinite(val):
                raise ValueError(f"{name} must be finite, got {val!r}")
        if self.gt_int < 0:
            raise ValueError("gt_int must be non-negative")
        if self.nbar < 0:
            raise ValueError("nbar must be non-negative")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.nex < 0:
            raise ValueError("nex must be non-negative")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p!r}")
        if self.p > 0 and self.nex == 0:
            raise ValueError("binomial pumping (p > 0) needs nex > 0")
        for name in ("eta_e", "eta_g"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    @property
    def rate(self) -> float:
        """Mean rate R of active (excited) atoms."""
        return 2.0 * self.kappa * self.nex

    @property
    def cavity_time(self) -> float:
        return 1.0 / (2.0 * self.kappa)

    @property
    def poisson(self) -> bool:
        return self.p == 0.0

    @property
    def slot(self) -> float:
        """Spacing T = p/R of the binomial arrival grid (0 in Poisson mode)."""
        return 0.0 if self.poisson else self.p / self.rate

    @property
    def decay_per_slot(self) -> float:
        """``d = exp(-p/N_ex)``, the decay of |1><1| over one slot at nbar = 0."""
        return math.exp(-2.0 * self.kappa * self.slot)

    def efficiency(self, which: str) -> float:
        return {"e": self.eta_e, "g": self.eta_g}[which]

    def replace(self, **changes) -> "PumpConfig":
        return replace(self, **changes)


def _loss_gain_matrices(space):
    a, ad = space.a, space.adag
    return a, ad, ad @ a, a @ ad


def lindblad(cfg: PumpConfig, space: FockSpace) -> Superoperator:
    """Thermal damping generator L of the cavity mode.

    The population block is the birth-death chain with death rate
    ``2 kappa (nbar + 1) n`` and birth rate ``2 kappa nbar (n + 1)`` (zero from
    the top level, so the truncated chain stays trace preserving).
    """
    kappa, nbar = cfg.kappa, cfg.nbar
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    n = space.numbers
    death = 2 * kappa * (nbar + 1) * n
    birth = 2 * kappa * nbar * (n + 1)
    birth[-1] = 0.0
    diag = np.diag(-(death + birth)) + np.diag(death[1:], k=1) + np.diag(birth[:-1], k=-1)

    def build():
        a, ad, nop, aad = _loss_gain_matrices(space)
        eye = space.identity()
        down = 2 * sandwich(a, ad) - sandwich(nop, eye) - sandwich(eye, nop)
        up = 2 * sandwich(ad, a) - sandwich(aad, eye) - sandwich(eye, aad)
        return kappa * ((nbar + 1) * down + nbar * up)

    return Superoperator(space, diag, build, name="L")


def damping_propagator(L: Superoperator, tau: float) -> Superoperator:
    """``D(tau) = exp(L tau)``."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    out = L.exp(tau)
    out.trace_preserving = True
    out.name = "D"
    return out


def rabi_factors(gt_int: float, space: FockSpace):
    """Return ``(cos, sin)`` of ``gt_int*sqrt(n+1)`` for n = 0..n_max.

    The top level has no partner |n_max+1> in the truncated space; its
    transfer amplitude is set to zero so that ``F_e + F_g`` stays trace
    preserving.
    """
    theta = gt_int * np.sqrt(space.numbers + 1.0)
    c, s = np.cos(theta), np.sin(theta)
    c[-1], s[-1] = 1.0, 0.0
    return c, s


def beta(m, gt_int: float):
    """Probability ``sin^2(gt_int sqrt(m))`` that an excited atom meeting m-1 photons
    leaves in the ground state."""
    return np.sin(gt_int * np.sqrt(m)) ** 2


def gain_maps(gt_int: float, space: FockSpace):
    """Return ``(F_e, F_g, F_eg)`` for one excited atom crossing the cavity."""
    if gt_int < 0:
        raise ValueError("gt_int must be non-negative")
    c, s = rabi_factors(gt_int, space)
    k_e = np.diag(c).astype(complex)
    k_g = np.diag(s[:-1], k=-1).astype(complex)
    fe_diag = np.diag(c * c)
    fg_diag = np.diag((s * s)[:-1], k=-1)
    f_e = Superoperator(space, fe_diag, lambda: sandwich(k_e, k_e), name="F_e")
    f_g = Superoperator(space, fg_diag, lambda: sandwich(k_g, k_g.conj().T), name="F_g")
    f_eg = Superoperator(space, None, lambda: 1j * sandwich(k_e, k_g.conj().T), name="F_eg")
    return f_e, f_g, f_eg


def detection_maps(F_e: Superoperator, F_g: Superoperator, eta_e: float, eta_g: float):
    """Return ``(F_ed, F_gd, F_nd)`` for detectors of efficiency ``eta_e``, ``eta_g``."""
    for eta in (eta_e, eta_g):
        if not 0.0 <= eta <= 1.0:
            raise ValueError(f"detector efficiency {eta!r} outside [0, 1]")
    f_ed = eta_e * F_e
    f_gd = eta_g * F_g
    f_nd = (1.0 - eta_e) * F_e + (1.0 - eta_g) * F_g
    return f_ed, f_gd, f_nd


def dp_resolvent(x: float, cfg: PumpConfig, L: Superoperator) -> Superoperator:
    """``[1 - x (1-p) exp(L T)]^{-1}``, the summed geometric waiting between atoms."""
    space = L.space
    q = x * (1.0 - cfg.p)
    if q == 0.0:
        return identity_map(space)
    # exp(LT) is trace preserving, so its spectral radius is exactly 1
    if abs(q) >= 1.0:
        raise SingularMapError(
            f"geometric series diverges: |x (1-p)| = {abs(q):.6g} >= 1 (p={cfg.p})"
        )
    E = damping_propagator(L, cfg.slot)
    d = space.dim
    diag = np.linalg.solve(np.eye(d) - q * E.diagonal, np.eye(d))
    return Superoperator(space, diag, lambda: np.linalg.inv(np.eye(d * d) - q * E.matrix),
                         name="D_p")


def composite_maps(cfg: PumpConfig, L: Superoperator, F_0: Superoperator):
    """Return ``(Lambda_p, Lambda_tilde_p, F_tilde_0)``.

    ``Lambda_p = p D_p(1) exp(LT)`` carries the field from one active atom to
    the next, ``Lambda_tilde_p = exp(LT)`` is one slot of damping and
    ``F_tilde_0 = 1 - p + p F_0`` is one slot's possible gain.  In Poisson
    mode (``p = 0``) the limits ``(1 - L/R)^{-1}``, identity and identity are
    returned; the fixed-time dynamics then has no slot structure and is
    handled through :func:`micromaser.maps.poisson_generator`.
    """
    space = L.space
    eye = identity_map(space)
    if cfg.poisson:
        if cfg.rate <= 0:
            raise SingularMapError("Poisson pumping with R = 0 has no active atoms")
        lam = (eye - (1.0 / cfg.rate) * L).inverse()
        lam.trace_preserving = True
        lam.name = "Lambda_p"
        return lam, eye, eye
    E = damping_propagator(L, cfg.slot)
    lam = dp_resolvent(1.0, cfg, L) @ (cfg.p * E)
    lam.trace_preserving = True
    lam.name = "Lambda_p"
    f0t = (1.0 - cfg.p) * eye + cfg.p * F_0
    f0t.trace_preserving = True
    f0t.name = "F_tilde_0"
    return lam, E, f0t


class MaserOperators:
    """All superoperators for one configuration on one truncated space.

    Members are computed on first access and then shared; the object is
    effectively immutable and can be read from several threads.
    """

    def __init__(self, cfg: PumpConfig, space: FockSpace):
        self.cfg = cfg
        self.space = space

    @cached_property
    def L(self):
        return lindblad(self.cfg, self.space)

    @cached_property
    def _gain(self):
        return gain_maps(self.cfg.gt_int, self.space)

    @property
    def F_e(self):
        return self._gain[0]

    @property
    def F_g(self):
        return self._gain[1]

    @property
    def F_eg(self):
        return self._gain[2]

    @cached_property
    def F_0(self):
        f0 = self.F_e + self.F_g
        f0.trace_preserving = True
        f0.name = "F_0"
        return f0

    def F(self, which: str) -> Superoperator:
        return {"e": self.F_e, "g": self.F_g}[which]

    @cached_property
    def detection(self):
        return detection_maps(self.F_e, self.F_g, self.cfg.eta_e, self.cfg.eta_g)

    @cached_property
    def composites(self):
        return composite_maps(self.cfg, self.L, self.F_0)

    @property
    def Lambda(self):
        return self.composites[0]

    @property
    def Lambda_tilde(self):
        return self.composites[1]

    @property
    def F0_tilde(self):
        return self.composites[2]

    @cached_property
    def generator(self):
        """Continuous-time generator ``L + R (F_0 - 1)``."""
        g = self.L + self.cfg.rate * (self.F_0 - identity_map(self.space))
        g.name = "G"
        return g


@lru_cache(maxsize=256)
def operators(cfg: PumpConfig, space: FockSpace) -> MaserOperators:
    return MaserOperators(cfg, space)
