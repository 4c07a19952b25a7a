"""Stroboscopic field maps, detection-conditioned updates and steady states."""

import enum
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .errors import AmbiguousSteadyStateError, ImpossibleOutcomeError, TruncationWarning
from .fock import DensityMatrix, FockSpace, make_space, thermal_populations
from .superop import (
    PumpConfig,
    Superoperator,
    damping_propagator,
    dp_resolvent,
    identity_map,
    operators,
)

UNIT_EIGENVALUE_TOL = 1e-9
DEGENERACY_GAP = 1e-8
BOUNDARY_MASS_TOL = 1e-10
IMPOSSIBLE_PROB = 1e-300


class DetectionOutcome(str, enum.Enum):
    """What the detector reports for one exiting atom."""

    EXCITED = "e"
    GROUND = "g"
    NONE = "n"


def _outcome(label) -> DetectionOutcome:
    return label if isinstance(label, DetectionOutcome) else DetectionOutcome(label)


@dataclass(frozen=True)
class MapKind:
    """Which ensemble-averaged one-step map to use.

    ``regular`` needs the atom spacing ``tau``; ``poisson_fixed_t`` uses
    ``tau`` as the step duration (default: the mean atom spacing ``1/R``).
    """

    name: str
    tau: Optional[float] = None

    NAMES = ("regular", "fixed_t", "fixed_N", "poisson_fixed_t", "poisson_fixed_N")

    def __post_init__(self):
        if self.name not in self.NAMES:
            raise ValueError(f"unknown map kind {self.name!r}")
        if self.name == "regular" and (self.tau is None or self.tau <= 0):
            raise ValueError("regular pumping needs a positive spacing tau")
        if self.tau is not None and self.tau <= 0:
            raise ValueError("tau must be positive")

    @classmethod
    def regular(cls, tau):
        return cls("regular", float(tau))

    @classmethod
    def fixed_t(cls):
        return cls("fixed_t")

    @classmethod
    def fixed_N(cls):
        return cls("fixed_N")

    @classmethod
    def poisson_fixed_t(cls, tau=None):
        return cls("poisson_fixed_t", tau)

    @classmethod
    def poisson_fixed_N(cls):
        return cls("poisson_fixed_N")

    def resolve(self, cfg: PumpConfig) -> "MapKind":
        """Map the binomial kinds onto their Poisson limits when ``cfg.p == 0``."""
        if cfg.poisson and self.name in ("fixed_t", "fixed_N"):
            return MapKind("poisson_" + self.name, self.tau)
        return self

    @property
    def continuous(self) -> bool:
        return self.name == "poisson_fixed_t"


def poisson_generator(cfg: PumpConfig, space: FockSpace) -> Superoperator:
    """Generator ``L + R(F_0 - 1)`` of the fixed-time field dynamics under Poisson pumping."""
    return operators(cfg, space).generator


def one_step_map(kind: MapKind, cfg: PumpConfig, space: FockSpace) -> Superoperator:
    """The ensemble-averaged map advancing the field by one step of ``kind``."""
    kind = kind.resolve(cfg)
    ops = operators(cfg, space)
    if kind.name == "regular":
        return damping_propagator(ops.L, kind.tau) @ ops.F_0
    if kind.name == "fixed_t":
        return ops.Lambda_tilde @ ops.F0_tilde
    if kind.name == "fixed_N":
        return ops.Lambda @ ops.F_0
    if kind.name == "poisson_fixed_N":
        if cfg.rate <= 0:
            raise ValueError("poisson_fixed_N needs R > 0")
        lam = (identity_map(space) - (1.0 / cfg.rate) * ops.L).inverse()
        return lam @ ops.F_0
    tau = kind.tau if kind.tau is not None else 1.0 / cfg.rate
    return ops.generator.exp(tau)


def step(rho: DensityMatrix, kind: MapKind, cfg: PumpConfig) -> DensityMatrix:
    """Apply one step of the ensemble-averaged map to ``rho``."""
    out = one_step_map(kind, cfg, rho.space).apply(rho)
    out = 0.5 * (out + out.conj().T)
    return DensityMatrix(out, rho.space)


def conditional_update(rho: DensityMatrix, outcome, tau: float, cfg: PumpConfig):
    """Field state at the next entry given one atom's detection outcome.

    Returns ``(rho_next, prob)`` where ``prob = Tr[F_{nu,d} rho]`` and
    ``rho_next = D(tau) F_{nu,d} rho / prob``.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    ops = operators(cfg, rho.space)
    fmap = dict(zip("egn", ops.detection))[_outcome(outcome).value]
    after = fmap.apply(rho)
    prob = float(after.trace().real)
    if prob < IMPOSSIBLE_PROB:
        raise ImpossibleOutcomeError(f"outcome {_outcome(outcome).value!r} has probability {prob:.3g}")
    nxt = damping_propagator(ops.L, tau).apply(after) / prob
    nxt = 0.5 * (nxt + nxt.conj().T)
    return DensityMatrix(nxt, rho.space), prob


def outcome_probabilities(rho: DensityMatrix, cfg: PumpConfig) -> dict:
    ops = operators(cfg, rho.space)
    return {
        lab: float(f.apply(rho).trace().real)
        for lab, f in zip("egn", ops.detection)
    }


def sequence_probability(outcomes: Sequence, rho: DensityMatrix, taus: Sequence[float],
                         cfg: PumpConfig) -> float:
    """Joint probability of the detection record ``outcomes`` for atoms entering at
    spacings ``taus`` (one fewer than the number of atoms)."""
    outcomes = [_outcome(o).value for o in outcomes]
    if len(taus) != max(len(outcomes) - 1, 0):
        raise ValueError("need exactly len(outcomes) - 1 spacings")
    ops = operators(cfg, rho.space)
    fmaps = dict(zip("egn", ops.detection))
    v = rho.entries
    for i, lab in enumerate(outcomes):
        v = fmaps[lab].apply(v)
        if i < len(taus):
            v = damping_propagator(ops.L, taus[i]).apply(v)
    return float(v.trace().real)


def binomial_sequence_probability(outcomes: Sequence, n_slots: int, rho0: DensityMatrix,
                                  cfg: PumpConfig) -> float:
    """Probability that exactly ``len(outcomes)`` active atoms arrive within
    ``n_slots`` slots of binomial pumping and are detected as ``outcomes``.

    All arrival patterns are summed by recursion over slots: within a slot the
    atom (if any) interacts first, then the field damps for one slot.  The
    damping after the last atom therefore spans ``(K - k_N + 1)`` slots; this
    does not affect the trace.
    """
    if cfg.poisson:
        raise ValueError("binomial sequences need p > 0")
    outcomes = [_outcome(o).value for o in outcomes]
    n = len(outcomes)
    if n > n_slots:
        return 0.0
    ops = operators(cfg, rho0.space)
    fmaps = dict(zip("egn", ops.detection))
    E = ops.Lambda_tilde
    p = cfg.p
    dim = rho0.space.dim
    layers = [rho0.entries.astype(complex)] + [np.zeros((dim, dim), complex) for _ in range(n)]
    for _ in range(n_slots):
        new = [(1 - p) * layers[0]]
        for j in range(1, n + 1):
            new.append((1 - p) * layers[j] + p * fmaps[outcomes[j - 1]].apply(layers[j - 1]))
        layers = [E.apply(v) for v in new]
    return float(layers[n].trace().real)


def first_entry_state(rho0: DensityMatrix, cfg: PumpConfig) -> DensityMatrix:
    """Field at the entry of the first active atom, ``p D_p(1) rho0``, starting
    from ``rho0`` at a slot boundary.  Normalized to unit trace."""
    ops = operators(cfg, rho0.space)
    if cfg.poisson:
        lam = (identity_map(rho0.space) - (1.0 / cfg.rate) * ops.L).inverse()
        out = lam.apply(rho0)
    else:
        out = cfg.p * dp_resolvent(1.0, cfg, ops.L).apply(rho0)
    return DensityMatrix(0.5 * (out + out.conj().T), rho0.space)


def fixed_n_sequence_probability(outcomes: Sequence, rho_first: DensityMatrix,
                                 cfg: PumpConfig) -> float:
    """Probability of the records of the first ``len(outcomes)`` active atoms,
    irrespective of time, with ``rho_first`` the field at the first entry."""
    outcomes = [_outcome(o).value for o in outcomes]
    ops = operators(cfg, rho_first.space)
    fmaps = dict(zip("egn", ops.detection))
    v = rho_first.entries
    for lab in outcomes:
        v = ops.Lambda.apply(fmaps[lab].apply(v))
    return float(v.trace().real)


# steady states ----------------------------------------------------------------

def _null_vector(A: np.ndarray) -> np.ndarray:
    """Solve ``A v = 0`` with ``sum(v) = 1`` (one row traded for the trace)."""
    dim = A.shape[0]
    lhs = A.copy()
    lhs[0, :] = 1.0
    rhs = np.zeros(dim)
    rhs[0] = 1.0
    return np.linalg.solve(lhs, rhs)


def _steady_populations(kind: MapKind, cfg: PumpConfig, space: FockSpace) -> np.ndarray:
    kind = kind.resolve(cfg)
    if kind.continuous:
        G = poisson_generator(cfg, space).diagonal
        eig = np.linalg.eigvals(G)
        scale = max(1.0, np.abs(np.diag(G)).max())
        order = np.argsort(np.abs(eig))
        dist = np.abs(eig[order]) / scale
        A = G
    else:
        M = one_step_map(kind, cfg, space).diagonal
        eig = np.linalg.eigvals(M)
        order = np.argsort(np.abs(eig - 1.0))
        dist = np.abs(eig[order] - 1.0)
        A = M - np.eye(space.dim)
    if dist[0] > UNIT_EIGENVALUE_TOL:
        raise AmbiguousSteadyStateError(
            f"no eigenvalue within {UNIT_EIGENVALUE_TOL} of the fixed point "
            f"(closest {eig[order[0]]!r})", eig[order[:1]])
    if len(dist) > 1 and dist[1] < DEGENERACY_GAP:
        raise AmbiguousSteadyStateError(
            f"fixed point is not isolated: eigenvalues {eig[order[0]]!r} and {eig[order[1]]!r}",
            eig[order[:2]])
    pops = _null_vector(A)
    return pops / pops.sum()


def _cache_key(cfg: PumpConfig) -> PumpConfig:
    # the averaged field dynamics never depends on detector efficiencies
    return cfg.replace(eta_e=1.0, eta_g=1.0)


@lru_cache(maxsize=1024)
def _steady_cached(kind: MapKind, cfg: PumpConfig, space: FockSpace) -> np.ndarray:
    pops = _steady_populations(kind, cfg, space)
    pops.setflags(write=False)
    return pops


def steady_populations(kind: MapKind, cfg: PumpConfig, space: Optional[FockSpace] = None,
                       warn: bool = True) -> np.ndarray:
    space = space or default_space(cfg)
    pops = _steady_cached(kind.resolve(cfg), _cache_key(cfg), space)
    if warn and pops[-1] > BOUNDARY_MASS_TOL and _leaks_upward(cfg, space):
        warnings.warn(
            f"steady state puts {pops[-1]:.3g} on |n_max={space.n_max}>; enlarge the space",
            TruncationWarning,
            stacklevel=2,
        )
    return pops


def _leaks_upward(cfg: PumpConfig, space: FockSpace) -> bool:
    # the untruncated dynamics can leave |n_max> upwards only by a thermal
    # photon or by emission of an atom (zero exactly at a trapping state)
    emission = np.sin(cfg.gt_int * math.sqrt(space.n_max + 1.0)) ** 2
    return cfg.nbar > 0 or (emission > 1e-24 and cfg.rate > 0)


def steady_state(kind: MapKind, cfg: PumpConfig, space: Optional[FockSpace] = None) -> DensityMatrix:
    """Fixed point of the one-step map of ``kind``.

    Solved on the population block, which contains the steady state since all
    maps preserve diagonality.  Raises :class:`AmbiguousSteadyStateError` if a
    second eigenvalue lies within ``1e-8`` of the fixed point.
    """
    space = space or default_space(cfg)
    pops = steady_populations(kind, cfg, space)
    return DensityMatrix.from_populations(pops, space)


# truncation -------------------------------------------------------------------

def trapping_photon_number(gt_int: float, n_cap: int = 400, tol: float = 1e-12) -> Optional[int]:
    """Lowest n with ``sin(gt_int sqrt(n+1)) = 0``, i.e. an excited atom meeting
    n photons cannot emit; ``None`` if there is none up to ``n_cap``."""
    n = np.arange(n_cap + 1)
    hits = np.flatnonzero(np.abs(np.sin(gt_int * np.sqrt(n + 1.0))) < tol)
    return int(hits[0]) if hits.size else None


@lru_cache(maxsize=1024)
def _default_n_max(cfg: PumpConfig, tol: float, n_cap: int) -> int:
    if cfg.nbar == 0:
        nq = trapping_photon_number(cfg.gt_int, n_cap)
        if nq is not None:
            return max(nq, 1)
    n_max = 16
    if cfg.nbar > 0:
        ratio = cfg.nbar / (1.0 + cfg.nbar)
        n_max = max(n_max, int(math.ceil(math.log(tol) / math.log(ratio))))
    n_max = min(n_max, n_cap)
    kind = MapKind.fixed_t()
    while True:
        space = make_space(n_max)
        pops = _steady_cached(kind.resolve(cfg), _cache_key(cfg), space)
        if pops[-2:].sum() < tol:
            return n_max
        if n_max >= n_cap:
            warnings.warn(
                f"truncation cap n_max={n_cap} reached with boundary mass {pops[-2:].sum():.3g}",
                TruncationWarning,
                stacklevel=3,
            )
            return n_max
        n_max = min(n_cap, int(math.ceil(1.5 * n_max)))


def default_space(cfg: PumpConfig, tol: float = 1e-12, n_cap: int = 400) -> FockSpace:
    """Smallest convenient truncation for ``cfg``.

    At zero temperature with a trapping state at ``n_q`` the dynamics started
    below it never leaves ``0..n_q``, so that range is used exactly.  Otherwise
    the space grows until the steady state holds less than ``tol`` on the two
    highest levels.
    """
    return make_space(_default_n_max(_cache_key(cfg), tol, n_cap))


def thermal_start(cfg: PumpConfig, space: FockSpace) -> DensityMatrix:
    return DensityMatrix.from_populations(thermal_populations(cfg.nbar, space, warn=False), space)
