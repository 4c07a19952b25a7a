"""Truncated Fock space, density matrices and photon-number statistics."""

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import TruncationWarning, UndefinedStatisticError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-10


@dataclass(frozen=True)
class FockSpace:
    """Photon-number states |0>, ..., |n_max> of a single cavity mode.

    The ladder operators are the usual truncated matrices: ``a|n> = sqrt(n)|n-1>``
    and ``a^dagger|n_max> = 0``.
    """

    n_max: int

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max!r}")
        object.__setattr__(self, "n_max", int(self.n_max))

    @property
    def dim(self) -> int:
        return self.n_max + 1

    @cached_property
    def numbers(self) -> np.ndarray:
        return np.arange(self.dim, dtype=float)

    @cached_property
    def a(self) -> np.ndarray:
        a = np.diag(np.sqrt(self.numbers[1:]), k=1).astype(complex)
        a.setflags(write=False)
        return a

    @cached_property
    def adag(self) -> np.ndarray:
        ad = self.a.conj().T.copy()
        ad.setflags(write=False)
        return ad

    @cached_property
    def number_op(self) -> np.ndarray:
        n = np.diag(self.numbers).astype(complex)
        n.setflags(write=False)
        return n

    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)


def make_space(n_max: int) -> FockSpace:
    return FockSpace(n_max)


class DensityMatrix:
    """Hermitian, unit-trace, positive matrix on a :class:`FockSpace`.

    Instances are immutable; ``entries`` is a read-only complex array.
    """

    __slots__ = ("_entries", "space")

    def __init__(self, entries, space: FockSpace, check: bool = True):
        rho = np.array(entries, dtype=complex)
        if rho.shape != (space.dim, space.dim):
            raise ValueError(f"expected shape {(space.dim, space.dim)}, got {rho.shape}")
        if check:
            _validate(rho)
        rho.setflags(write=False)
        self._entries = rho
        self.space = space

    @classmethod
    def from_populations(cls, populations, space: FockSpace, check: bool = True):
        return cls(np.diag(np.asarray(populations, dtype=float)), space, check=check)

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def populations(self) -> np.ndarray:
        return self._entries.diagonal().real.copy()

    @property
    def trace(self) -> float:
        return float(self._entries.trace().real)

    def is_diagonal(self, tol: float = 1e-14) -> bool:
        off = self._entries - np.diag(self._entries.diagonal())
        return bool(np.abs(off).max(initial=0.0) < tol)

    def mean_photons(self) -> float:
        return float(self.space.numbers @ self.populations)

    def trace_distance(self, other: "DensityMatrix") -> float:
        eig = np.linalg.eigvalsh(self._entries - other.entries)
        return 0.5 * float(np.abs(eig).sum())

    def __repr__(self):
        return f"DensityMatrix(dim={self.space.dim}, <n>={self.mean_photons():.6g})"


def _validate(rho):
    herm = np.abs(rho - rho.conj().T).max()
    if herm > HERMITIAN_TOL:
        raise ValueError(f"matrix is not Hermitian (deviation {herm:.3g})")
    tr = rho.trace().real
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"trace is {tr!r}, expected 1")
    lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if lo < -POSITIVITY_TOL:
        raise ValueError(f"matrix is not positive (min eigenvalue {lo:.3g})")


def fock_state(n: int, space: FockSpace) -> DensityMatrix:
    pops = np.zeros(space.dim)
    pops[n] = 1.0
    return DensityMatrix.from_populations(pops, space)


def thermal_populations(nbar: float, space: FockSpace, warn: bool = True) -> np.ndarray:
    """Geometric law ``nbar**n / (1 + nbar)**(n + 1)`` renormalized on the space."""
    if nbar < 0:
        raise ValueError("nbar must be non-negative")
    pops = np.zeros(space.dim)
    if nbar == 0:
        pops[0] = 1.0
        return pops
    ratio = nbar / (1.0 + nbar)
    pops = ratio ** space.numbers / (1.0 + nbar)
    tail = ratio ** space.dim
    if warn and tail > 1e-12:
        warnings.warn(
            f"thermal tail beyond n_max={space.n_max} is {tail:.3g}",
            TruncationWarning,
            stacklevel=2,
        )
    return pops / pops.sum()


def thermal_state(nbar: float, space: FockSpace) -> DensityMatrix:
    return DensityMatrix.from_populations(thermal_populations(nbar, space), space)


def photon_moments(populations) -> tuple:
    """Return ``(<n>, <n^2>)`` of a photon-number distribution."""
    p = np.asarray(populations, dtype=float)
    n = np.arange(p.size)
    return float(n @ p), float((n * n) @ p)


def mandel_q_populations(populations) -> float:
    mean, second = photon_moments(populations)
    if mean <= 0.0:
        raise UndefinedStatisticError("Mandel Q is undefined for zero mean photon number")
    return (second - mean * mean) / mean - 1.0


def mandel_qf(rho: DensityMatrix) -> float:
    """Mandel Q-parameter of the cavity field, ``Var(n)/<n> - 1``."""
    return mandel_q_populations(rho.populations)
