"""Biorthogonal eigen-decomposition of the one-step map of a counting window."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from ..errors import AmbiguousSteadyStateError, BiorthogonalityError
from ..maps import DEGENERACY_GAP, UNIT_EIGENVALUE_TOL
from .process import CountingProcess

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues with biorthonormal right/left eigenvectors of a map.

    ``right[:, i]`` and ``left[i, :]`` are the populations of the right and
    left eigen-matrices (both diagonal), normalized so ``left @ right = 1``.
    Index 0 is the fixed point (eigenvalue 1, or 0 for a generator) and
    ``right[:, 0]`` is the steady state.  ``c_right[nu][i] = Tr(F_nu rho_i)`` and
    ``c_left[nu][i] = Tr(rho~_i A F_nu rho_ss)``; ``c_right[nu][0]`` equals
    ``Tr(F_nu rho_ss)``.
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    c_right: dict
    c_left: dict
    continuous: bool
    condition: float

    def right_matrix(self, i: int) -> np.ndarray:
        return np.diag(self.right[:, i])

    def left_matrix(self, i: int) -> np.ndarray:
        return np.diag(self.left[i, :])

    def biorthogonality_error(self) -> float:
        n = self.eigenvalues.size
        return float(np.abs(self.left @ self.right - np.eye(n)).max())


def decompose(proc: CountingProcess) -> SpectralDecomposition:
    M = proc.M
    target = 0.0 if proc.continuous else 1.0
    w, vl, vr = la.eig(M, left=True, right=True)
    order = np.argsort(np.abs(w - target))
    if proc.continuous:
        scale = max(1.0, float(np.abs(np.diag(M)).max()))
        dist = np.abs(w[order] - target) / scale
    else:
        dist = np.abs(w[order] - target)
    if dist[0] > UNIT_EIGENVALUE_TOL:
        raise AmbiguousSteadyStateError(f"no fixed point found (closest eigenvalue {w[order[0]]!r})",
                                        w[order[:1]])
    if w.size > 1 and dist[1] < DEGENERACY_GAP:
        raise AmbiguousSteadyStateError(
            f"fixed point is not isolated: eigenvalues {w[order[0]]!r} and {w[order[1]]!r}",
            w[order[:2]])
    w, vl, vr = w[order], vl[:, order], vr[:, order]
    condition = float(np.linalg.cond(vr))
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise BiorthogonalityError(f"eigenvector matrix condition number {condition:.3g}")
    left = vl.conj().T
    overlap = np.einsum("ij,ji->i", left, vr)
    left = left / overlap[:, None]
    # fixed the gauge of the fixed point: unit trace on the right, trace functional on the left
    tr0 = vr[:, 0].sum()
    right = vr.copy()
    right[:, 0] = vr[:, 0] / tr0
    left[0, :] = left[0, :] * tr0
    rho_ss = proc.rho_ss
    c_right, c_left = {}, {}
    for nu in "eg":
        B = proc.B[nu]
        c_right[nu] = B.sum(axis=0) @ right
        c_left[nu] = left @ (B @ rho_ss)
    return SpectralDecomposition(w, right, left, c_right, c_left, proc.continuous, condition)
