"""Monte Carlo simulation of the atom beam and the detectors.

Each trajectory carries the photon-number populations of the field
conditioned on its own detection record.  Atoms arrive on the slot grid (or
as a Poisson stream), each atom's detector outcome is drawn from the current
state, and the state is collapsed onto that outcome.  Between atoms the field
relaxes through the thermal channel, which is applied in closed form as a
pure loss followed by a quantum-limited amplifier.  None of this goes through
the ensemble maps used by :mod:`micromaser.stats`.

Random numbers come from numpy's Philox generator.  Trajectories are grouped
in chunks of fixed size and each chunk draws from its own substream keyed by
``(seed, window index, chunk index)``, so results do not depend on how chunks
are scheduled over workers.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import comb

from .errors import WindowError
from .fock import DensityMatrix, FockSpace
from .maps import DetectionOutcome, default_space, steady_populations, MapKind
from .stats.process import Window, window_steps
from .stats.qparam import QReport, field_q
from .superop import PumpConfig, rabi_factors

CHUNK = 2048
MIN_TRAJECTORIES = 1000
DEFAULT_BURN_IN = 20.0

_OUTCOMES = (DetectionOutcome.EXCITED, DetectionOutcome.GROUND, DetectionOutcome.NONE)


@dataclass
class Trajectory:
    """One replayed trajectory: its detector record inside the window and the tallies."""

    seed: int
    index: int
    window: Window
    events: list = field(default_factory=list)  # (arrival time or slot, DetectionOutcome)
    n_e: int = 0
    n_g: int = 0


class ThermalChannel:
    """Relaxation of photon-number populations over arbitrary durations.

    A thermal channel with transmissivity ``s = exp(-2 kappa tau)`` equals a
    pure loss of transmissivity ``s/G`` followed by an amplifier of gain
    ``G = 1 + nbar (1 - s)``; both have binomial-type Fock kernels.  Mass the
    amplifier would push above ``n_max`` stays on the top level.
    """

    def __init__(self, cfg: PumpConfig, space: FockSpace):
        self.kappa = cfg.kappa
        self.nbar = cfg.nbar
        d = space.dim
        self.d = d
        m = np.arange(d)
        self.down = m[None, :] - m[:, None]  # [m, n] -> n - m
        self.c_loss = np.where(self.down >= 0, comb(m[None, :], m[:, None]), 0.0)
        self.c_amp = np.where(self.down <= 0, comb(m[:, None], m[None, :]), 0.0)
        self._cache = {}

    def matrices(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        d, m = self.d, np.arange(self.d)
        s = np.exp(-2.0 * self.kappa * tau)
        G = 1.0 + self.nbar * (1.0 - s)
        t = s / G
        tp = t[:, None] ** m
        qp = (1.0 - t)[:, None] ** m
        loss = self.c_loss[None] * tp[:, :, None] * qp[:, np.clip(self.down, 0, None)]
        if self.nbar == 0:
            return loss
        g = 1.0 / G
        gp = g[:, None] ** (m + 1)
        hp = (1.0 - g)[:, None] ** m
        amp = self.c_amp[None] * gp[:, None, :] * hp[:, np.clip(-self.down, 0, None)]
        amp[:, -1, :] = 1.0 - amp[:, :-1, :].sum(axis=1)
        return amp @ loss

    def matrix(self, tau: float) -> np.ndarray:
        key = float(tau)
        if key not in self._cache:
            self._cache[key] = self.matrices(np.array([key]))[0]
        return self._cache[key]

    def apply(self, pops: np.ndarray, tau: np.ndarray, discrete: bool = False) -> np.ndarray:
        """Relax each row of ``pops`` for its own duration ``tau``."""
        out = pops.copy()
        if discrete:
            # durations are whole slots: few distinct values, so cache per value
            for val in np.unique(tau):
                if val == 0:
                    continue
                sel = tau == val
                out[sel] = pops[sel] @ self.matrix(val).T
            return out
        moving = tau > 0
        if moving.any():
            mats = self.matrices(tau[moving])
            out[moving] = np.einsum("bmn,bn->bm", mats, pops[moving])
        return out


class _Engine:
    def __init__(self, cfg: PumpConfig, space: FockSpace):
        self.cfg = cfg
        self.space = space
        c, s = rabi_factors(cfg.gt_int, space)
        self.c2, self.s2 = c * c, s * s
        self.channel = ThermalChannel(cfg, space)
        self.poisson = cfg.poisson
        self.slot = None if cfg.poisson else cfg.slot

    @property
    def rho_ss(self):
        return np.array(steady_populations(MapKind.fixed_t(), self.cfg, self.space, warn=False))

    def atom(self, pops, u):
        """One atom per row; returns collapsed states and outcome codes 0=e, 1=g, 2=none."""
        eta_e, eta_g = self.cfg.eta_e, self.cfg.eta_g
        e_part = pops * self.c2
        g_part = np.zeros_like(pops)
        g_part[:, 1:] = (pops * self.s2)[:, :-1]
        pe = eta_e * e_part.sum(axis=1)
        pg = eta_g * g_part.sum(axis=1)
        code = np.where(u < pe, 0, np.where(u < pe + pg, 1, 2))
        new = np.where((code == 0)[:, None], e_part,
                       np.where((code == 1)[:, None], g_part,
                                (1 - eta_e) * e_part + (1 - eta_g) * g_part))
        norm = new.sum(axis=1, keepdims=True)
        return new / np.where(norm > 0, norm, 1.0), code

    def damp(self, pops, dur):
        if self.poisson:
            return self.channel.apply(pops, dur)
        return self.channel.apply(pops, dur * self.slot, discrete=True)

    def gap(self, rng, n):
        """Distance to the next arrival, counted from just after an atom's slot start."""
        if self.poisson:
            return rng.exponential(1.0 / self.cfg.rate, n)
        return rng.geometric(self.cfg.p, n).astype(float)

    def idle(self, rng, n):
        """Distance from a slot boundary (or any time) to the next arrival."""
        if self.poisson:
            return rng.exponential(1.0 / self.cfg.rate, n)
        return rng.geometric(self.cfg.p, n).astype(float) - 1.0


def _run_until(eng, rng, pops, pos, end, counts=None, log=None):
    """Advance every trajectory from ``pos`` to ``end``, processing atoms on the way.

    Time is in slots for binomial pumping and in cavity units for Poisson
    pumping.  An atom arriving in slot ``j`` is processed and then the slot's
    damping is applied, so slot positions advance by ``j + 1``.
    """
    active = np.ones(pops.shape[0], dtype=bool)
    step = 0.0 if eng.poisson else 1.0
    while active.any():
        idx = np.flatnonzero(active)
        arrive = pos[idx] + eng.idle(rng, idx.size)
        done = arrive >= end
        if done.any():
            di = idx[done]
            pops[di] = eng.damp(pops[di], end - pos[di])
            pos[di] = end
            active[di] = False
        go = idx[~done]
        if go.size == 0:
            break
        arr = arrive[~done]
        pops[go] = eng.damp(pops[go], arr - pos[go])
        pops[go], code = eng.atom(pops[go], rng.random(go.size))
        if counts is not None:
            np.add.at(counts, (go, np.minimum(code, 2)), 1)
        if log is not None:
            for i, a, c in zip(go, arr, code):
                log[i].append((float(a), _OUTCOMES[c]))
        if step:
            pops[go] = eng.damp(pops[go], np.full(go.size, step))
        pos[go] = arr + step
    return pops, pos


def _run_atoms(eng, rng, pops, n_skip, n_atoms, counts, log=None):
    """Run ``n_skip + n_atoms`` consecutive active atoms, the first arriving now,
    and tally the last ``n_atoms``."""
    b = pops.shape[0]
    clock = np.zeros(b)
    rows = np.arange(b)
    for k in range(n_skip + n_atoms):
        if k:
            g = eng.gap(rng, b)
            pops = eng.damp(pops, g)
            clock += g
        pops, code = eng.atom(pops, rng.random(b))
        if k < n_skip:
            continue
        counts[rows, code] += 1
        if log is not None:
            for i in range(b):
                log[i].append((float(clock[i]), _OUTCOMES[code[i]]))
    return pops


def _burn_in_length(eng, burn_in):
    if eng.poisson:
        return float(burn_in)
    return float(math.ceil(burn_in / eng.slot - 1e-9))


def _chunk_rng(seed, window_index, chunk_index):
    return np.random.Generator(np.random.Philox(key=[int(seed), int(window_index) << 32 | int(chunk_index)]))


def _simulate_chunk(eng, window, size, rng, burn_in, record=False):
    pops = np.tile(eng.rho_ss, (size, 1))
    counts = np.zeros((size, 3), dtype=np.int64)
    log = [[] for _ in range(size)] if record else None
    if window.kind == "N":
        # a typical atom meets the steady field; the first atom after a fixed
        # instant does not (its gap is length-biased), so stay on the atom clock
        n_skip = int(round(burn_in * eng.cfg.rate))
        _run_atoms(eng, rng, pops, n_skip, int(window.size), counts, log)
        return counts[:, :2], log
    pos = np.zeros(size)
    start = _burn_in_length(eng, burn_in)
    if start > 0:
        pops, pos = _run_until(eng, rng, pops, pos, start)
    if eng.poisson:
        end = start + window.size
    else:
        end = start + window_steps(eng.cfg, window)
    _run_until(eng, rng, pops, pos, end, counts, log)
    return counts[:, :2], log


def _check_window(window: Window):
    if not isinstance(window, Window):
        raise WindowError(f"expected a Window, got {window!r}")
    if window.asymptotic:
        raise WindowError("Monte Carlo needs a finite window")


def sample_counts(cfg: PumpConfig, window: Window, n_traj: int, seed: int = 0,
                  burn_in: float = DEFAULT_BURN_IN, space: Optional[FockSpace] = None,
                  window_index: int = 0, jobs: int = 1) -> np.ndarray:
    """Detected counts ``(N_e, N_g)`` per trajectory, shape ``(n_traj, 2)``."""
    _check_window(window)
    if not burn_in >= 0 or math.isinf(burn_in):
        raise WindowError(f"burn-in must be a finite non-negative time, got {burn_in!r}")
    eng = _Engine(cfg, space or default_space(cfg))
    sizes = [min(CHUNK, n_traj - k) for k in range(0, n_traj, CHUNK)]

    def work(j):
        rng = _chunk_rng(seed, window_index, j)
        return _simulate_chunk(eng, window, sizes[j], rng, burn_in)[0]

    if jobs > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    else:
        parts = [work(j) for j in range(len(sizes))]
    return np.concatenate(parts, axis=0)


def replay(cfg: PumpConfig, window: Window, seed: int, index: int, n_traj: int,
           burn_in: float = DEFAULT_BURN_IN, space: Optional[FockSpace] = None,
           window_index: int = 0) -> Trajectory:
    """Re-run trajectory ``index`` of a :func:`sample_counts` call with its event record."""
    _check_window(window)
    if not 0 <= index < n_traj:
        raise IndexError(f"trajectory {index} outside 0..{n_traj - 1}")
    eng = _Engine(cfg, space or default_space(cfg))
    j, i = divmod(index, CHUNK)
    rng = _chunk_rng(seed, window_index, j)
    # the chunk is re-simulated whole so the random stream lines up
    size = min(CHUNK, n_traj - j * CHUNK)
    counts, log = _simulate_chunk(eng, window, size, rng, burn_in, record=True)
    return Trajectory(seed, index, window, log[i], int(counts[i, 0]), int(counts[i, 1]))


def jackknife_q(x) -> tuple:
    """Mandel Q of samples ``x`` and its delete-one jackknife standard error."""
    x = np.asarray(x, dtype=float)
    n = x.size
    s1, s2 = x.sum(), (x * x).sum()

    def q(a, b, m):
        mean = a / m
        var = (b - a * a / m) / (m - 1)
        return var / mean - 1.0

    full = q(s1, s2, n)
    if np.count_nonzero(x) < 2:
        # some delete-one sample has no counts at all
        return float(full), math.inf
    loo = q(s1 - x, s2 - x * x, n - 1)
    se = math.sqrt((n - 1) / n * ((loo - loo.mean()) ** 2).sum())
    return float(full), se


def simulate(cfg: PumpConfig, n_traj: int, windows: Sequence[Window], seed: int = 0,
             burn_in: float = DEFAULT_BURN_IN, space: Optional[FockSpace] = None,
             jobs: int = 1) -> list:
    """Empirical Q-parameters with jackknife standard errors, one report per window.

    Every window gets its own independent set of trajectories starting from
    the steady field.  Fixed-t trajectories run for ``burn_in`` (cavity time
    units) before the window opens; fixed-N trajectories first pass the
    ``burn_in * R`` atoms expected in that time.
    """
    if n_traj < MIN_TRAJECTORIES:
        raise ValueError(f"need at least {MIN_TRAJECTORIES} trajectories, got {n_traj}")
    space = space or default_space(cfg)
    reports = []
    for w_i, window in enumerate(windows):
        counts = sample_counts(cfg, window, n_traj, seed, burn_in, space, w_i, jobs)
        rep = QReport(window, "monte_carlo")
        for col, nu in enumerate("eg"):
            x = counts[:, col]
            setattr(rep, f"mean_{nu}", float(x.mean()))
            if x.any():
                q, se = jackknife_q(x)
            else:
                q, se = 0.0, 0.0
            setattr(rep, f"q_{nu}", q)
            setattr(rep, f"stderr_{nu}", se)
        rep.q_f = field_q(cfg, space)
        rep.extra["n_traj"] = n_traj
        reports.append(rep)
    return reports


def outcome_frequencies(rho: DensityMatrix, cfg: PumpConfig, n_samples: int, seed: int = 0) -> dict:
    """Empirical frequencies of e/g/none for single atoms meeting the same field."""
    eng = _Engine(cfg, rho.space)
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    pops = np.tile(rho.populations, (n_samples, 1))
    _, code = eng.atom(pops, rng.random(n_samples))
    freq = np.bincount(code, minlength=3) / n_samples
    return {o: float(f) for o, f in zip(_OUTCOMES, freq)}


def ensemble_average(cfg: PumpConfig, rho0: DensityMatrix, n_atoms: int, n_traj: int,
                     seed: int = 0) -> np.ndarray:
    """Mean conditional populations just before atom ``n_atoms + 1``.

    Starts from ``rho0`` just before the first active atom and runs each
    trajectory through ``n_atoms`` collapses and the gaps that follow them.
    """
    eng = _Engine(cfg, rho0.space)
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    pops = np.tile(rho0.populations, (n_traj, 1))
    for _ in range(n_atoms):
        pops, _ = eng.atom(pops, rng.random(n_traj))
        pops = eng.damp(pops, eng.gap(rng, n_traj))
    return pops.mean(axis=0)


__all__ = ["Trajectory", "ThermalChannel", "sample_counts", "replay", "jackknife_q",
           "simulate", "outcome_frequencies", "ensemble_average"]
