"""Counting statistics of atoms leaving a micromaser cavity."""

from .fock import DensityMatrix, FockSpace, fock_state, make_space, mandel_qf, thermal_state
from .maps import DetectionOutcome, MapKind, default_space, steady_state, step
from .stats import QReport, Window, count_distribution, q_direct, q_spectral
from .superop import PumpConfig, Superoperator, operators

__version__ = "0.1.0"

__all__ = [
    "DensityMatrix", "DetectionOutcome", "FockSpace", "MapKind", "PumpConfig", "QReport",
    "Superoperator", "Window", "count_distribution", "default_space", "fock_state",
    "make_space", "mandel_qf", "operators", "q_direct", "q_spectral", "steady_state",
    "step", "thermal_state",
]
