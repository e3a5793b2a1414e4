"""Steady-state phonon statistics of a driven quantum dot in an acoustic nanocavity."""

from .hierarchy import (
    HierarchyState,
    Observables,
    SingularSystem,
    SparseGenerator,
    TruncationDiverged,
    ZeroMeanPhonon,
    assemble_generator,
    auto_truncate,
    observables,
    solve_steady_state,
)
from .model import DressedFrame, Mode, ParameterError, SystemParams, dress, thermal_occupation

__all__ = [
    "DressedFrame",
    "HierarchyState",
    "Mode",
    "Observables",
    "ParameterError",
    "SingularSystem",
    "SparseGenerator",
    "SystemParams",
    "TruncationDiverged",
    "ZeroMeanPhonon",
    "assemble_generator",
    "auto_truncate",
    "dress",
    "observables",
    "solve_steady_state",
    "thermal_occupation",
]
