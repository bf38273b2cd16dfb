"""Finite-time quantum Otto cycle with a misaligned-field two-level working substance."""

from .errors import (
    DegenerateGap,
    DomainViolation,
    Infeasible,
    MaxOnBoundary,
    NoSignChange,
    NonConvergence,
    NotUnitary,
    OttoError,
    SupportViolation,
)
from .ensemble import CycleParams, DisorderSpec, MaxPowerResult, SweepSpec, maximize_power
from .otto import CycleReport, CycleSpec, run_cycle
from .qdyn import HamiltonianSpec, PauliVector, RampProtocol, propagate

__version__ = "0.1.0"
