"""Exact simulation and verification of localizable nonlocal measurements.

Parties hold qubits and preshared entanglement, act locally (unitaries and
projective measurements conditioned only on their own earlier outcomes), and
only pool classical outcomes at the end.  The engine enumerates every outcome
branch exactly, so Born statistics, no-signaling, idealness and erasure of
local information can be checked to machine precision.
"""

__version__ = "0.1.0"

from . import bases, engine, linalg, protocols, search, verify
from .bases import basis_from_id
from .engine import Protocol, enumerate_branches, result_distribution, sample_run, validate
from .linalg import DensityMatrix, MeasurementBasis, StateVector, UnitaryOp

__all__ = [
    "__version__",
    "bases",
    "engine",
    "linalg",
    "protocols",
    "search",
    "verify",
    "basis_from_id",
    "Protocol",
    "enumerate_branches",
    "result_distribution",
    "sample_run",
    "validate",
    "DensityMatrix",
    "MeasurementBasis",
    "StateVector",
    "UnitaryOp",
]
