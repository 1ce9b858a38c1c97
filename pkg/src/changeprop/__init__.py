"""Change propagation for round-synchronous algorithms, with three dynamized
clients: map-reduce over sequences, batch-dynamic sequences via list
contraction, and batch-dynamic trees via undirected tree contraction with
rake-compress query trees on top.
"""

from .engine import (
    CellStore,
    DeltaError,
    EngineError,
    MissingLocationError,
    Program,
    PropagationDelta,
    Trace,
    VisibilityError,
    WriteConflictError,
    check_restricted,
    fresh_run,
    propagate,
    run,
)
from .coins import CoinOracle

__all__ = [
    "CellStore",
    "CoinOracle",
    "DeltaError",
    "EngineError",
    "MissingLocationError",
    "Program",
    "PropagationDelta",
    "Trace",
    "VisibilityError",
    "WriteConflictError",
    "check_restricted",
    "fresh_run",
    "propagate",
    "run",
]
