"""Numerical solution of the zero-dimensional phi^4 equations of motion.

The Green's functions ``H^{n+1}`` (``n`` odd) are obtained as the fixed point
of the splitting-preserving map ``M*``, iterated from the fundamental
sequence. Submodules:

- :mod:`~phi4zero.combinatorics`: partitions and weights of the hierarchy
- :mod:`~phi4zero.model`: sequences, equation terms, residuals, sign checks
- :mod:`~phi4zero.mapping`: one sweep of ``M*``
- :mod:`~phi4zero.solver`: the iteration driver
- :mod:`~phi4zero.series`: exact power-series solution used as an oracle
- :mod:`~phi4zero.diagnostics`: trace classification, scans, sign map
- :mod:`~phi4zero.cli`: command-line interface
"""

__version__ = "0.1.0"

from .mapping import SweepConfig, SweepOrder, apply_mstar
from .model import ClosureMode, GreenSequence, SplittingSequence, fundamental_sequence
from .solver import RunResult, SolverConfig, Status, run

__all__ = [
    "__version__",
    "ClosureMode",
    "GreenSequence",
    "SplittingSequence",
    "SweepConfig",
    "SweepOrder",
    "SolverConfig",
    "RunResult",
    "Status",
    "apply_mstar",
    "fundamental_sequence",
    "run",
]
