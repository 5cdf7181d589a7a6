"""linbai: best-arm identification for linear bandits.

Sampling-oracle strategies (PEPS and its doubling-trick wrapper), baselines
(LinTS, a projection-based game learner, fixed designs), convex design
solvers (G-optimal, the max-min allocation game), and a seeded benchmark
harness with CSV/SVG outputs.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DegenerateTargetError,
    DimensionError,
    InputError,
    LinbaiError,
    NumericalError,
    RankError,
)

__all__ = [
    "ConfigError",
    "DegenerateTargetError",
    "DimensionError",
    "InputError",
    "LinbaiError",
    "NumericalError",
    "RankError",
    "__version__",
]
