"""
ratgreedy package.

Greedy rational approximation with guaranteed negative poles (OGA, improved
OGA, WCGA), shifted-solve application to SPD matrices, and a surrogate
preconditioning study driven from YAML experiment configs.
"""

__version__ = "1.0.0"
__description__ = "Greedy rational approximation with negative poles"

# Package imports for convenience
from ratgreedy.config import Settings
from ratgreedy.domain import (
    Approximant,
    GreedyTrace,
    Interval,
    PartialFraction,
    PoleWindow,
)
from ratgreedy.errors import RatGreedyError

__all__ = [
    "Approximant",
    "GreedyTrace",
    "Interval",
    "PartialFraction",
    "PoleWindow",
    "RatGreedyError",
    "Settings",
]
