"""bilagg: convex relaxations of bounded two-row bilinear bipartite sets.

The package builds polyhedral outer approximations of convex hulls of single
bilinear bipartite equalities, searches for constraint-aggregation weights
that tighten the intersection of such hulls, embeds both inside a spatial
branch-and-bound solver, and ships numerical verification suites for the
library's three structural theorems (exact two-variable hull recipes, the
necessity of infinitely many aggregations, and aggregation-closure gaps).
"""

from . import model, lpcore, onerow, instances

__all__ = [
    "model",
    "lpcore",
    "onerow",
    "instances",
]

__version__ = "0.1.0"
