"""Transition path sampling of rare transitions on toy energy landscapes.

The pipeline explores a landscape without collective variables, reduces
the sampled manifold to a weighted transition graph whose path action
controls the transition path ensemble, encodes path sampling as a
binary-quadratic problem, draws trial paths from a pluggable annealer
backend, and recovers the exact ensemble with a Metropolis correction.
"""

from . import analysis, annealer, config, dynamics, graph, manifold, potentials, qubo, tps

__all__ = [
    "analysis",
    "annealer",
    "config",
    "dynamics",
    "graph",
    "manifold",
    "potentials",
    "qubo",
    "tps",
]

__version__ = "0.1.0"
