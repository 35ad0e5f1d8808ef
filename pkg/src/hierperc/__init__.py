"""Simulation laboratory for critical long-range percolation on hierarchical lattices.

The model lives on a box of L**(d*n) sites carrying an ultrametric; percolation
configurations are sampled exactly through an equivalent recursive system of
multiplicative coalescents, one layer per scale.  The package bundles the exact
samplers, small-system ground-truth oracles, moment/flow closed forms, critical
point estimation, estimators for the quantities the scaling theory predicts,
and a renormalization map acting on empirical laws of mass sequences.
"""

__version__ = "0.1.0"

from .lattice import ModelParams

__all__ = ["ModelParams", "__version__"]
