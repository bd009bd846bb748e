"""Periodic-box Navier-Stokes with velocity-direction regularity diagnostics."""
from .spectral import Grid, ScalarField, SpectralField, VectorField
from .solver import SolverConfig, SolverState, step, recover_pressure
from .diagnostics import exponent_budget, identity_residual, direction_divergence

__version__ = "0.1.0"
