"""Vanishing-viscosity level set mean curvature flow and a verifier of its BV identities."""

from .errors import (BlowupError, CertificationFailure, ConfigError, DegenerateTest,
                     EmptyLevelSet, LsmcfError, SpecError)
from .fields import BoundaryRegime, GridSpec, ScalarField, VectorField
from .initial_data import (Constant, InitialDataSpec, NeumannHalfBump, RadialBump, TwoBumps,
                           build, certify_well_prepared)
from .solver import SolverParams, Trajectory, run

__all__ = [
    "BlowupError", "BoundaryRegime", "CertificationFailure", "ConfigError", "Constant",
    "DegenerateTest", "EmptyLevelSet", "GridSpec", "InitialDataSpec", "LsmcfError",
    "NeumannHalfBump", "RadialBump", "ScalarField", "SolverParams", "SpecError", "Trajectory",
    "TwoBumps", "VectorField", "build", "certify_well_prepared", "run",
]

__version__ = "0.1.0"
