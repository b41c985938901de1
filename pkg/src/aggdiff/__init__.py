"""One-dimensional aggregation-diffusion: solver, energies, symmetrization
curves and equilibration diagnostics."""

from .density import Density, Grid
from .errors import (AggDiffError, CertificateError, ConfigError, ConsistencyError, ConstructionError,
                     ConvergenceError, CurveDomainError, DomainError, DomainEscapeError,
                     StabilityError)
from .potential import PotentialSpec

__version__ = "0.1.0"
