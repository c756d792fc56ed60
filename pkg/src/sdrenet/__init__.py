"""SDRE-supervised neural feedback laws for nonlinear optimal control.

Riccati solvers, benchmark models, SDRE dataset generation, feedforward
networks trained with L-BFGS, and a closed-loop simulator.
"""

from .errors import (
    DegenerateTargets,
    DimensionMismatch,
    EmptyBatch,
    EmptyDataset,
    FormatError,
    InvalidBase,
    InvalidBounds,
    InvalidConfig,
    NoConvergence,
    NonFiniteLoss,
    NonFiniteState,
    NotStabilizable,
    SdreNetError,
    SingularSylvester,
)
from .models import (
    AllenCahnConfig,
    CuckerSmaleConfig,
    SemilinearSystem,
    allen_cahn_system,
    cucker_smale_system,
    drift,
    linear_system,
    make_system,
)
from .riccati import LtiData, RiccatiSolution, care_residual, solve_care, solve_lyapunov
from .sdre import SdreSample, linear_gain_at_origin, sdre_gain, sdre_solve

__version__ = "0.1.0"
