"""Boundary-layer back-flow simulator and verification harness.

Two independent routes to the wall shear of an unsteady laminar boundary
layer under a prescribed outer flow: a finite-difference march of the
momentum equation in physical variables, and a march of the transformed
shear equation in normalized-height variables.  A diagnostics layer tracks
the blow-up functional whose finite-time divergence forces the wall shear
to vanish, and locates the first back-flow point.
"""

from .errors import (
    BackflowError,
    ConfigError,
    DataError,
    DomainError,
    InstabilityError,
    InvertibilityError,
    MonotonicityError,
    NumericalError,
    TruncationError,
)
from .outer_flow import (
    GradientReport,
    OuterFlowModel,
    affine_model,
    classify_gradient,
    constant_model,
    decaying_linear_model,
    eval_Ue,
    pressure_gradient,
)
from .records import BackFlowEvent, DiagnosticSeries, RunResult, StepReport

__version__ = "0.1.0"
