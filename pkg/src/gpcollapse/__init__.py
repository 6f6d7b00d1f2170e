"""Ground states of the 2D attractive Gross-Pitaevskii functional near collapse."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DescentError,
    DivergedNumerically,
    NoFitError,
    NotApplicable,
    ThresholdExceeded,
)
from .kwong import (
    KwongConstants,
    RadialProfile,
    gaussian_family_bound,
    gaussian_family_minimum,
    kwong_constants,
    kwong_identities,
    radial_moment,
    shoot_radial,
    solve_kwong,
)
from .potential import LambdaReport, TrapSpec, Well, eval_potential, flatness, lambda_values
from .gp2d import (
    EnergyBreakdown,
    Field2D,
    Frame,
    Grid,
    MinimizeOptions,
    MinimizeResult,
    energy,
    gn_check,
    minimize,
    minimize_rescaled,
    residual_el,
)
from .asymptotics import (
    FitResult,
    SweepOptions,
    SweepReport,
    concentration_index,
    fit_power_law,
    predicted_laws,
    profile_distance,
    sweep,
)
