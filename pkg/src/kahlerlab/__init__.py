"""Geodesics in the space of Kaehler potentials on the flat torus, the Calabi flow,
and numerical checks of their comparison geometry."""

from .errors import (
    ConfigError,
    ConvergenceError,
    FlagDegenerate,
    FlowInvariantError,
    KahlerLabError,
    PositivityError,
    StepError,
)
from .flow import (
    contraction_experiment,
    curve_length,
    flow_curve,
    flow_step,
    length_derivative,
    run_flow,
    scheme_symbol,
)
from .geodesic import (
    DistanceResult,
    PathGrid,
    SolveOptions,
    continuation_solve,
    covariant_t_derivative,
    distance,
    interpolate,
    measure_distance,
    solve_epsilon_geodesic,
)
from .grid import GridSpec, integrate, laplacian, read_field, solve_biharmonic_shift, write_field
from .kahler import (
    MetricState,
    calabi_energy,
    curvature_pairing,
    grad_norm_sq,
    k_energy,
    lichnerowicz,
    lichnerowicz_norm_sq,
    mabuchi_inner,
    make_metric,
    poisson_bracket,
)
from .kernels import BACKEND
from .npc import (
    JacobiReport,
    TriangleReport,
    cat0_check,
    distance_derivative_check,
    jacobi_experiment,
    minimizing_sequence_check,
    random_potential,
)
from .report import ExperimentReport

__version__ = "1.0.0"
