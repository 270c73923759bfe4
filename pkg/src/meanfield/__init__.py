"""Mountain pass solutions of the weighted mean field equation on a flat torus."""

from .diagnostics import (
    ConcentrationReport,
    DeficitReport,
    GateReport,
    bubble_profile,
    concentration,
    exp_mass,
    lambda_rho_gate,
    moser_trudinger_deficit,
)
from .errors import (
    ConvergenceError,
    FieldFormatError,
    GridMismatchError,
    InvalidArgumentError,
    InvalidFieldError,
    MeanFieldError,
    NoNegativeEndpointError,
)
from .functional import (
    FunctionalReport,
    InteractionParams,
    evaluate,
    gradient,
    log_partition_functions,
    partition_functions,
    project_zero_mean,
    residual_norm,
)
from .kernels import BACKEND
from .manifold import (
    ScalarField,
    TorusGrid,
    WeightField,
    build_grid,
    dirichlet_energy,
    first_eigenvalue,
    inner,
    integrate,
    l2_norm,
    read_field,
    weight_preset,
    weighted_laplacian_apply,
    write_field,
)
from .mountain_pass import (
    MountainPassResult,
    PathState,
    SolverConfig,
    continuation_solve,
    deform_path,
    find_negative_endpoint,
    relax_endpoint,
    initialize_path,
    solve,
)

__version__ = "0.1.0"
