"""Optimization-based model order reduction for linear stochastic systems.

Covers systems driven by additive or multiplicative Levy-type noise:
mean-square stability checks, generalized Lyapunov/Sylvester solvers,
IRKA-type reduction algorithms, weighted L2 distances with computable
output-error bounds, Monte Carlo validation by coupled Euler-Maruyama
simulation, and a stochastic damped wave equation benchmark family.
"""

from .errors import (
    ConvergenceError,
    DecompositionError,
    DivergenceError,
    ProjectionError,
    QuadratureError,
    RankDeficiencyError,
    ShiftCollisionError,
    SimulationDivergenceError,
    SingularOperatorError,
    SizeCapError,
    StabilityLossError,
    StochmorError,
    UnstableSystemError,
)
from .irka import (
    IRKAOptions,
    OptimalityResiduals,
    ReductionResult,
    TwoStepReduction,
    optimality_residuals,
    petrov_galerkin_project,
    realify_orthonormalize,
    reduce_bilinear_irka,
    reduce_one_step,
    reduce_two_step,
)
from .matrixeq import (
    SchurShiftedSolver,
    SolveOptions,
    SolveReport,
    kronecker_oracle,
    lyapunov_residual,
    solve_generalized_lyapunov,
    solve_generalized_sylvester,
    sylvester_residual,
)
from .metrics import (
    AdditiveBounds,
    DistanceReport,
    additive_bounds,
    deterministic_subsystem,
    input_l2_norm,
    l2w_distance,
    noise_subsystem,
    output_error_bound,
    sqrtm_psd,
)
from .modelio import (
    load_matrix,
    load_model,
    save_matrix,
    save_model,
    save_reduction,
    write_csv,
    write_json,
)
from .sdesim import (
    NoisePathSet,
    SimulationResult,
    TimeGrid,
    lemma_ode_evolve,
    sample_noise_paths,
    simulate_pair,
    worst_case_mean_error,
)
from .system import (
    StabilityReport,
    StateSpaceModel,
    WeightMatrix,
    is_ms_stable,
    ms_stability_operator,
    validate_model,
)
from .wavebench import (
    PRESETS,
    FunctionSpec,
    WaveConfig,
    build_wave_model,
    function_spec,
    galerkin_coefficient,
    preset_config,
    preset_input,
)

__version__ = "0.1.0"
