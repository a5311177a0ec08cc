"""Noise-regularized over-parameterized matrix recovery.

A small NumPy library for studying how per-iterate random perturbation
regularizes gradient descent on the over-parameterized factorization
objective ``1/4 ||X X^T - Y||_F^2``, plus a diagnostics layer that checks
the supporting assumptions, dissipativity inequalities, trajectory bands,
and one-step drift conditions empirically, and an experiment harness that
reproduces the recovery-error separation between the perturbed and plain
methods.
"""

from .linalg import (
    child_rng,
    child_seed,
    frobenius_norm,
    inner_product,
    make_rng,
    matmul,
    sample_gaussian_matrix,
    sample_orthogonal,
    sample_sphere_columns,
    spectral_norm,
    transpose,
)
from .model import (
    RecoveryProblem,
    RectFactorPair,
    gradient,
    loss,
    make_rank_one_problem,
    make_rank_r_problem,
    make_rectangular_problem,
    rect_gradients,
    rect_loss,
    smoothed_gradient_exact,
)
from .optimize import (
    DivergenceError,
    InitSpec,
    MetricSample,
    OptimizerConfig,
    Trajectory,
    init_iterate,
    init_rect_pair,
    pgd_step,
    read_trajectory_csv,
    run,
    run_rectangular,
    suggested_hyperparameters,
    trajectory_to_csv,
    write_trajectory_csv,
)
from .diagnostics import (
    AssumptionReport,
    CheckResult,
    DiagnosticsReport,
    DissipativityEstimate,
    MartingaleProbe,
    RegionError,
    SubspaceDecomposition,
    check_assumption_init,
    check_assumption_noise,
    check_trajectory_lemmas,
    decompose,
    dissipative_shift,
    dissipativity_probe,
    error_decomposition,
    orthogonal_drift_params,
    martingale_drift_probe,
    normalized_view,
    sample_region_state,
)
from .harness import (
    AggregateResult,
    AllTrialsDivergedError,
    ConfigError,
    ExperimentConfig,
    emit_plot_data,
    run_experiment,
    run_scaling_study,
    run_verify,
)

__version__ = "0.1.0"
