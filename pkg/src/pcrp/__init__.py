"""Powered Chinese Restaurant Process: seating priors, growth-law checks and
an infinite Gaussian mixture sampled by collapsed Gibbs."""
from .exceptions import EnumerationTooLarge, InputError, NumericalError, ParameterDomainError
from .prior_process import (
    ProcessKind,
    ProcessSpec,
    SeatingState,
    Trajectory,
    exact_expected_k,
    predictive_probs,
    run_ensemble,
    run_process,
    step,
)
from .powered_dirichlet import (
    PoweredDirichletParams,
    log_powered_dirichlet_density,
    log_powered_dirichlet_multinomial,
    log_powered_dirichlet_multinomial_renormalized,
    posterior_predictive,
)
from .proposition_lab import (
    expected_k_theory,
    fit_k_growth,
    fit_sum_growth,
    gap_trajectory,
    validate_r,
)
from .igmm import FitResult, GibbsState, NIWParams, StoppingRule, fit, gibbs_sweep, log_joint
from .metrics import (
    ContingencyTable,
    Partition,
    adjusted_mutual_info,
    adjusted_rand_index,
    cluster_count_deviation,
    fowlkes_mallows,
    normalized_variation_of_information,
    score_all,
)
from .datasets import LabeledDataset, gen_blobs, gen_grid, gen_multiscale, gen_two_scale, load_csv, save_csv

__version__ = "0.1.0"
