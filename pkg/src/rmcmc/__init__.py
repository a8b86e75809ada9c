"""Randomized-acceptance Metropolis-Hastings MCMC and a coupling-separation
harness for measuring how long approximate chains track exact ones."""

from .core import (
    DiscreteSupport,
    Interval,
    Involution,
    ProposalKernel,
    QuadratureError,
    RandomizationSpec,
    StepResult,
    Support,
    SupportError,
    TargetDensity,
    UpdateDraws,
    avg_accept_prob,
    draw_update,
    identity_involution,
    mobius_involution,
    penalty_r_spec,
    product_randomization,
    r_step,
    randomized_log_ratio,
    s_step,
    shift_reflection,
    std_log_ratio,
    toy_r_spec,
    trivial_r_spec,
)
from .estimators import (
    EstimatorModel,
    cdf_G,
    exact_normal,
    inv_gamma_shifted,
    normal_coupling,
    normal_with_sample_variance,
    quantile_G,
    sample_estimate,
)
from .algorithms import (
    LikelihoodModel,
    naive_step,
    penalty_estimate_step,
    penalty_step,
    sve_step,
)
from .coupling import (
    ChainConfig,
    CoupledConfig,
    PairKernel,
    SeparationStats,
    coupled_init,
    coupled_step,
    first_separation_time,
    penalty_naive_pair,
    penalty_pestimate_pair,
    rho_hat1,
    rho_hat2,
    run_chain,
    run_coupled,
    run_marks,
    separation_stats,
    septime_sweep,
    standard_naive_pair,
    tau_hat,
)
from .targets import (
    IsingGrid,
    discrete_target,
    independence_proposal,
    ising_grid_posterior,
    ising_likelihood_model,
    mixture_logpdf,
    mixture_target,
    rw_proposal,
    sum_marginal_cdf,
    sum_marginal_pdf,
    uniform_discrete_proposal,
)
from .verify import (
    BalanceReport,
    check_db_average,
    check_vdb,
    epsilon_bound,
    minorization_check,
    peskun_check,
    stationary_vector,
    transition_matrix,
)

__version__ = "0.1.0"
