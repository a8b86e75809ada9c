"""The four named single-update algorithms for estimated log-ratios.

naive plugs the estimate straight into the acceptance probability (inexact);
penalty subtracts sigma^2/2m and is exact for a normal estimator; the
penalty-estimate variant replaces sigma^2 with a chi-square sample variance
(inexact); single-variable exchange cancels the unknown likelihood
normalizer with one exact synthetic-data draw.

All four assume a symmetric proposal; pass ``hastings=True`` to add the
exact log q-ratio for asymmetric proposals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtri

from .core import (
    ProposalKernel,
    StepResult,
    TargetDensity,
    UpdateDraws,
    _decide,
)
from .estimators import EstimatorModel, normal_coupling

__all__ = [
    "LikelihoodModel",
    "naive_step",
    "penalty_step",
    "penalty_estimate_step",
    "sve_step",
]


@dataclass(frozen=True)
class LikelihoodModel:
    """Likelihood L(theta, x) = c(theta) L~(theta, x) with c unknown to the
    sampler; ``exact_sampler`` draws from the normalized law."""

    log_unnorm_lik: Callable[[float, object], float]
    sample_from_uniform: Callable[[float, float], object]
    exact_sampler: Callable[[float, np.random.Generator], object]
    data_space: str = "discrete-finite"


def _d_log_pi(target: TargetDensity, prop: ProposalKernel, theta, cand, hastings: bool) -> float:
    d = target.log_unnorm(cand) - target.log_unnorm(theta)
    if hastings and not prop.symmetric:
        d += prop.log_q(cand, theta) - prop.log_q(theta, cand)
    return d


def naive_step(
    target: TargetDensity,
    prop: ProposalKernel,
    model: EstimatorModel,
    theta,
    draws: UpdateDraws,
    hastings: bool = False,
) -> StepResult:
    """Accept with min{1, e^x} where x estimates the log target-ratio.

    Does not in general target pi; the desk-scale harness centers the
    estimator on the exact D computed from the target."""
    cand = prop.apply_draw(theta, draws.proposal_draw)
    d = _d_log_pi(target, prop, theta, cand, hastings)
    x = d + float(model.noise_from_uniforms(draws.estimator_draws))
    log_alpha = min(0.0, x)
    accepted = _decide(log_alpha, draws.accept_uniform)
    return StepResult(cand if accepted else theta, accepted, math.exp(log_alpha))


def penalty_step(
    target: TargetDensity,
    prop: ProposalKernel,
    sigma2: float,
    m: int,
    theta,
    draws: UpdateDraws,
    model: EstimatorModel | None = None,
    hastings: bool = False,
) -> StepResult:
    """Accept with min{1, e^(y - sigma^2/2m)} where y ~ Normal(D, sigma^2/m).

    With ``model=None`` the normal estimate is drawn directly from one
    uniform; otherwise y is produced by the normal coupling of the given
    model's estimate, which leaves this chain exact whenever the coupling
    is exact."""
    cand = prop.apply_draw(theta, draws.proposal_draw)
    d = _d_log_pi(target, prop, theta, cand, hastings)
    if model is None:
        y = d + math.sqrt(sigma2 / m) * float(ndtri(draws.estimator_draws[0]))
    else:
        x = d + float(model.noise_from_uniforms(draws.estimator_draws))
        y = normal_coupling(model, x, d)
    log_alpha = min(0.0, y - sigma2 / (2.0 * m))
    accepted = _decide(log_alpha, draws.accept_uniform)
    return StepResult(cand if accepted else theta, accepted, math.exp(log_alpha))


def penalty_estimate_step(
    target: TargetDensity,
    prop: ProposalKernel,
    model: EstimatorModel,
    theta,
    draws: UpdateDraws,
    hastings: bool = False,
) -> StepResult:
    """Penalty update with sigma^2 replaced by the sample variance; inexact
    by design."""
    if model.s2_from_uniforms is None:
        raise ValueError("penalty_estimate_step needs an estimator with a sample variance")
    cand = prop.apply_draw(theta, draws.proposal_draw)
    d = _d_log_pi(target, prop, theta, cand, hastings)
    y = d + float(model.noise_from_uniforms(draws.estimator_draws))
    s2 = float(model.s2_from_uniforms(draws.estimator_draws))
    assert s2 > 0.0
    log_alpha = min(0.0, y - s2 / (2.0 * model.m))
    accepted = _decide(log_alpha, draws.accept_uniform)
    return StepResult(cand if accepted else theta, accepted, math.exp(log_alpha))


def sve_step(
    prior: TargetDensity,
    lik: LikelihoodModel,
    data,
    prop: ProposalKernel,
    theta,
    draws: UpdateDraws,
    hastings: bool = False,
) -> StepResult:
    """Single-variable exchange: simulate x ~ L(theta', .) and accept with

        min{1, [p(theta') L(theta', d) / p(theta) L(theta, d)]
               * [L(theta, x) / L(theta', x)]}.

    Only the unnormalized likelihood enters: the terms are grouped per
    parameter value so the unknown normalizers cancel."""
    cand = prop.apply_draw(theta, draws.proposal_draw)
    x = lik.sample_from_uniform(cand, float(draws.estimator_draws[0]))
    log_r = (
        (prior.log_unnorm(cand) - prior.log_unnorm(theta))
        + (lik.log_unnorm_lik(cand, data) - lik.log_unnorm_lik(cand, x))
        + (lik.log_unnorm_lik(theta, x) - lik.log_unnorm_lik(theta, data))
    )
    if hastings and not prop.symmetric:
        log_r += prop.log_q(cand, theta) - prop.log_q(theta, cand)
    log_alpha = min(0.0, log_r)
    accepted = _decide(log_alpha, draws.accept_uniform)
    return StepResult(cand if accepted else theta, accepted, math.exp(log_alpha))
