"""Executable versions of the theory behind randomized acceptance.

Pointwise ("very detailed") balance, averaged detailed balance, the Peskun
upper bound on the averaged acceptance, the minorization constant
Pr(Xi(X) >= 1) >= eps, and exact transition-matrix oracles on small
discrete targets. Every check ships with a negative control so the test
battery cannot pass vacuously.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

from .core import (
    Involution,
    ProposalKernel,
    QuadratureError,
    RandomizationSpec,
    TargetDensity,
    avg_accept_prob,
    log_xi_correction,
    std_log_ratio,
)
from .estimators import EstimatorModel

__all__ = [
    "BalanceReport",
    "check_vdb",
    "check_db_average",
    "peskun_check",
    "epsilon_bound",
    "EpsilonRow",
    "minorization_check",
    "transition_matrix",
    "stationary_vector",
    "naive_avg_accept",
    "broken_involution_spec",
    "total_variation",
]

# Density floor: products of small densities underflow absolute comparisons,
# so residuals are log-scale differences with both sides floored here.
_LOG_FLOOR = math.log(1e-300)


@dataclass
class BalanceReport:
    max_abs_residual: float
    n_points: int
    worst_case: tuple | None


def _log_side(log_density_terms: Sequence[float]) -> float:
    return sum(log_density_terms)


def check_vdb(
    target: TargetDensity,
    prop: ProposalKernel,
    spec: RandomizationSpec,
    points: Sequence[tuple],
) -> BalanceReport:
    """Pointwise balance: for each (theta, theta', x),

        pi~(t) q(t,t') xi(x;t,t') a_xi(t,t';x)
          = pi~(t') q(t',t) xi(f(x);t',t) a_xi(t',t;f(x)) |f'(x)|.

    The residual is |log LHS - log RHS|, a symmetric relative measure."""
    worst = None
    worst_res = 0.0
    for theta, theta_p, x in points:
        log_h = std_log_ratio(target, prop, theta, theta_p)
        fx = spec.involution.apply(x)
        lhs = (
            target.log_unnorm(theta)
            + prop.log_q(theta, theta_p)
            + spec.log_xi(x, theta, theta_p)
            + min(0.0, log_h + log_xi_correction(spec, x, theta, theta_p))
        )
        log_h_rev = std_log_ratio(target, prop, theta_p, theta)
        rhs = (
            target.log_unnorm(theta_p)
            + prop.log_q(theta_p, theta)
            + spec.log_xi(fx, theta_p, theta)
            + min(0.0, log_h_rev + log_xi_correction(spec, fx, theta_p, theta))
            + spec.involution.log_abs_deriv(x)
        )
        if max(lhs, rhs) < _LOG_FLOOR:
            res = 0.0
        else:
            res = abs(lhs - rhs)
        if res > worst_res:
            worst_res = res
            worst = (theta, theta_p, x)
    return BalanceReport(worst_res, len(points), worst)


def check_db_average(
    target: TargetDensity,
    prop: ProposalKernel,
    alpha_avg: Callable[[object, object], float],
    pairs: Sequence[tuple],
) -> BalanceReport:
    """Averaged detailed balance with quadrature-computed alpha_xi:
    residual of pi~(t) q(t,t') a(t,t') = pi~(t') q(t',t) a(t',t), relative."""
    worst = None
    worst_res = 0.0
    for theta, theta_p in pairs:
        lhs = (
            math.exp(target.log_unnorm(theta) + prop.log_q(theta, theta_p))
            * alpha_avg(theta, theta_p)
        )
        rhs = (
            math.exp(target.log_unnorm(theta_p) + prop.log_q(theta_p, theta))
            * alpha_avg(theta_p, theta)
        )
        denom = max(lhs, rhs, 1e-300)
        res = abs(lhs - rhs) / denom
        if res > worst_res:
            worst_res = res
            worst = (theta, theta_p)
    return BalanceReport(worst_res, len(pairs), worst)


def peskun_check(
    spec: RandomizationSpec,
    target: TargetDensity,
    prop: ProposalKernel,
    n_pairs: int,
    rng: np.random.Generator,
    state_sampler: Callable[[np.random.Generator], object],
    tol: float = 1e-8,
) -> float:
    """Max over sampled pairs of alpha_xi(t,t') - min(1, h(t,t')); the
    randomized chain is dominated by its standard chain, so this must not
    exceed ``tol``."""
    worst = -math.inf
    for _ in range(n_pairs):
        theta = state_sampler(rng)
        theta_p = prop.sample(theta, rng)
        log_h = std_log_ratio(target, prop, theta, theta_p)
        a_xi = avg_accept_prob(spec, log_h, theta, theta_p, tol=tol)
        worst = max(worst, a_xi - math.exp(min(0.0, log_h)))
    return worst


@dataclass
class EpsilonRow:
    theta: object
    theta_p: object
    prob: float
    se: float
    below_floor: bool = False


def epsilon_bound(
    spec: RandomizationSpec,
    pairs: Sequence[tuple],
    n_mc: int,
    rng: np.random.Generator,
    floor: float = 0.0,
) -> tuple[float, list[EpsilonRow]]:
    """Monte Carlo estimate of Pr(Xi(X) >= 1) per pair, X ~ xi(.; t, t'),
    where Xi is the randomization correction factor; returns the minimum
    over pairs (the minorization constant) and the per-pair table.

    Xi identically 1 counts as >= 1. Pairs whose estimate falls below
    ``floor`` are flagged rather than rejected: near a boundary of the
    state space a state-dependent xi can drive the probability to zero,
    and the caller decides admissibility."""
    rows = []
    eps_hat = math.inf
    for theta, theta_p in pairs:
        hits = 0
        for _ in range(n_mc):
            x = spec.sample_xi(theta, theta_p, rng)
            if log_xi_correction(spec, x, theta, theta_p) >= 0.0:
                hits += 1
        p = hits / n_mc
        rows.append(
            EpsilonRow(
                theta, theta_p, p,
                math.sqrt(max(p * (1.0 - p), 0.0) / n_mc),
                below_floor=p < floor,
            )
        )
        eps_hat = min(eps_hat, p)
    return eps_hat, rows


# ---------------------------------------------------------------------------
# Discrete transition-matrix oracles
# ---------------------------------------------------------------------------


def transition_matrix(
    target: TargetDensity,
    prop: ProposalKernel,
    alpha: Callable[[int, int], float],
) -> np.ndarray:
    """Exact one-step matrix on a finite target: off-diagonal entries are
    q(i,j) alpha(i,j); the diagonal carries the full rejection mass
    (including self-proposals), so rows sum to one by construction."""
    if target.support.kind != "discrete-finite":
        raise ValueError("transition matrices need a discrete-finite target")
    n = target.support.n_states
    p = np.zeros((n, n))
    for i in range(n):
        off = 0.0
        for j in range(n):
            if j == i:
                continue
            pij = math.exp(prop.log_q(i, j)) * alpha(i, j)
            p[i, j] = pij
            off += pij
        p[i, i] = 1.0 - off
    row_err = np.abs(p.sum(axis=1) - 1.0).max()
    if row_err > 1e-9 or (p < -1e-12).any():
        raise ValueError(f"transition matrix not row-stochastic (error {row_err:.2e})")
    return p


def stationary_vector(p: np.ndarray) -> np.ndarray:
    """Left eigenvector of P for eigenvalue 1, normalized to a probability
    vector (via the null space of P^T - I)."""
    n = p.shape[0]
    _, _, vh = np.linalg.svd(p.T - np.eye(n))
    v = np.abs(vh[-1])
    return v / v.sum()


def minorization_check(
    target: TargetDensity,
    prop: ProposalKernel,
    spec: RandomizationSpec,
    eps_hat: float,
    tol: float = 1e-9,
) -> tuple[bool, float, np.ndarray, np.ndarray]:
    """Verify P_xi >= eps * P elementwise (diagonal included) with both
    matrices built exactly from quadrature acceptances."""

    def alpha_std(i: int, j: int) -> float:
        return math.exp(min(0.0, std_log_ratio(target, prop, i, j)))

    def alpha_xi(i: int, j: int) -> float:
        return avg_accept_prob(spec, std_log_ratio(target, prop, i, j), i, j)

    p = transition_matrix(target, prop, alpha_std)
    p_xi = transition_matrix(target, prop, alpha_xi)
    deficit = float((eps_hat * p - p_xi).max())
    return deficit <= tol, deficit, p, p_xi


def total_variation(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(a) - np.asarray(b)).sum())


# ---------------------------------------------------------------------------
# Averaged acceptance of the (uncorrected) naive update
# ---------------------------------------------------------------------------


def naive_avg_accept(model: EstimatorModel, log_h: float, tol: float = 1e-8) -> float:
    """E[min(1, e^(log_h + noise))] under the estimator's pivotal noise law;
    quadrature split at the acceptance kink. Not a randomized-acceptance
    kernel: it serves as the negative control that fails averaged detailed
    balance."""
    if model.noise_logpdf is None:
        raise ValueError(f"estimator {model.name} has no noise density")
    logpdf = model.noise_logpdf
    kink = -log_h

    def integrand(e: float) -> float:
        lp = logpdf(e)
        if lp == -math.inf:
            return 0.0
        return math.exp(lp + min(0.0, log_h + e))

    total = 0.0
    err = 0.0
    for a, b in ((-math.inf, kink), (kink, math.inf)):
        val, abserr = quad(integrand, a, b, epsabs=tol / 10.0, epsrel=1e-12, limit=200)
        total += val
        err += abserr
    if err > tol:
        raise QuadratureError(f"naive acceptance quadrature error {err:.3e} > {tol:.3e}")
    return total


# ---------------------------------------------------------------------------
# Negative controls
# ---------------------------------------------------------------------------


def broken_involution_spec(spec: RandomizationSpec) -> RandomizationSpec:
    """Replace the involution with f(x) = x + 1 (not an involution); every
    balance identity must then fail by a wide margin."""
    return RandomizationSpec(
        involution=Involution(apply=lambda x: x + 1.0, log_abs_deriv=lambda x: 0.0),
        log_xi=spec.log_xi,
        n_uniforms=spec.n_uniforms,
        from_uniforms=spec.from_uniforms,
        support=spec.support,
    )
