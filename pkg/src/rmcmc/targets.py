"""Built-in targets and proposals.

Ships the equal mixture of bivariate normals used by the experiments, small
discrete targets for exact transition-matrix oracles, random-walk and
independence proposals, and a 3x3 free-boundary Ising likelihood whose 512
data states make exact sampling and exact posteriors feasible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp, ndtr

from .core import ProposalKernel, Support, TargetDensity

__all__ = [
    "MIX_MU1",
    "MIX_MU2",
    "mixture_logpdf",
    "mixture_target",
    "mixture_sample",
    "sum_marginal_pdf",
    "sum_marginal_cdf",
    "SUM_MARGINAL_MEAN",
    "SUM_MARGINAL_VAR",
    "rw_proposal",
    "independence_proposal",
    "discrete_target",
    "uniform_discrete_proposal",
    "IsingGrid",
    "ising_likelihood_model",
    "ising_grid_posterior",
]

# Equal mixture of bivariate normals: means on the diagonal, unit marginal
# variances, correlations +1/2 and -1/2 (determinants 0.75).
MIX_MU1 = (3.0, 3.0)
MIX_MU2 = (6.0, 6.0)
_RHO1 = 0.5
_RHO2 = -0.5
_DET = 1.0 - _RHO1 * _RHO1  # same for both components
_LOG_NORM = -math.log(2.0 * math.pi) - 0.5 * math.log(_DET)
_INV_A = 1.0 / _DET  # inverse-covariance diagonal
_INV_B1 = -_RHO1 / _DET  # inverse-covariance off-diagonal, component 1
_INV_B2 = -_RHO2 / _DET
_LOG_HALF = math.log(0.5)

# Law of theta_1 + theta_2: component variances 1 + 1 + 2 rho.
SUM_MARGINAL_MEAN = 9.0
SUM_MARGINAL_VAR = 11.0  # 0.5*(3 + 36) + 0.5*(1 + 144) - 81


def mixture_logpdf(theta) -> float:
    """Log-density of the equal bivariate-normal mixture (normalized)."""
    dx1 = theta[0] - 3.0
    dy1 = theta[1] - 3.0
    q1 = _INV_A * (dx1 * dx1 + dy1 * dy1) + 2.0 * _INV_B1 * dx1 * dy1
    dx2 = theta[0] - 6.0
    dy2 = theta[1] - 6.0
    q2 = _INV_A * (dx2 * dx2 + dy2 * dy2) + 2.0 * _INV_B2 * dx2 * dy2
    a = -0.5 * q1
    b = -0.5 * q2
    hi = a if a > b else b
    return _LOG_HALF + _LOG_NORM + hi + math.log1p(math.exp(-abs(a - b)))


def mixture_target() -> TargetDensity:
    return TargetDensity(dim=2, log_unnorm=mixture_logpdf, exact_log_norm=0.0)


# Cholesky factors of [[1, rho], [rho, 1]] scaled by sqrt(inflation).
def _chol(rho: float, inflation: float) -> tuple[float, float, float]:
    s = math.sqrt(inflation)
    return s, s * rho, s * math.sqrt(1.0 - rho * rho)


def mixture_sample(rng: np.random.Generator, inflation: float = 1.0):
    """One exact draw from the mixture with covariances scaled by ``inflation``."""
    u = rng.random()
    z1, z2 = rng.standard_normal(2)
    return _mixture_point(u, z1, z2, inflation)


def _mixture_point(u: float, z1: float, z2: float, inflation: float):
    if u < 0.5:
        mu, rho = MIX_MU1, _RHO1
    else:
        mu, rho = MIX_MU2, _RHO2
    l11, l21, l22 = _chol(rho, inflation)
    return (mu[0] + l11 * z1, mu[1] + l21 * z1 + l22 * z2)


def sum_marginal_pdf(s: float) -> float:
    """Exact density of theta_1 + theta_2: 0.5 N(6, 3) + 0.5 N(12, 1)."""
    a = math.exp(-0.5 * (s - 6.0) ** 2 / 3.0) / math.sqrt(2.0 * math.pi * 3.0)
    b = math.exp(-0.5 * (s - 12.0) ** 2) / math.sqrt(2.0 * math.pi)
    return 0.5 * a + 0.5 * b


def sum_marginal_cdf(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    return 0.5 * ndtr((s - 6.0) / math.sqrt(3.0)) + 0.5 * ndtr(s - 12.0)


# ---------------------------------------------------------------------------
# Proposals
# ---------------------------------------------------------------------------


def rw_proposal(step_scale: float, dim: int = 2) -> ProposalKernel:
    """Isotropic normal random-walk step; exactly symmetric."""
    if step_scale <= 0.0:
        raise ValueError("step_scale must be positive")
    log_norm = -0.5 * dim * math.log(2.0 * math.pi * step_scale * step_scale)

    def _apply(state, raw):
        return tuple(s + step_scale * z for s, z in zip(state, raw))

    def _log_q(a, b):
        q = sum((y - x) ** 2 for x, y in zip(a, b))
        return -0.5 * q / (step_scale * step_scale) + log_norm

    return ProposalKernel(
        raw_dim=dim,
        raw_block=lambda rng, n: rng.standard_normal((n, dim)),
        apply_draw=_apply,
        log_q=_log_q,
        symmetric=True,
    )


def independence_proposal(inflation: float = 2.0) -> ProposalKernel:
    """Candidates drawn i.i.d. from the target mixture with covariances
    inflated by ``inflation`` (over-dispersed so coupled chains both separate
    and coalesce often enough to measure)."""
    if inflation <= 0.0:
        raise ValueError("inflation must be positive")
    log_inflation = math.log(inflation)

    def _raw_block(rng, n):
        out = np.empty((n, 3))
        out[:, 0] = rng.random(n)
        out[:, 1:] = rng.standard_normal((n, 2))
        return out

    def _apply(state, raw):
        return _mixture_point(raw[0], raw[1], raw[2], inflation)

    def _log_q(a, b):
        return _inflated_mixture_logpdf(b, inflation)

    return ProposalKernel(
        raw_dim=3,
        raw_block=_raw_block,
        apply_draw=_apply,
        log_q=_log_q,
        symmetric=False,
    )


def _inflated_mixture_logpdf(theta, inflation: float) -> float:
    inv_a = _INV_A / inflation
    inv_b1 = _INV_B1 / inflation
    inv_b2 = _INV_B2 / inflation
    dx1 = theta[0] - 3.0
    dy1 = theta[1] - 3.0
    q1 = inv_a * (dx1 * dx1 + dy1 * dy1) + 2.0 * inv_b1 * dx1 * dy1
    dx2 = theta[0] - 6.0
    dy2 = theta[1] - 6.0
    q2 = inv_a * (dx2 * dx2 + dy2 * dy2) + 2.0 * inv_b2 * dx2 * dy2
    a = -0.5 * q1
    b = -0.5 * q2
    hi = a if a > b else b
    return (
        _LOG_HALF
        + _LOG_NORM
        - math.log(inflation)
        + hi
        + math.log1p(math.exp(-abs(a - b)))
    )


# ---------------------------------------------------------------------------
# Discrete oracles
# ---------------------------------------------------------------------------


def discrete_target(probs: Sequence[float]) -> TargetDensity:
    """Finite target over states 0..n-1; probabilities must sum to one."""
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or len(p) > 32:
        raise ValueError("discrete target needs a probability vector with n <= 32")
    if np.any(p < 0.0) or abs(p.sum() - 1.0) > 1e-12:
        raise ValueError("probabilities must be nonnegative and sum to 1")
    logp = np.where(p > 0.0, np.log(np.maximum(p, 1e-300)), -math.inf)

    return TargetDensity(
        dim=1,
        log_unnorm=lambda k: float(logp[k]),
        exact_log_norm=0.0,
        support=Support("discrete-finite", n_states=len(p)),
    )


def uniform_discrete_proposal(n: int) -> ProposalKernel:
    """Uniform candidate over all n states; symmetric."""

    def _apply(state, raw):
        return min(int(raw[0] * n), n - 1)

    return ProposalKernel(
        raw_dim=1,
        raw_block=lambda rng, k: rng.random((k, 1)),
        apply_draw=_apply,
        log_q=lambda a, b: -math.log(n),
        symmetric=True,
    )


# ---------------------------------------------------------------------------
# 3x3 Ising likelihood
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IsingGrid:
    """Free-boundary Ising grid with a single coupling parameter.

    Data states are ints 0..2^(side^2)-1; bit k of a state is the spin of
    site k mapped to {-1, +1}. For side=3 there are 512 states and 12
    nearest-neighbour bonds, small enough for exact enumeration.
    """

    side: int = 3
    bond_sums: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.side * self.side
        bonds = []
        for r in range(self.side):
            for c in range(self.side):
                k = r * self.side + c
                if c + 1 < self.side:
                    bonds.append((k, k + 1))
                if r + 1 < self.side:
                    bonds.append((k, k + self.side))
        states = np.arange(2**n)
        spins = ((states[:, None] >> np.arange(n)[None, :]) & 1) * 2 - 1
        sums = np.zeros(2**n, dtype=np.int64)
        for i, j in bonds:
            sums += spins[:, i] * spins[:, j]
        object.__setattr__(self, "bond_sums", sums)
        object.__setattr__(self, "_logz_cache", {})

    @property
    def n_states(self) -> int:
        return len(self.bond_sums)

    def log_z(self, theta: float) -> float:
        z = self._logz_cache.get(theta)
        if z is None:
            z = float(logsumexp(theta * self.bond_sums))
            self._logz_cache[theta] = z
        return z

    def log_lik(self, theta: float, x: int) -> float:
        """Normalized log-likelihood of data state x."""
        return theta * float(self.bond_sums[x]) - self.log_z(theta)

    def probs(self, theta: float) -> np.ndarray:
        w = theta * self.bond_sums
        w = np.exp(w - w.max())
        return w / w.sum()

    def sampler_cdf(self, theta: float) -> np.ndarray:
        return np.cumsum(self.probs(theta))


def ising_likelihood_model(grid: IsingGrid):
    """LikelihoodModel over the grid; built lazily to avoid an import cycle."""
    from .algorithms import LikelihoodModel

    cdf_cache: dict[float, np.ndarray] = {}

    def _cdf(theta: float) -> np.ndarray:
        tab = cdf_cache.get(theta)
        if tab is None:
            tab = grid.sampler_cdf(theta)
            cdf_cache[theta] = tab
        return tab

    def _log_unnorm(theta: float, x: int) -> float:
        return theta * float(grid.bond_sums[x])

    def _from_uniform(theta: float, u: float) -> int:
        return int(np.searchsorted(_cdf(theta), u, side="right"))

    def _sampler(theta: float, rng: np.random.Generator) -> int:
        return _from_uniform(theta, rng.random())

    return LikelihoodModel(
        log_unnorm_lik=_log_unnorm,
        sample_from_uniform=_from_uniform,
        exact_sampler=_sampler,
        data_space="discrete-finite",
    )


def ising_grid_posterior(grid: IsingGrid, theta_grid: Sequence[float], data: int) -> np.ndarray:
    """Exact posterior over a theta grid with a uniform prior, by enumeration
    of the normalizing constants."""
    theta_grid = np.asarray(theta_grid, dtype=float)
    s_d = float(grid.bond_sums[data])
    log_post = np.array([t * s_d - grid.log_z(t) for t in theta_grid])
    log_post -= logsumexp(log_post)
    return np.exp(log_post)
