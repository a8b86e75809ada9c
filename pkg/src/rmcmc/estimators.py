"""Estimator models for the log target-ratio D.

Each model samples D-hat from m raw variables, exposes the exact cdf G_m
where available, and carries the asymptotic variance of sqrt(m) D-hat.
Every shipped estimator is a location family in D, so the pivotal noise
D-hat - D is a D-independent function of the raw uniforms; chain runners
exploit this to precompute noise in vectorized blocks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaincc, gammainccinv, gammaincinv, gammaln, ndtr, ndtri

__all__ = [
    "EstimatorModel",
    "exact_normal",
    "inv_gamma_shifted",
    "normal_with_sample_variance",
    "sample_estimate",
    "cdf_G",
    "quantile_G",
    "normal_coupling",
    "coupling_noise",
    "clamp_count",
    "reset_clamp_count",
]

# Quantile clamp: keeps ndtri finite in the extreme tails.
_CLAMP_LO = 1e-16
_CLAMP_HI = 1.0 - 1e-16

_clamp_count = 0


def clamp_count() -> int:
    """Number of coupling evaluations that hit the quantile clamp."""
    return _clamp_count


def reset_clamp_count() -> None:
    global _clamp_count
    _clamp_count = 0


@dataclass(frozen=True)
class EstimatorModel:
    """A D-estimator: sampler, exact pivotal cdf, asymptotic variance.

    ``noise_from_uniforms`` maps raw U(0,1) draws with trailing axis of
    length ``n_uniforms`` to D-hat - D; it must act elementwise so scalar
    and block callers agree bitwise. ``noise_cdf``/``noise_quantile`` are
    the cdf and inverse of the pivotal noise (G_m(x; D) = noise_cdf(x - D)).
    """

    name: str
    m: int
    n_uniforms: int
    sigma2_asymptotic: float
    noise_from_uniforms: Callable[[np.ndarray], np.ndarray]
    s2_from_uniforms: Callable[[np.ndarray], np.ndarray] | None = None
    noise_cdf: Callable[[np.ndarray], np.ndarray] | None = None
    noise_quantile: Callable[[np.ndarray], np.ndarray] | None = None
    noise_logpdf: Callable[[float], float] | None = None
    trivial_coupling: bool = False

    @property
    def variance(self) -> float:
        """Asymptotic variance of D-hat itself, sigma^2/m."""
        return self.sigma2_asymptotic / self.m


def exact_normal(sigma2: float, m: int) -> EstimatorModel:
    """D-hat ~ Normal(D, sigma^2/m)."""
    if sigma2 <= 0.0:
        raise ValueError("sigma2 must be positive")
    s = math.sqrt(sigma2 / m)
    log_norm = -0.5 * math.log(2.0 * math.pi * s * s)

    return EstimatorModel(
        name="exact_normal",
        m=m,
        n_uniforms=1,
        sigma2_asymptotic=sigma2,
        noise_from_uniforms=lambda u: s * ndtri(u[..., 0]),
        noise_cdf=lambda e: ndtr(np.asarray(e) / s),
        noise_quantile=lambda p: s * ndtri(p),
        noise_logpdf=lambda e: -0.5 * (e / s) ** 2 + log_norm,
        trivial_coupling=True,
    )


def inv_gamma_shifted(m: int) -> EstimatorModel:
    """D-hat = D - 1 + m / sum_i W_i with W_i ~ Exponential(1).

    Biased and non-normal: E[D-hat] = D + 1/(m-1) and
    var(D-hat) = m^2 / ((m-1)^2 (m-2)); sqrt(m) D-hat has asymptotic
    variance m^3/((m-1)^2 (m-2)) -> 1.
    """
    if m < 3:
        raise ValueError("inv_gamma_shifted needs m >= 3 for a finite variance")
    log_gamma_m = float(gammaln(m))
    log_m = math.log(m)

    def _noise(u: np.ndarray) -> np.ndarray:
        w = -np.log(u)
        return m / w.sum(axis=-1) - 1.0

    def _cdf(e):
        e = np.asarray(e, dtype=float)
        out = np.zeros_like(e)
        pos = e > -1.0
        out[pos] = gammaincc(m, m / (e[pos] + 1.0))
        return out if out.ndim else float(out)

    def _quantile(p):
        return m / gammainccinv(m, p) - 1.0

    def _logpdf(e: float) -> float:
        # Pushforward of Gamma(m, 1) through e = m/S - 1.
        if e <= -1.0:
            return -math.inf
        s = m / (e + 1.0)
        return (m - 1.0) * math.log(s) - s - log_gamma_m + log_m - 2.0 * math.log(e + 1.0)

    return EstimatorModel(
        name="inv_gamma_shifted",
        m=m,
        n_uniforms=m,
        sigma2_asymptotic=1.0,
        noise_from_uniforms=_noise,
        noise_cdf=_cdf,
        noise_quantile=_quantile,
        noise_logpdf=_logpdf,
    )


def normal_with_sample_variance(
    sigma2: float, m: int, raw_draws: bool = False
) -> EstimatorModel:
    """D-hat ~ Normal(D, sigma^2/m) plus an independent sample variance
    with (m-1) s^2 / sigma^2 ~ chi-square(m-1).

    By default s^2 is drawn from the exact chi-square law (two uniforms);
    ``raw_draws=True`` instead computes mean and sample variance from m raw
    normals, for fidelity tests.
    """
    if sigma2 <= 0.0:
        raise ValueError("sigma2 must be positive")
    if m < 2:
        raise ValueError("sample variance needs m >= 2")
    s = math.sqrt(sigma2 / m)
    sigma = math.sqrt(sigma2)
    half_df = 0.5 * (m - 1)

    if raw_draws:

        def _noise(u: np.ndarray) -> np.ndarray:
            z = ndtri(u)
            return sigma * z.mean(axis=-1)

        def _s2(u: np.ndarray) -> np.ndarray:
            z = ndtri(u)
            zbar = z.mean(axis=-1, keepdims=True)
            return sigma2 * np.square(z - zbar).sum(axis=-1) / (m - 1)

        n_uniforms = m
    else:

        def _noise(u: np.ndarray) -> np.ndarray:
            return s * ndtri(u[..., 0])

        def _s2(u: np.ndarray) -> np.ndarray:
            return sigma2 * 2.0 * gammaincinv(half_df, u[..., 1]) / (m - 1)

        n_uniforms = 2

    return EstimatorModel(
        name="normal_with_sample_variance",
        m=m,
        n_uniforms=n_uniforms,
        sigma2_asymptotic=sigma2,
        noise_from_uniforms=_noise,
        s2_from_uniforms=_s2,
        noise_cdf=lambda e: ndtr(np.asarray(e) / s),
        noise_quantile=lambda p: s * ndtri(p),
        trivial_coupling=True,
    )


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def sample_estimate(
    model: EstimatorModel, d_true: float, rng: np.random.Generator
) -> tuple[float, float | None]:
    """Draw (D-hat, s^2) with s^2 = None unless the model provides one."""
    u = rng.random(model.n_uniforms)
    value = d_true + float(model.noise_from_uniforms(u))
    s2 = float(model.s2_from_uniforms(u)) if model.s2_from_uniforms else None
    return value, s2


def cdf_G(model: EstimatorModel, x: float, d_true: float) -> float:
    """G_m(x; theta, theta') evaluated with the D-shift made explicit."""
    if model.noise_cdf is None:
        raise ValueError(f"estimator {model.name} has no exact cdf")
    if x == math.inf:
        return 1.0
    if x == -math.inf:
        return 0.0
    return float(model.noise_cdf(x - d_true))


def quantile_G(model: EstimatorModel, p: float, d_true: float) -> float:
    if model.noise_quantile is None:
        raise ValueError(f"estimator {model.name} has no exact quantile")
    return d_true + float(model.noise_quantile(p))


def coupling_noise(model: EstimatorModel, noise):
    """Map pivotal estimator noise to exactly-normal pivotal noise.

    Elementwise: e -> sqrt(sigma^2/m) * Phi^{-1}(noise_cdf(e)). For models
    whose estimator is already normal this is the trivial coupling e -> e.
    Scalar in, scalar out; array in, array out.
    """
    global _clamp_count
    if model.trivial_coupling:
        return noise
    if model.noise_cdf is None:
        raise ValueError(f"estimator {model.name} has no exact cdf to couple through")
    p = np.asarray(model.noise_cdf(noise), dtype=float)
    n_clamped = int(np.count_nonzero((p < _CLAMP_LO) | (p > _CLAMP_HI)))
    if n_clamped:
        _clamp_count += n_clamped
        p = np.clip(p, _CLAMP_LO, _CLAMP_HI)
    out = math.sqrt(model.variance) * ndtri(p)
    return float(out) if np.ndim(out) == 0 else out


def normal_coupling(model: EstimatorModel, x: float, d_true: float) -> float:
    """y = D + (sigma/sqrt(m)) Phi^{-1}(G_m(x)); strictly increasing in x and
    exactly Normal(D, sigma^2/m)-distributed when x follows the model."""
    if model.trivial_coupling:
        return x
    return d_true + float(coupling_noise(model, x - d_true))
