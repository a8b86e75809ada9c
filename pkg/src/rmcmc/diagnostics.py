"""Chain diagnostics and small statistical utilities used by the experiment
runner: integrated autocorrelation time, empirical-cdf distance, block
bootstrap, kernel density estimates, and log-log regression."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import t as student_t

__all__ = [
    "autocorr_time",
    "ess",
    "batch_means_se",
    "ecdf_sup_distance",
    "block_bootstrap_ci",
    "gaussian_kde_on_grid",
    "RegressionResult",
    "loglog_regression",
]


def _autocov(x: np.ndarray) -> np.ndarray:
    n = len(x)
    x = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conjugate(f), nfft)[:n].real
    return acov / n


def autocorr_time(x: Sequence[float], c: float = 5.0) -> float:
    """Integrated autocorrelation time with Sokal's adaptive window: sum
    rho_k over k <= M for the smallest M with M >= c * tau(M)."""
    x = np.asarray(x, dtype=float)
    acov = _autocov(x)
    if acov[0] <= 0.0:
        return 1.0
    rho = acov / acov[0]
    tau = 1.0
    for m in range(1, len(rho)):
        tau = 1.0 + 2.0 * rho[1 : m + 1].sum()
        if m >= c * tau:
            break
    return max(tau, 1.0)


def ess(x: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    return len(x) / autocorr_time(x)


def batch_means_se(x: Sequence[float], n_batches: int = 100) -> float:
    """Standard error of the mean of a correlated series via batch means."""
    x = np.asarray(x, dtype=float)
    b = len(x) // n_batches
    if b < 1:
        raise ValueError("series too short for the requested number of batches")
    means = x[: b * n_batches].reshape(n_batches, b).mean(axis=1)
    return float(means.std(ddof=1)) / math.sqrt(n_batches)


def ecdf_sup_distance(samples: Sequence[float], cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """sup_x |F_hat(x) - F(x)| over the sample points (the KS statistic)."""
    xs = np.sort(np.asarray(samples, dtype=float))
    n = len(xs)
    f = np.asarray(cdf(xs), dtype=float)
    grid = np.arange(1, n + 1) / n
    return float(max(np.max(grid - f), np.max(f - (grid - 1.0 / n))))


def block_bootstrap_ci(
    x: Sequence[float],
    stat: Callable[[np.ndarray], float],
    block: int,
    n_boot: int,
    rng: np.random.Generator,
    alpha: float = 0.05,
) -> tuple[float, float]:
    """Percentile CI for ``stat`` under a non-overlapping block bootstrap
    (blocks preserve the short-range dependence of the chain)."""
    x = np.asarray(x, dtype=float)
    n_blocks = len(x) // block
    if n_blocks < 10:
        raise ValueError("need at least 10 blocks for a block bootstrap")
    blocks = x[: n_blocks * block].reshape(n_blocks, block)
    vals = np.empty(n_boot)
    for i in range(n_boot):
        idx = rng.integers(0, n_blocks, n_blocks)
        vals[i] = stat(blocks[idx].ravel())
    lo, hi = np.quantile(vals, [alpha / 2.0, 1.0 - alpha / 2.0])
    return float(lo), float(hi)


def gaussian_kde_on_grid(
    samples: Sequence[float], grid: np.ndarray, bandwidth: float
) -> np.ndarray:
    """Fixed-bandwidth Gaussian kernel density estimate on a grid."""
    samples = np.asarray(samples, dtype=float)
    grid = np.asarray(grid, dtype=float)
    out = np.zeros(len(grid))
    norm = 1.0 / (len(samples) * bandwidth * math.sqrt(2.0 * math.pi))
    # Chunked to bound the (n_samples x n_grid) intermediate.
    for start in range(0, len(samples), 20_000):
        chunk = samples[start : start + 20_000]
        z = (grid[:, None] - chunk[None, :]) / bandwidth
        out += np.exp(-0.5 * z * z).sum(axis=1)
    return out * norm


@dataclass
class RegressionResult:
    slope: float
    intercept: float
    se_slope: float
    ci_lo: float
    ci_hi: float
    r2: float
    n: int


def loglog_regression(x: Sequence[float], y: Sequence[float]) -> RegressionResult:
    """OLS of log y on log x with a 95% CI for the slope."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    n = len(lx)
    if n < 2:
        raise ValueError("regression needs at least two points")
    mx, my = lx.mean(), ly.mean()
    sxx = float(np.sum((lx - mx) ** 2))
    slope = float(np.sum((lx - mx) * (ly - my)) / sxx)
    intercept = my - slope * mx
    resid = ly - (intercept + slope * lx)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((ly - my) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    if n > 2:
        se = math.sqrt(ss_res / (n - 2) / sxx)
        half = float(student_t.ppf(0.975, n - 2)) * se
    else:
        se = math.inf
        half = math.inf
    return RegressionResult(
        slope=slope,
        intercept=float(intercept),
        se_slope=se,
        ci_lo=slope - half,
        ci_hi=slope + half,
        r2=r2,
        n=n,
    )
