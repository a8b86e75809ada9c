"""Randomized and standard Metropolis-Hastings single-update machinery.

All ratio arithmetic lives in log space: an update accepts when
log V <= min(0, log h), so extreme log-ratios never overflow. Every
operation is pure given an explicit ``numpy.random.Generator``; coupled
chains stay on common random numbers by feeding both kernels the same
``UpdateDraws`` packet (proposal raw draws first, then estimator uniforms,
then the accept uniform V).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import ndtri

__all__ = [
    "SupportError",
    "QuadratureError",
    "Support",
    "TargetDensity",
    "ProposalKernel",
    "Involution",
    "identity_involution",
    "shift_reflection",
    "mobius_involution",
    "Interval",
    "DiscreteSupport",
    "RandomizationSpec",
    "product_randomization",
    "UpdateDraws",
    "draw_update",
    "StepResult",
    "std_log_ratio",
    "log_xi_correction",
    "randomized_log_ratio",
    "r_step",
    "s_step",
    "toy_r_spec",
    "penalty_r_spec",
    "trivial_r_spec",
    "avg_accept_prob",
]

# Minimum accept uniform: keeps V strictly inside (0, 1).
_TINY = 5e-324


class SupportError(ValueError):
    """A state or randomization value fell outside the declared support."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


@dataclass(frozen=True)
class Support:
    """State-space descriptor: continuous box or finite discrete set."""

    kind: str  # "continuous-box" | "discrete-finite"
    n_states: int | None = None


@dataclass(frozen=True)
class TargetDensity:
    """Unnormalized log-density log pi~(theta) over a state space.

    ``log_unnorm`` must return a finite float for every state in the
    declared support and be pure (same state, same value).
    ``exact_log_norm`` is only for oracles on small discrete spaces.
    """

    dim: int
    log_unnorm: Callable[[object], float]
    exact_log_norm: float | None = None
    support: Support = Support("continuous-box")


@dataclass(frozen=True)
class ProposalKernel:
    """Hastings proposal q(theta, .).

    The sampling step is split into ``raw_block`` (raw randomness) and
    ``apply_draw`` (a deterministic map from state + raw draw to the
    candidate) so that coupled chains at different states can consume
    identical raw numbers.
    """

    raw_dim: int
    raw_block: Callable[[np.random.Generator, int], np.ndarray]
    apply_draw: Callable[[object, np.ndarray], object]
    log_q: Callable[[object, object], float]
    symmetric: bool

    def raw_draw(self, rng: np.random.Generator) -> np.ndarray:
        return self.raw_block(rng, 1)[0]

    def sample(self, state, rng: np.random.Generator):
        return self.apply_draw(state, self.raw_draw(rng))


# ---------------------------------------------------------------------------
# Involutions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Involution:
    """A map f with f(f(x)) = x together with log|f'(x)|."""

    apply: Callable[[float], float]
    log_abs_deriv: Callable[[float], float]


def identity_involution() -> Involution:
    return Involution(apply=lambda x: x, log_abs_deriv=lambda x: 0.0)


def shift_reflection(c: float) -> Involution:
    """f(x) = c - x; |f'| = 1."""
    return Involution(apply=lambda x, c=c: c - x, log_abs_deriv=lambda x: 0.0)


def mobius_involution(a: float, b: float, c: float) -> Involution:
    """f(x) = (a x + b) / (c x - a), an involution whenever a^2 + bc != 0."""
    disc = a * a + b * c
    if disc == 0.0:
        raise ValueError("mobius involution requires a^2 + b*c != 0")
    log_disc = math.log(abs(disc))

    def _apply(x: float) -> float:
        return (a * x + b) / (c * x - a)

    def _log_abs_deriv(x: float) -> float:
        return log_disc - 2.0 * math.log(abs(c * x - a))

    return Involution(apply=_apply, log_abs_deriv=_log_abs_deriv)


# ---------------------------------------------------------------------------
# Randomization specs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    """Continuous support of a randomization density."""

    lo: float = -math.inf
    hi: float = math.inf

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi


@dataclass(frozen=True)
class DiscreteSupport:
    """Finite support; values are state labels (ints)."""

    values: tuple

    def contains(self, x) -> bool:
        return x in self.values


@dataclass(frozen=True)
class RandomizationSpec:
    """The pair (xi, f): a randomization density with fixed support and an
    involution on that support.

    ``from_uniforms`` maps ``n_uniforms`` raw U(0,1) draws to one sample of
    xi(.; theta, theta'); it is the deterministic hook used by coupled
    chains. ``log_xi`` must be a normalized log-density for the balance
    checks to be meaningful.
    """

    involution: Involution
    log_xi: Callable[[object, object, object], float]
    n_uniforms: int
    from_uniforms: Callable[[np.ndarray, object, object], object]
    support: Interval | DiscreteSupport = Interval()

    def sample_xi(self, theta, theta_p, rng: np.random.Generator):
        return self.from_uniforms(rng.random(self.n_uniforms), theta, theta_p)


def product_randomization(specs: Sequence[RandomizationSpec]) -> RandomizationSpec:
    """Combine K scalar randomizations into one with vector-valued X.

    The involution acts componentwise and the log-Jacobian is the sum of the
    per-component terms. Only the representation is provided; quadrature of
    the averaged acceptance stays scalar-only.
    """
    specs = tuple(specs)

    def _apply(x):
        return np.array([s.involution.apply(float(xi)) for s, xi in zip(specs, x)])

    def _log_abs_deriv(x):
        return sum(s.involution.log_abs_deriv(float(xi)) for s, xi in zip(specs, x))

    def _log_xi(x, theta, theta_p):
        return sum(s.log_xi(float(xi), theta, theta_p) for s, xi in zip(specs, x))

    offsets = np.cumsum([0] + [s.n_uniforms for s in specs])

    def _from_uniforms(u, theta, theta_p):
        return np.array(
            [
                s.from_uniforms(u[offsets[i] : offsets[i + 1]], theta, theta_p)
                for i, s in enumerate(specs)
            ]
        )

    return RandomizationSpec(
        involution=Involution(apply=_apply, log_abs_deriv=_log_abs_deriv),
        log_xi=_log_xi,
        n_uniforms=int(offsets[-1]),
        from_uniforms=_from_uniforms,
        support=Interval(),
    )


# ---------------------------------------------------------------------------
# Update draws
# ---------------------------------------------------------------------------


class UpdateDraws(NamedTuple):
    """Raw random inputs for one update, in fixed consumption order."""

    proposal_draw: np.ndarray
    estimator_draws: np.ndarray
    accept_uniform: float


def draw_update(
    rng: np.random.Generator, proposal: ProposalKernel, n_estimator_uniforms: int
) -> UpdateDraws:
    """Draw one packet: proposal raw, then estimator uniforms, then V."""
    raw = proposal.raw_draw(rng)
    u = rng.random(n_estimator_uniforms)
    v = float(rng.random())
    return UpdateDraws(raw, u, v if v > 0.0 else _TINY)


class StepResult(NamedTuple):
    state: object
    accepted: bool
    alpha: float


def _decide(log_alpha: float, accept_uniform: float) -> bool:
    return math.log(accept_uniform) <= log_alpha


# ---------------------------------------------------------------------------
# Log ratios
# ---------------------------------------------------------------------------


def std_log_ratio(target: TargetDensity, prop: ProposalKernel, theta, theta_p) -> float:
    """log h(theta, theta') = log pi~(theta') - log pi~(theta)
    + log q(theta', theta) - log q(theta, theta').  Normalizer-free."""
    lp_from = target.log_unnorm(theta)
    lp_to = target.log_unnorm(theta_p)
    if not math.isfinite(lp_from):
        raise SupportError(f"log-density not finite at state {theta!r}")
    if not math.isfinite(lp_to):
        raise SupportError(f"log-density not finite at state {theta_p!r}")
    if prop.symmetric:
        return lp_to - lp_from
    lq_fwd = prop.log_q(theta, theta_p)
    lq_rev = prop.log_q(theta_p, theta)
    if math.isfinite(lq_fwd) != math.isfinite(lq_rev):
        raise SupportError(
            f"proposal positivity violated between {theta!r} and {theta_p!r}"
        )
    return lp_to - lp_from + lq_rev - lq_fwd


def log_xi_correction(spec: RandomizationSpec, x, theta, theta_p) -> float:
    """log [ xi(f(x); theta', theta) / xi(x; theta, theta') |f'(x)| ]."""
    fx = spec.involution.apply(x)
    return (
        spec.log_xi(fx, theta_p, theta)
        - spec.log_xi(x, theta, theta_p)
        + spec.involution.log_abs_deriv(x)
    )


def randomized_log_ratio(
    spec: RandomizationSpec, log_h: float, x, theta, theta_p
) -> float:
    """log h_xi for the randomized acceptance min{1, h_xi}."""
    if isinstance(x, (int, float)) and not spec.support.contains(x):
        raise SupportError(f"randomization value {x!r} outside support {spec.support}")
    return log_h + log_xi_correction(spec, x, theta, theta_p)


# ---------------------------------------------------------------------------
# Single-update kernels
# ---------------------------------------------------------------------------


def s_step(
    target: TargetDensity, prop: ProposalKernel, theta, draws: UpdateDraws
) -> StepResult:
    """One standard Metropolis-Hastings update."""
    cand = prop.apply_draw(theta, draws.proposal_draw)
    log_alpha = min(0.0, std_log_ratio(target, prop, theta, cand))
    accepted = _decide(log_alpha, draws.accept_uniform)
    return StepResult(cand if accepted else theta, accepted, math.exp(log_alpha))


def r_step(
    target: TargetDensity,
    prop: ProposalKernel,
    spec: RandomizationSpec,
    theta,
    draws: UpdateDraws,
) -> StepResult:
    """One randomized-acceptance update: propose, draw x ~ xi, accept with
    probability min{1, h_xi(theta, theta'; x)}."""
    cand = prop.apply_draw(theta, draws.proposal_draw)
    log_h = std_log_ratio(target, prop, theta, cand)
    x = spec.from_uniforms(draws.estimator_draws, theta, cand)
    log_alpha = min(0.0, randomized_log_ratio(spec, log_h, x, theta, cand))
    accepted = _decide(log_alpha, draws.accept_uniform)
    return StepResult(cand if accepted else theta, accepted, math.exp(log_alpha))


# ---------------------------------------------------------------------------
# Shipped randomization specs
# ---------------------------------------------------------------------------


def toy_r_spec(target: TargetDensity) -> RandomizationSpec:
    """Random-tempering spec for a symmetric proposal: xi = N(D, 1) with
    D = log pi~(theta')/pi~(theta) and the identity involution, giving
    acceptance min{1, (pi(theta')/pi(theta))^(1-2x)}."""
    log_unnorm = target.log_unnorm
    half_log_2pi = 0.5 * math.log(2.0 * math.pi)

    # The balance and quadrature checks hammer a single pair, so a tiny
    # cache on D pays for itself; states must be hashable.
    @lru_cache(maxsize=8)
    def _d(theta, theta_p) -> float:
        return log_unnorm(theta_p) - log_unnorm(theta)

    def _log_xi(x, theta, theta_p):
        return -0.5 * (x - _d(theta, theta_p)) ** 2 - half_log_2pi

    def _from_uniforms(u, theta, theta_p):
        return _d(theta, theta_p) + float(ndtri(u[0]))

    return RandomizationSpec(
        involution=identity_involution(),
        log_xi=_log_xi,
        n_uniforms=1,
        from_uniforms=_from_uniforms,
        support=Interval(),
    )


def penalty_r_spec(sigma2: float, m: int) -> RandomizationSpec:
    """Randomization underlying the penalty method: xi = N(0, sigma^2/m)
    with the shift-reflection f(x) = sigma^2/m - x, so that the correction
    term is exactly exp(x - sigma^2/2m)."""
    v = sigma2 / m
    s = math.sqrt(v)
    log_norm = -0.5 * math.log(2.0 * math.pi * v)

    def _log_xi(x, theta, theta_p):
        return -0.5 * x * x / v + log_norm

    def _from_uniforms(u, theta, theta_p):
        return s * float(ndtri(u[0]))

    return RandomizationSpec(
        involution=shift_reflection(v),
        log_xi=_log_xi,
        n_uniforms=1,
        from_uniforms=_from_uniforms,
        support=Interval(),
    )


def trivial_r_spec() -> RandomizationSpec:
    """A (theta, theta')-independent xi with the identity involution: the
    correction term cancels exactly and the r-chain equals the s-chain."""
    half_log_2pi = 0.5 * math.log(2.0 * math.pi)

    def _log_xi(x, theta, theta_p):
        return -0.5 * x * x - half_log_2pi

    def _from_uniforms(u, theta, theta_p):
        return float(ndtri(u[0]))

    return RandomizationSpec(
        involution=identity_involution(),
        log_xi=_log_xi,
        n_uniforms=1,
        from_uniforms=_from_uniforms,
        support=Interval(),
    )


# ---------------------------------------------------------------------------
# Averaged acceptance probability
# ---------------------------------------------------------------------------


def _crossings(g: Callable[[float], float], lo: float, hi: float, n: int = 257) -> list[float]:
    """Roots of g on [lo, hi] located by a sign scan plus brentq refinement."""
    xs = np.linspace(lo, hi, n)
    vals = np.array([g(float(x)) for x in xs])
    roots: list[float] = []
    for i in range(n - 1):
        a, b = vals[i], vals[i + 1]
        if not (math.isfinite(a) and math.isfinite(b)):
            continue
        if a == 0.0:
            roots.append(float(xs[i]))
        elif a * b < 0.0:
            roots.append(float(brentq(g, float(xs[i]), float(xs[i + 1]))))
    return sorted(set(roots))


def _scan_window(spec: RandomizationSpec, theta, theta_p) -> tuple[float, float]:
    if isinstance(spec.support, Interval) and math.isfinite(spec.support.lo) and math.isfinite(spec.support.hi):
        return spec.support.lo, spec.support.hi
    probe = np.random.default_rng(0)
    xs = [float(spec.sample_xi(theta, theta_p, probe)) for _ in range(128)]
    lo, hi = min(xs), max(xs)
    span = max(hi - lo, 1e-6)
    return lo - 6.0 * span, hi + 6.0 * span


def avg_accept_prob(
    spec: RandomizationSpec, log_h: float, theta, theta_p, tol: float = 1e-8
) -> float:
    """alpha_xi(theta, theta') = E_xi[ min{1, h_xi(theta, theta'; X)} ].

    For continuous supports this is adaptive quadrature split at the points
    where h_xi crosses 1 (the min introduces a kink there); for discrete
    supports it is an exact sum.
    """
    if isinstance(spec.support, DiscreteSupport):
        total = 0.0
        for x in spec.support.values:
            lw = spec.log_xi(x, theta, theta_p)
            if lw == -math.inf:
                continue
            la = min(0.0, log_h + log_xi_correction(spec, x, theta, theta_p))
            total += math.exp(lw + la)
        return total

    def g(x: float) -> float:
        return log_h + log_xi_correction(spec, x, theta, theta_p)

    def integrand(x: float) -> float:
        return math.exp(spec.log_xi(x, theta, theta_p) + min(0.0, g(x)))

    lo, hi = _scan_window(spec, theta, theta_p)
    pts = _crossings(g, lo, hi)
    edges = [spec.support.lo] + pts + [spec.support.hi]

    total = 0.0
    err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if a >= b:
            continue
        val, abserr = quad(integrand, a, b, epsabs=tol / 10.0, epsrel=1e-12, limit=200)
        total += val
        err += abserr
    if err > tol:
        raise QuadratureError(
            f"averaged acceptance quadrature reached tolerance {err:.3e} > {tol:.3e}"
        )
    return total
