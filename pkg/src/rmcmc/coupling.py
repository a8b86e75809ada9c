"""Coupling-separation harness.

Runs an exact chain and an approximate chain on common random numbers,
records the marks B_t at which their accept decisions differ, and estimates
the three separation-time statistics: rho-hat-1 (reciprocal mean acceptance
gap), rho-hat-2 (mean interval between marks of the stationary mark
process), and tau-hat (mean first-passage time to a mark from equilibrium).

Draw discipline: every update consumes one packet (proposal raw draws,
estimator uniforms, accept uniform V) pregenerated in fixed-size blocks.
All runners share the same block size and per-update noise path, so the
exact chain inside a coupled run is bitwise identical to a standalone chain
run on the same stream.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import ProposalKernel, TargetDensity, UpdateDraws
from .diagnostics import RegressionResult, loglog_regression
from .estimators import EstimatorModel, coupling_noise
from . import rng as streams

__all__ = [
    "BLOCK",
    "PairKernel",
    "ChainKernel",
    "penalty_naive_pair",
    "penalty_pestimate_pair",
    "standard_naive_pair",
    "exact_kernel",
    "approx_kernel",
    "CoupledConfig",
    "ChainConfig",
    "CoupledState",
    "coupled_init",
    "coupled_step",
    "ChainRun",
    "run_chain",
    "CoupledRun",
    "run_coupled",
    "MarkRun",
    "run_marks",
    "first_separation_time",
    "equilibrium_starts",
    "Estimate",
    "InsufficientEventsError",
    "rho_hat1",
    "rho_hat2",
    "tau_hat",
    "SeparationStats",
    "separation_stats",
    "SweepRow",
    "SweepResult",
    "septime_sweep",
]

# Packets per pregenerated block; part of the draw protocol, never tune.
BLOCK = 512


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PairKernel:
    """Exact/approximate acceptance exponents sharing one set of estimator
    uniforms. ``noise_from_uniforms`` maps the packet's uniforms to the
    pivotal (D-independent) noise tuple consumed by both exponents."""

    name: str
    n_uniforms: int
    noise_from_uniforms: Callable[[np.ndarray], tuple]
    exact_exponent: Callable[[float, tuple], float]
    approx_exponent: Callable[[float, tuple], float]


@dataclass(frozen=True)
class ChainKernel:
    """One side of a pair, for standalone chain runs."""

    name: str
    n_uniforms: int
    noise_from_uniforms: Callable[[np.ndarray], tuple]
    exponent: Callable[[float, tuple], float]


def penalty_naive_pair(model: EstimatorModel) -> PairKernel:
    """Exact penalty chain driven by the normal coupling of the model's
    estimate; approximate naive chain uses the raw estimate."""
    pen = 0.5 * model.variance
    trivial = model.trivial_coupling

    def _noise(u: np.ndarray) -> tuple:
        e_x = float(model.noise_from_uniforms(u))
        e_y = e_x if trivial else float(coupling_noise(model, e_x))
        return (e_x, e_y)

    return PairKernel(
        name="penalty-naive",
        n_uniforms=model.n_uniforms,
        noise_from_uniforms=_noise,
        exact_exponent=lambda lh, ns: lh + ns[1] - pen,
        approx_exponent=lambda lh, ns: lh + ns[0],
    )


def penalty_pestimate_pair(model: EstimatorModel) -> PairKernel:
    """Exact penalty versus penalty-estimate: both use the same normal
    estimate (trivial coupling); only the variance in the correction term
    differs."""
    if model.s2_from_uniforms is None:
        raise ValueError("penalty-pestimate pair needs a sample-variance estimator")
    pen = 0.5 * model.variance
    inv_2m = 1.0 / (2.0 * model.m)

    def _noise(u: np.ndarray) -> tuple:
        return (float(model.noise_from_uniforms(u)), float(model.s2_from_uniforms(u)))

    return PairKernel(
        name="penalty-pestimate",
        n_uniforms=model.n_uniforms,
        noise_from_uniforms=_noise,
        exact_exponent=lambda lh, ns: lh + ns[0] - pen,
        approx_exponent=lambda lh, ns: lh + ns[0] - ns[1] * inv_2m,
    )


def standard_naive_pair(model: EstimatorModel) -> PairKernel:
    """Exact standard chain versus naive chain; the acceptance gap is
    O(1/sqrt(m)) rather than O(1/m)."""

    def _noise(u: np.ndarray) -> tuple:
        return (float(model.noise_from_uniforms(u)),)

    return PairKernel(
        name="standard-naive",
        n_uniforms=model.n_uniforms,
        noise_from_uniforms=_noise,
        exact_exponent=lambda lh, ns: lh,
        approx_exponent=lambda lh, ns: lh + ns[0],
    )


def exact_kernel(pair: PairKernel) -> ChainKernel:
    return ChainKernel(
        name=pair.name + "/exact",
        n_uniforms=pair.n_uniforms,
        noise_from_uniforms=pair.noise_from_uniforms,
        exponent=pair.exact_exponent,
    )


def approx_kernel(pair: PairKernel) -> ChainKernel:
    return ChainKernel(
        name=pair.name + "/approx",
        n_uniforms=pair.n_uniforms,
        noise_from_uniforms=pair.noise_from_uniforms,
        exponent=pair.approx_exponent,
    )


# ---------------------------------------------------------------------------
# Configurations and the packet stream
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoupledConfig:
    target: TargetDensity
    proposal: ProposalKernel
    pair: PairKernel
    hastings: bool = False


@dataclass(frozen=True)
class ChainConfig:
    target: TargetDensity
    proposal: ProposalKernel
    kernel: ChainKernel
    hastings: bool = False


class _Blocks:
    """Pregenerates update packets block by block in the fixed order:
    proposal raw draws, estimator uniforms, accept uniforms."""

    __slots__ = ("_rng", "_prop", "_k", "_raw", "_u", "_v", "_i")

    def __init__(self, rng: np.random.Generator, prop: ProposalKernel, n_uniforms: int):
        self._rng = rng
        self._prop = prop
        self._k = n_uniforms
        self._i = BLOCK  # force refill on first use
        self._raw = self._u = self._v = None

    def _refill(self) -> None:
        self._raw = self._prop.raw_block(self._rng, BLOCK)
        self._u = self._rng.random((BLOCK, self._k))
        self._v = np.maximum(self._rng.random(BLOCK), 5e-324)
        self._i = 0

    def next(self):
        if self._i >= BLOCK:
            self._refill()
        i = self._i
        self._i = i + 1
        return self._raw[i], self._u[i], float(self._v[i])


def _hastings_term(cfg, theta, cand) -> float:
    if cfg.hastings and not cfg.proposal.symmetric:
        return cfg.proposal.log_q(cand, theta) - cfg.proposal.log_q(theta, cand)
    return 0.0


# ---------------------------------------------------------------------------
# Single-step coupled update
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoupledState:
    """Paired chain state after update t (t = 0 is the shared start)."""

    t: int
    theta_exact: object
    theta_approx: object
    b: bool
    coalesced: bool
    alpha_exact: float
    alpha_approx: float
    separated: bool  # any mark seen so far


def coupled_init(theta0) -> CoupledState:
    return CoupledState(0, theta0, theta0, False, False, 1.0, 1.0, False)


def coupled_step(cc: CoupledConfig, st: CoupledState, draws: UpdateDraws) -> CoupledState:
    """Advance both chains with the same proposal raw draw, estimator
    uniforms and accept uniform; B = 1 exactly when the shared V falls
    between the two acceptance probabilities."""
    log_pi = cc.target.log_unnorm
    noise = cc.pair.noise_from_uniforms(draws.estimator_draws)
    logv = math.log(draws.accept_uniform)

    theta_e = st.theta_exact
    theta_a = st.theta_approx
    cand_e = cc.proposal.apply_draw(theta_e, draws.proposal_draw)
    lh_e = log_pi(cand_e) - log_pi(theta_e) + _hastings_term(cc, theta_e, cand_e)
    la_e = min(0.0, cc.pair.exact_exponent(lh_e, noise))

    if theta_a is theta_e:
        cand_a, lh_a = cand_e, lh_e
    else:
        cand_a = cc.proposal.apply_draw(theta_a, draws.proposal_draw)
        lh_a = log_pi(cand_a) - log_pi(theta_a) + _hastings_term(cc, theta_a, cand_a)
    la_a = min(0.0, cc.pair.approx_exponent(lh_a, noise))

    acc_e = logv <= la_e
    acc_a = logv <= la_a
    b = acc_e != acc_a

    new_e = cand_e if acc_e else theta_e
    new_a = cand_a if acc_a else theta_a
    if new_a is not new_e and new_a == new_e:
        new_a = new_e
    separated = st.separated or b
    coalesced = separated and new_a is new_e
    return CoupledState(
        st.t + 1, new_e, new_a, b, coalesced, math.exp(la_e), math.exp(la_a), separated
    )


# ---------------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------------


@dataclass
class ChainRun:
    states: np.ndarray | None
    accepted: np.ndarray | None
    final_state: object
    acceptance_rate: float


def run_chain(
    cfg: ChainConfig,
    n_updates: int,
    rng: np.random.Generator,
    init,
    record: bool = True,
) -> ChainRun:
    """Run one chain; states are recorded after each update."""
    log_pi = cfg.target.log_unnorm
    apply_draw = cfg.proposal.apply_draw
    noise_fn = cfg.kernel.noise_from_uniforms
    exponent = cfg.kernel.exponent
    stream = _Blocks(rng, cfg.proposal, cfg.kernel.n_uniforms)

    theta = init
    lp = log_pi(theta)
    n_acc = 0
    states = np.empty((n_updates, cfg.target.dim)) if record else None
    accepted = np.empty(n_updates, dtype=bool) if record else None

    for t in range(n_updates):
        raw, u, v = stream.next()
        cand = apply_draw(theta, raw)
        lpc = log_pi(cand)
        lh = lpc - lp + _hastings_term(cfg, theta, cand)
        la = exponent(lh, noise_fn(u))
        if la > 0.0:
            la = 0.0
        acc = math.log(v) <= la
        if acc:
            theta = cand
            lp = lpc
            n_acc += 1
        if record:
            states[t] = theta
            accepted[t] = acc

    return ChainRun(
        states=states,
        accepted=accepted,
        final_state=theta,
        acceptance_rate=n_acc / n_updates if n_updates else 0.0,
    )


@dataclass
class CoupledRun:
    n_updates: int
    sum_exact: np.ndarray
    sum_approx: np.ndarray
    b: np.ndarray
    coalesced: np.ndarray
    alpha_exact: np.ndarray
    alpha_approx: np.ndarray
    events: np.ndarray  # 1-based update indices with B_t = 1
    identical_fraction: float
    final: CoupledState


def run_coupled(
    cc: CoupledConfig, n_updates: int, rng: np.random.Generator, init
) -> CoupledRun:
    """Free evolution of the coupled pair: after a separation both chains
    keep running on the same raw numbers (independence samplers may
    coalesce; random walks shadow each other)."""
    stream = _Blocks(rng, cc.proposal, cc.pair.n_uniforms)
    st = coupled_init(init)

    sum_e = np.empty(n_updates)
    sum_a = np.empty(n_updates)
    b = np.empty(n_updates, dtype=bool)
    coal = np.empty(n_updates, dtype=bool)
    al_e = np.empty(n_updates)
    al_a = np.empty(n_updates)
    identical = 0
    events: list[int] = []

    for t in range(n_updates):
        raw, u, v = stream.next()
        st = coupled_step(cc, st, UpdateDraws(raw, u, v))
        sum_e[t] = sum(st.theta_exact)
        sum_a[t] = sum(st.theta_approx)
        b[t] = st.b
        coal[t] = st.coalesced
        al_e[t] = st.alpha_exact
        al_a[t] = st.alpha_approx
        if st.b:
            events.append(st.t)
        if st.theta_approx is st.theta_exact:
            identical += 1

    return CoupledRun(
        n_updates=n_updates,
        sum_exact=sum_e,
        sum_approx=sum_a,
        b=b,
        coalesced=coal,
        alpha_exact=al_e,
        alpha_approx=al_a,
        events=np.asarray(events, dtype=int),
        identical_fraction=identical / n_updates if n_updates else 0.0,
        final=st,
    )


@dataclass
class MarkRun:
    """Stationary mark process: the approximate chain is re-merged onto the
    exact chain after every mark, so B_t is a function of the single exact
    chain and inter-mark intervals estimate the separation return time."""

    n_updates: int
    event_times: np.ndarray
    gap_sum: float
    gap_sumsq: float
    final_state: object


def run_marks(
    cc: CoupledConfig,
    rng: np.random.Generator,
    init,
    events_target: int = 120,
    min_updates: int = 2000,
    max_updates: int = 4_000_000,
) -> MarkRun:
    """Advance the exact chain, computing both acceptance probabilities at
    every update; stop once ``events_target`` marks and ``min_updates``
    updates are reached (or at ``max_updates``)."""
    log_pi = cc.target.log_unnorm
    apply_draw = cc.proposal.apply_draw
    noise_fn = cc.pair.noise_from_uniforms
    exact_exp = cc.pair.exact_exponent
    approx_exp = cc.pair.approx_exponent
    stream = _Blocks(rng, cc.proposal, cc.pair.n_uniforms)

    theta = init
    lp = log_pi(theta)
    events: list[int] = []
    gap_sum = 0.0
    gap_sumsq = 0.0
    t = 0
    while t < max_updates:
        t += 1
        raw, u, v = stream.next()
        cand = apply_draw(theta, raw)
        lpc = log_pi(cand)
        lh = lpc - lp + _hastings_term(cc, theta, cand)
        noise = noise_fn(u)
        la_e = min(0.0, exact_exp(lh, noise))
        la_a = min(0.0, approx_exp(lh, noise))
        gap = abs(math.exp(la_e) - math.exp(la_a))
        gap_sum += gap
        gap_sumsq += gap * gap
        logv = math.log(v)
        acc_e = logv <= la_e
        if acc_e != (logv <= la_a):
            events.append(t)
        if acc_e:
            theta = cand
            lp = lpc
        if t >= min_updates and len(events) >= events_target:
            break

    return MarkRun(
        n_updates=t,
        event_times=np.asarray(events, dtype=int),
        gap_sum=gap_sum,
        gap_sumsq=gap_sumsq,
        final_state=theta,
    )


def first_separation_time(
    cc: CoupledConfig, rng: np.random.Generator, init, cap: int = 1_000_000
) -> int | None:
    """Updates until the chains first decide differently; None if censored
    at ``cap``. Counts the first update as 1."""
    log_pi = cc.target.log_unnorm
    apply_draw = cc.proposal.apply_draw
    noise_fn = cc.pair.noise_from_uniforms
    exact_exp = cc.pair.exact_exponent
    approx_exp = cc.pair.approx_exponent
    stream = _Blocks(rng, cc.proposal, cc.pair.n_uniforms)

    theta = init
    lp = log_pi(theta)
    for t in range(1, cap + 1):
        raw, u, v = stream.next()
        cand = apply_draw(theta, raw)
        lpc = log_pi(cand)
        lh = lpc - lp + _hastings_term(cc, theta, cand)
        noise = noise_fn(u)
        la_e = min(0.0, exact_exp(lh, noise))
        la_a = min(0.0, approx_exp(lh, noise))
        logv = math.log(v)
        acc_e = logv <= la_e
        if acc_e != (logv <= la_a):
            return t
        if acc_e:
            theta = cand
            lp = lpc
    return None


def equilibrium_starts(
    cfg: ChainConfig,
    n_starts: int,
    rng: np.random.Generator,
    init,
    spacing: int = 25,
) -> list:
    """Approximately independent equilibrium draws: continue the exact chain
    and snapshot every ``spacing`` updates. Burn-in is the caller's job."""
    log_pi = cfg.target.log_unnorm
    apply_draw = cfg.proposal.apply_draw
    noise_fn = cfg.kernel.noise_from_uniforms
    exponent = cfg.kernel.exponent
    stream = _Blocks(rng, cfg.proposal, cfg.kernel.n_uniforms)

    theta = init
    lp = log_pi(theta)
    out = []
    for _ in range(n_starts):
        for _ in range(spacing):
            raw, u, v = stream.next()
            cand = apply_draw(theta, raw)
            lpc = log_pi(cand)
            lh = lpc - lp + _hastings_term(cfg, theta, cand)
            la = exponent(lh, noise_fn(u))
            if la > 0.0:
                la = 0.0
            if math.log(v) <= la:
                theta = cand
                lp = lpc
        out.append(theta)
    return out


# ---------------------------------------------------------------------------
# Separation-time estimators
# ---------------------------------------------------------------------------


class InsufficientEventsError(RuntimeError):
    """Too few separation events to report a return-time estimate."""


@dataclass
class Estimate:
    value: float
    se: float
    n: int
    note: str = ""


def rho_hat1(alpha_exact: np.ndarray, alpha_approx: np.ndarray) -> Estimate:
    """Reciprocal of the mean absolute acceptance gap; SE by the delta
    method from the SE of the mean gap."""
    gaps = np.abs(np.asarray(alpha_exact, dtype=float) - np.asarray(alpha_approx, dtype=float))
    n = len(gaps)
    if n < 2:
        raise ValueError("need at least two acceptance pairs")
    mean_gap = float(gaps.mean())
    if mean_gap == 0.0:
        return Estimate(math.inf, math.inf, n, "mean acceptance gap is zero; the chains never separate")
    se_gap = float(gaps.std(ddof=1)) / math.sqrt(n)
    return Estimate(1.0 / mean_gap, se_gap / mean_gap**2, n)


def _rho1_from_moments(n: int, gap_sum: float, gap_sumsq: float) -> Estimate:
    mean_gap = gap_sum / n
    if mean_gap == 0.0:
        return Estimate(math.inf, math.inf, n, "mean acceptance gap is zero; the chains never separate")
    var_gap = max(0.0, (gap_sumsq - n * mean_gap * mean_gap) / (n - 1))
    se_gap = math.sqrt(var_gap / n)
    return Estimate(1.0 / mean_gap, se_gap / mean_gap**2, n)


def rho_hat2(event_times: Sequence[int], min_events: int = 30) -> Estimate:
    """Mean interval between separation marks (Kac recurrence: the mean
    return time of a stationary mark process is 1/Pr(mark))."""
    times = np.asarray(event_times, dtype=float)
    if len(times) < min_events:
        raise InsufficientEventsError(
            f"{len(times)} separation events < required {min_events}"
        )
    intervals = np.diff(times)
    s = len(intervals)
    return Estimate(float(intervals.mean()), float(intervals.std(ddof=1)) / math.sqrt(s), s)


def tau_hat(times: Sequence[int], n_censored: int = 0, cap: int | None = None) -> Estimate:
    """Mean and SE of replicated first-separation times."""
    t = np.asarray(times, dtype=float)
    if len(t) < 2:
        raise ValueError("need at least two uncensored replicates")
    note = ""
    if n_censored:
        note = f"{n_censored} replicates censored at cap {cap}"
    return Estimate(float(t.mean()), float(t.std(ddof=1)) / math.sqrt(len(t)), len(t), note)


@dataclass
class SeparationStats:
    rho_hat1: float
    rho_hat2: float
    tau_hat: float
    se_rho1: float
    se_rho2: float
    se_tau: float
    n_events: int
    n_replicates: int
    censored_count: int
    notes: str = ""


def separation_stats(
    cc: CoupledConfig,
    seed: int,
    init,
    burn_in: int = 10_000,
    replicates: int = 1000,
    spacing: int = 25,
    cap: int = 1_000_000,
    events_target: int = 120,
    mark_min_updates: int = 2000,
    m_index: int = 0,
    threads: int = 1,
) -> SeparationStats:
    """Full separation-time measurement for one configuration.

    One burn-in run seeds both the mark run (rho estimates) and the
    equilibrium snapshots from which tau replicates start; each replicate
    runs on its own deterministically derived stream, so results do not
    depend on the execution order or ``threads``.
    """
    exact = ChainConfig(cc.target, cc.proposal, exact_kernel(cc.pair), cc.hastings)
    state0 = run_chain(
        exact, burn_in, streams.substream(seed, streams.BURNIN, m_index), init, record=False
    ).final_state

    marks = run_marks(
        cc,
        streams.substream(seed, streams.MARKS, m_index),
        state0,
        events_target=events_target,
        min_updates=max(mark_min_updates, 1000),
    )
    rho1 = _rho1_from_moments(marks.n_updates, marks.gap_sum, marks.gap_sumsq)
    rho2 = rho_hat2(marks.event_times)

    starts = equilibrium_starts(
        exact,
        replicates,
        streams.substream(seed, streams.EQUILIBRIUM, m_index),
        state0,
        spacing=spacing,
    )
    times = _tau_times(cc, seed, m_index, starts, cap, threads)
    censored = sum(1 for t in times if t is None)
    tau = tau_hat([t for t in times if t is not None], censored, cap)

    return SeparationStats(
        rho_hat1=rho1.value,
        rho_hat2=rho2.value,
        tau_hat=tau.value,
        se_rho1=rho1.se,
        se_rho2=rho2.se,
        se_tau=tau.se,
        n_events=len(marks.event_times),
        n_replicates=len(starts),
        censored_count=censored,
        notes="; ".join(s for s in (rho1.note, tau.note) if s),
    )


def _tau_times(cc, seed, m_index, starts, cap, threads) -> list:
    if threads <= 1:
        return [
            first_separation_time(
                cc, streams.substream(seed, streams.TAU, m_index, r), starts[r], cap
            )
            for r in range(len(starts))
        ]
    from concurrent.futures import ThreadPoolExecutor

    def work(r: int):
        return first_separation_time(
            cc, streams.substream(seed, streams.TAU, m_index, r), starts[r], cap
        )

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, range(len(starts))))


# ---------------------------------------------------------------------------
# Sweeps over estimator sample size m
# ---------------------------------------------------------------------------


@dataclass
class SweepRow:
    m: int
    stats: SeparationStats


@dataclass
class SweepResult:
    pair: str
    proposal: str
    rows: list[SweepRow]
    regression: RegressionResult | None  # log tau-hat vs log m


def septime_sweep(
    m_list: Sequence[int],
    make_pair: Callable[[int], PairKernel],
    target: TargetDensity,
    proposal: ProposalKernel,
    proposal_name: str,
    seed: int,
    init,
    hastings: bool = False,
    replicates: int = 500,
    burn_in: int = 10_000,
    spacing: int = 25,
    cap: int = 1_000_000,
    events_target: int = 120,
    threads: int = 1,
) -> SweepResult:
    """One row of separation statistics per m, plus a log-log regression of
    tau-hat on m when the sweep has at least two entries."""
    m_list = list(m_list)
    if not m_list:
        raise ValueError("m_list must not be empty")
    if any(b <= a for a, b in zip(m_list, m_list[1:])):
        raise ValueError("m_list must be strictly increasing")

    rows = []
    pair_name = None
    for m in m_list:
        pair = make_pair(m)
        pair_name = pair.name
        cc = CoupledConfig(target, proposal, pair, hastings)
        stats = separation_stats(
            cc,
            seed,
            init,
            burn_in=burn_in,
            replicates=replicates,
            spacing=spacing,
            cap=cap,
            events_target=events_target,
            m_index=m,
            threads=threads,
        )
        rows.append(SweepRow(m=m, stats=stats))

    regression = None
    if len(rows) >= 2:
        regression = loglog_regression(
            np.array([r.m for r in rows], dtype=float),
            np.array([r.stats.tau_hat for r in rows]),
        )
    return SweepResult(pair=pair_name, proposal=proposal_name, rows=rows, regression=regression)
