import math

import numpy as np
import pytest
from scipy.special import ndtr

from rmcmc.core import (
    avg_accept_prob,
    penalty_r_spec,
    std_log_ratio,
    toy_r_spec,
    trivial_r_spec,
)
from rmcmc.estimators import inv_gamma_shifted
from rmcmc.targets import (
    discrete_target,
    mixture_sample,
    mixture_target,
    rw_proposal,
    uniform_discrete_proposal,
)
from rmcmc.verify import (
    broken_involution_spec,
    check_db_average,
    check_vdb,
    epsilon_bound,
    minorization_check,
    naive_avg_accept,
    peskun_check,
    stationary_vector,
    total_variation,
    transition_matrix,
)
from rmcmc import rng as streams

TARGET = mixture_target()
PROP = rw_proposal(1.0)


def _points(spec, n, seed):
    rng = streams.substream(seed, 0)
    pts = []
    for _ in range(n):
        th = mixture_sample(rng)
        thp = PROP.sample(th, rng)
        pts.append((th, thp, spec.sample_xi(th, thp, rng)))
    return pts


def test_vdb_toy_spec():
    spec = toy_r_spec(TARGET)
    rep = check_vdb(TARGET, PROP, spec, _points(spec, 1000, 41))
    assert rep.n_points == 1000
    assert rep.max_abs_residual < 1e-10


def test_vdb_penalty_spec():
    spec = penalty_r_spec(1.0, 8)
    rep = check_vdb(TARGET, PROP, spec, _points(spec, 1000, 42))
    assert rep.max_abs_residual < 1e-10


def test_vdb_broken_involution_fails_loudly():
    spec = toy_r_spec(TARGET)
    rep = check_vdb(TARGET, PROP, broken_involution_spec(spec), _points(spec, 300, 43))
    assert rep.max_abs_residual > 1e-2
    assert rep.worst_case is not None


def test_db_average_toy_three_state():
    t = discrete_target([0.2, 0.3, 0.5])
    p = uniform_discrete_proposal(3)
    spec = toy_r_spec(t)
    pairs = [(i, j) for i in range(3) for j in range(3) if i != j]
    rep = check_db_average(
        t, p, lambda a, b: avg_accept_prob(spec, std_log_ratio(t, p, a, b), a, b), pairs
    )
    assert rep.max_abs_residual < 1e-8


def test_db_average_naive_control_fails():
    t = discrete_target([0.2, 0.3, 0.5])
    p = uniform_discrete_proposal(3)
    model = inv_gamma_shifted(4)
    pairs = [(i, j) for i in range(3) for j in range(3) if i != j]
    rep = check_db_average(
        t, p, lambda a, b: naive_avg_accept(model, std_log_ratio(t, p, a, b)), pairs
    )
    assert rep.max_abs_residual > 0.05  # materially imbalanced


def test_peskun_toy_on_mixture():
    spec = toy_r_spec(TARGET)
    v = peskun_check(spec, TARGET, PROP, 1000, streams.substream(44, 0), mixture_sample)
    assert v <= 1e-8


def test_peskun_trivial_randomization_equality():
    spec = trivial_r_spec()
    v = peskun_check(spec, TARGET, PROP, 50, streams.substream(44, 1), mixture_sample)
    assert abs(v) <= 1e-8


def test_penalty_strictly_below_standard_when_noisy():
    # sigma^2/m = 4 keeps the randomized acceptance well below min(1, h)
    spec = penalty_r_spec(16.0, 4)
    a_xi = avg_accept_prob(spec, 0.0, None, None)
    assert 1.0 - a_xi > 0.01
    # closed form: 2 Phi(-s/2)
    assert a_xi == pytest.approx(2.0 * ndtr(-1.0), abs=1e-8)


# ---------------------------------------------------------------------------
# minorization constant
# ---------------------------------------------------------------------------


def test_epsilon_penalty_closed_form():
    # Pr(Xi >= 1) = Pr(X >= v/2) = Phi(-sigma / (2 sqrt(m)))
    sigma2, m = 1.0, 4
    spec = penalty_r_spec(sigma2, m)
    eps, rows = epsilon_bound(spec, [((0.0,), (1.0,))], 100_000, streams.substream(45, 0))
    want = float(ndtr(-math.sqrt(sigma2) / (2.0 * math.sqrt(m))))
    assert abs(eps - want) <= 4.0 * rows[0].se


def test_epsilon_state_free_xi_constant_across_pairs():
    spec = penalty_r_spec(1.0, 8)
    pairs = [((0.0,), (1.0,)), ((5.0,), (-2.0,)), ((1.0,), (1.0,))]
    eps, rows = epsilon_bound(spec, pairs, 20_000, streams.substream(45, 1))
    assert 0.0 < eps < 1.0
    spread = max(r.prob for r in rows) - min(r.prob for r in rows)
    assert spread <= 4.0 * max(r.se for r in rows)


def test_epsilon_trivial_spec_degenerate_one():
    # identity involution with state-free xi: Xi identically 1 counts as >= 1
    spec = trivial_r_spec()
    eps, rows = epsilon_bound(spec, [((0.0,), (1.0,))], 2000, streams.substream(45, 2))
    assert eps == 1.0


def test_minorization_five_state():
    t = discrete_target([0.1, 0.15, 0.2, 0.25, 0.3])
    p = uniform_discrete_proposal(5)
    spec = toy_r_spec(t)
    pairs = [(i, j) for i in range(5) for j in range(5) if i != j]
    eps, _ = epsilon_bound(spec, pairs, 20_000, streams.substream(45, 3))
    ok, deficit, mat, mat_xi = minorization_check(t, p, spec, eps)
    assert ok and deficit <= 1e-9
    assert np.abs(mat.sum(axis=1) - 1.0).max() <= 1e-9
    assert np.abs(mat_xi.sum(axis=1) - 1.0).max() <= 1e-9
    # eps = 0 holds trivially
    ok0, deficit0, _, _ = minorization_check(t, p, spec, 0.0)
    assert ok0 and deficit0 <= 0.0


def test_transition_matrix_rejects_nonstochastic():
    t = discrete_target([0.5, 0.3, 0.2])
    p = uniform_discrete_proposal(3)
    with pytest.raises(ValueError, match="stochastic"):
        transition_matrix(t, p, lambda i, j: 2.5)


def test_stationary_vector_known_chain():
    mat = np.array([[0.9, 0.1], [0.3, 0.7]])
    pi = stationary_vector(mat)
    assert pi == pytest.approx([0.75, 0.25], abs=1e-12)


def test_naive_matrix_bias_shrinks_with_m():
    probs = [0.1, 0.15, 0.2, 0.25, 0.3]
    t = discrete_target(probs)
    p = uniform_discrete_proposal(5)
    tvs = []
    for m in (4, 16, 64):
        model = inv_gamma_shifted(m)
        mat = transition_matrix(
            t, p, lambda i, j: naive_avg_accept(model, std_log_ratio(t, p, i, j))
        )
        tvs.append(total_variation(stationary_vector(mat), probs))
    assert tvs[0] > tvs[1] > tvs[2] > 0.0
