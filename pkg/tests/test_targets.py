import math

import numpy as np
import pytest
from scipy.integrate import quad, trapezoid

from rmcmc.core import avg_accept_prob, penalty_r_spec, s_step, std_log_ratio, draw_update
from rmcmc.targets import (
    IsingGrid,
    discrete_target,
    independence_proposal,
    ising_grid_posterior,
    ising_likelihood_model,
    mixture_logpdf,
    mixture_sample,
    mixture_target,
    rw_proposal,
    sum_marginal_cdf,
    sum_marginal_pdf,
    uniform_discrete_proposal,
)
from rmcmc.verify import stationary_vector, transition_matrix
from rmcmc import rng as streams


def _mvn_logpdf(x, mu, cov):
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    cov = np.asarray(cov, dtype=float)
    d = x - mu
    return float(
        -np.log(2 * np.pi)
        - 0.5 * np.log(np.linalg.det(cov))
        - 0.5 * d @ np.linalg.solve(cov, d)
    )


COV1 = np.array([[1.0, 0.5], [0.5, 1.0]])
COV2 = np.array([[1.0, -0.5], [-0.5, 1.0]])


def test_covariances_positive_definite():
    assert np.linalg.det(COV1) == pytest.approx(0.75)
    assert np.linalg.det(COV2) == pytest.approx(0.75)
    assert np.all(np.linalg.eigvalsh(COV1) > 0)


def test_mixture_logpdf_at_first_mean():
    got = mixture_logpdf((3.0, 3.0))
    want = np.logaddexp(
        math.log(0.5) + _mvn_logpdf((3, 3), (3, 3), COV1),
        math.log(0.5) + _mvn_logpdf((3, 3), (6, 6), COV2),
    )
    assert got == pytest.approx(float(want), abs=1e-12)
    # dominant term is log(0.5 / (2 pi sqrt(0.75))) ~ log(0.5 * 0.18378)
    assert got == pytest.approx(math.log(0.5 * 0.18378), abs=1e-4)


def test_mixture_component_reflection_symmetry():
    # negating one displacement axis swaps the roles of the two covariances
    for delta in [(0.7, -0.3), (1.2, 0.4), (-0.5, -0.9)]:
        a = _mvn_logpdf((3 + delta[0], 3 + delta[1]), (3, 3), COV1)
        b = _mvn_logpdf((6 + delta[0], 6 - delta[1]), (6, 6), COV2)
        assert a == pytest.approx(b, abs=1e-12)


def test_mixture_far_tail_finite():
    v = mixture_logpdf((100.0, 100.0))
    assert math.isfinite(v) and v < -1000.0


def test_mixture_grid_normalization():
    # trapezoid rule on a wide grid; coarse bound 1e-4
    xs = np.linspace(-6.0, 15.0, 421)
    pdf = np.empty((len(xs), len(xs)))
    for i, x in enumerate(xs):
        for j, y in enumerate(xs):
            pdf[i, j] = math.exp(mixture_logpdf((x, y)))
    total = trapezoid(trapezoid(pdf, xs, axis=1), xs)
    assert total == pytest.approx(1.0, abs=1e-4)


def test_sum_marginal_closed_form():
    # theta1 + theta2 ~ 0.5 N(6, 3) + 0.5 N(12, 1)
    s = 6.0
    want = 0.5 / math.sqrt(2 * math.pi * 3.0) + 0.5 * math.exp(-18.0) / math.sqrt(2 * math.pi)
    assert sum_marginal_pdf(s) == pytest.approx(want, rel=1e-12)


def test_sum_marginal_normalized_and_modes():
    total, _ = quad(sum_marginal_pdf, -20.0, 40.0)
    assert total == pytest.approx(1.0, abs=1e-6)
    xs = np.linspace(0.0, 18.0, 3601)
    vals = np.array([sum_marginal_pdf(x) for x in xs])
    # two local maxima, near 6 and 12
    local_max = xs[1:-1][(vals[1:-1] > vals[:-2]) & (vals[1:-1] > vals[2:])]
    assert len(local_max) == 2
    assert abs(local_max[0] - 6.0) < 0.2 and abs(local_max[1] - 12.0) < 0.05


def test_sum_marginal_cdf_matches_pdf():
    for s in (3.0, 9.0, 12.5):
        num, _ = quad(sum_marginal_pdf, -30.0, s)
        assert float(sum_marginal_cdf(s)) == pytest.approx(num, abs=1e-8)


def test_mixture_sampler_moments():
    rng = streams.substream(21, 0)
    pts = np.array([mixture_sample(rng) for _ in range(40_000)])
    s = pts.sum(axis=1)
    assert s.mean() == pytest.approx(9.0, abs=0.06)
    assert s.var(ddof=1) == pytest.approx(11.0, rel=0.04)


# ---------------------------------------------------------------------------
# proposals
# ---------------------------------------------------------------------------


def test_independence_proposal_state_free_log_q():
    p = independence_proposal(2.0)
    assert not p.symmetric
    b = (4.0, 5.0)
    assert p.log_q((0.0, 0.0), b) == p.log_q((9.0, -3.0), b)


def test_independence_log_q_is_inflated_mixture_density():
    p = independence_proposal(2.0)
    b = (4.1, 5.3)
    want = np.logaddexp(
        math.log(0.5) + _mvn_logpdf(b, (3, 3), 2.0 * COV1),
        math.log(0.5) + _mvn_logpdf(b, (6, 6), 2.0 * COV2),
    )
    assert p.log_q((0.0, 0.0), b) == pytest.approx(float(want), abs=1e-12)


def test_independence_sampler_matches_log_q():
    # empirical mean/covariance of proposals match the inflated mixture
    p = independence_proposal(2.0)
    rng = streams.substream(21, 1)
    pts = np.array([p.sample((0.0, 0.0), rng) for _ in range(40_000)])
    assert pts.mean(axis=0) == pytest.approx([4.5, 4.5], abs=0.06)
    # var of each coordinate: 2*1 + between-component (1.5)^2 = 4.25
    assert pts.var(axis=0, ddof=1) == pytest.approx([4.25, 4.25], rel=0.05)


def test_rw_default_acceptance_band():
    # library default step: conventional acceptance window under s_step
    target = mixture_target()
    prop = rw_proposal(1.0)
    rng = streams.substream(21, 2)
    th = (3.0, 3.0)
    acc = 0
    n = 5000
    for _ in range(n):
        res = s_step(target, prop, th, draw_update(rng, prop, 0))
        th = res.state
        acc += res.accepted
    assert 0.2 <= acc / n <= 0.6


def test_discrete_target_validation():
    with pytest.raises(ValueError):
        discrete_target([0.2, 0.2])
    with pytest.raises(ValueError):
        discrete_target([-0.1, 1.1])


def test_uniform_discrete_proposal_covers_states():
    p = uniform_discrete_proposal(5)
    rng = streams.substream(21, 3)
    seen = {p.sample(0, rng) for _ in range(200)}
    assert seen == {0, 1, 2, 3, 4}
    assert p.log_q(0, 3) == pytest.approx(-math.log(5))


def test_discrete_penalty_matrix_stationary_equals_target():
    probs = [0.1, 0.15, 0.2, 0.25, 0.3]
    t = discrete_target(probs)
    p = uniform_discrete_proposal(5)
    spec = penalty_r_spec(1.0, 8)
    mat = transition_matrix(
        t, p, lambda i, j: avg_accept_prob(spec, std_log_ratio(t, p, i, j), i, j)
    )
    pi = stationary_vector(mat)
    assert np.abs(pi - probs).max() < 1e-8


# ---------------------------------------------------------------------------
# Ising grid
# ---------------------------------------------------------------------------


def test_ising_grid_shape():
    g = IsingGrid()
    assert g.n_states == 512
    assert g.bond_sums.min() == -12 and g.bond_sums.max() == 12
    # free boundary: all-up and all-down states hit all 12 bonds
    assert g.bond_sums[0] == 12 and g.bond_sums[511] == 12
    assert g.log_z(0.0) == pytest.approx(math.log(512.0))


def test_ising_likelihood_normalized():
    g = IsingGrid()
    theta = 0.4
    assert np.exp([g.log_lik(theta, x) for x in range(512)]).sum() == pytest.approx(1.0)


def test_ising_sampler_total_variation():
    g = IsingGrid()
    lik = ising_likelihood_model(g)
    theta = 1.0
    rng = streams.substream(21, 4)
    counts = np.bincount(
        [lik.exact_sampler(theta, rng) for _ in range(100_000)], minlength=512
    )
    tv = 0.5 * np.abs(counts / 100_000 - g.probs(theta)).sum()
    assert tv < 0.005


def test_ising_grid_posterior_enumeration():
    g = IsingGrid()
    theta_grid = np.linspace(0.1, 1.0, 19)
    data = 3
    post = ising_grid_posterior(g, theta_grid, data)
    assert post.sum() == pytest.approx(1.0)
    # independent recomputation through normalized likelihood values
    direct = np.array([math.exp(g.log_lik(t, data)) for t in theta_grid])
    direct /= direct.sum()
    assert np.abs(post - direct).max() < 1e-12
