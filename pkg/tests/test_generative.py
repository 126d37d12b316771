import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from opinionforge.errors import ParameterDomainError
from opinionforge.generative import (
    GroundTruth,
    draw_level,
    forward_generate_network,
    forward_sample_opinion,
    forward_sample_rating,
    marginal_rating_pmf,
    random_truth,
)
from opinionforge.model import (
    Behavior,
    LogitParams,
    Opinion,
    enumerate_compositions,
    expected_belief,
    multinomial_log_pmf,
    ordered_logit_pmf,
)

LOGIT4 = LogitParams(6.0, (1.5, -1.0, -3.5))


def chi2_pvalue(observed_levels, pmf) -> float:
    """Pearson goodness of fit, pooling cells with tiny expected counts into their neighbour."""
    pmf = np.asarray(pmf, dtype=float)
    counts = np.bincount(observed_levels, minlength=pmf.size)[: pmf.size]
    n = counts.sum()
    keep = pmf * n >= 5
    obs = np.append(counts[keep], counts[~keep].sum())
    exp = np.append(pmf[keep] * n, pmf[~keep].sum() * n)
    if exp[-1] == 0:
        assert obs[-1] == 0
        obs, exp = obs[:-1], exp[:-1]
    return float(stats.chisquare(obs, exp).pvalue)


def test_degenerate_behavior_gives_single_composition():
    rng = np.random.default_rng(0)
    for _ in range(100):
        assert forward_sample_opinion(Behavior(1.0, 0.0, 0.0), 5, rng) == Opinion(5, 0, 0)


def test_binomial_frequency_at_lambda_one():
    rng = np.random.default_rng(1)
    beh = Behavior(0.5, 0.5, 0.0)
    ops = [forward_sample_opinion(beh, 1, rng) for _ in range(10**6)]
    assert abs(np.mean([o.alpha for o in ops]) - 0.5) < 0.002
    assert all(o.gamma == 0 and o.lam == 1 for o in ops)


def test_opinion_composition_law_chi2():
    rng = np.random.default_rng(2)
    beh = Behavior(0.6, 0.3, 0.1)
    comps = enumerate_compositions(4)
    index = {c: k for k, c in enumerate(comps)}
    draws = np.array([index[forward_sample_opinion(beh, 4, rng)] for _ in range(10**5)])
    pmf = np.exp([multinomial_log_pmf(c, beh) for c in comps])
    assert chi2_pvalue(draws, pmf) > 0.001


def test_lambda_below_one_rejected():
    with pytest.raises(ParameterDomainError):
        forward_sample_opinion(Behavior(1.0, 0.0, 0.0), 0, np.random.default_rng(0))


def test_flat_logit_is_fair_coin():
    rng = np.random.default_rng(3)
    logit = LogitParams(0.0, (0.0,))
    draws = np.array([forward_sample_rating(Opinion(1, 1, 1), 0.5, logit, rng) for _ in range(10**5)])
    assert abs(np.mean(draws == 1) - 0.5) < 0.005


def test_saturated_first_cutpoint_never_draws_level_one():
    rng = np.random.default_rng(4)
    logit = LogitParams(1.0, (50.0, 0.0, -1.0))
    draws = [forward_sample_rating(Opinion(0, 3, 0), 0.0, logit, rng) for _ in range(10**4)]
    assert 1 not in draws


def test_rating_law_chi2():
    rng = np.random.default_rng(5)
    op = Opinion(2, 1, 1)
    assert expected_belief(op, 0.5) == 0.625
    draws = np.array([forward_sample_rating(op, 0.5, LOGIT4, rng) for _ in range(10**5)])
    assert chi2_pvalue(draws - 1, ordered_logit_pmf(0.625, LOGIT4)) > 0.001


def test_draw_level_inversion_boundaries():
    pmf = np.array([0.25, 0.0, 0.75])
    assert draw_level(pmf, 0.0) == 1
    assert draw_level(pmf, 0.2499) == 1
    assert draw_level(pmf, 0.25) == 3
    assert draw_level(pmf, 1.0 - 1e-16) == 3


def test_empty_edge_set():
    truth = GroundTruth([[1 / 3] * 3], [0.5], {}, LOGIT4)
    ratings, latents = forward_generate_network(truth, seed=0)
    assert ratings.num_edges == 0
    assert latents == {}


def test_saturated_edge_closed_form():
    truth = GroundTruth([[1.0, 0.0, 0.0]], [0.3], {(0, 0): 3}, LogitParams(10.0, (-5.0, -6.0, -7.0)))
    top = np.mean([forward_generate_network(truth, seed=s)[0].ratings[0] == 4 for s in range(10**4)])
    want = 1 / (1 + np.exp(-3.0))
    assert want == pytest.approx(0.953, abs=1e-3)
    # binomial standard error at n = 10^4 is about 0.0021
    assert abs(top - want) < 0.01


def test_desk_scale_structure():
    truth = random_truth(30, 20, LOGIT4, np.random.default_rng(6))
    ratings, latents = forward_generate_network(truth, seed=6)
    assert ratings.num_edges == 600
    assert set(np.unique(ratings.ratings)) <= {1, 2, 3, 4}
    assert len(latents) == 600
    for (i, j), op in latents.items():
        assert op.lam == truth.lambdas[(i, j)]
    np.testing.assert_array_equal(ratings.lambdas, [truth.lambdas[e] for e in ratings.edges])


def test_marginal_rating_law_chi2():
    beh = Behavior(0.5, 0.2, 0.3)
    truth = GroundTruth([beh.as_array()], [0.4], {(0, 0): 3}, LOGIT4)
    pmf = marginal_rating_pmf(beh, 3, 0.4, LOGIT4)
    assert pmf.sum() == pytest.approx(1.0, abs=1e-12)
    draws = np.array([forward_generate_network(truth, seed=s)[0].ratings[0] for s in range(20000)])
    assert chi2_pvalue(draws - 1, pmf) > 0.001


def test_generation_is_deterministic_and_order_free():
    truth = random_truth(4, 3, LOGIT4, np.random.default_rng(7), density=0.7)
    a, la = forward_generate_network(truth, seed=11)
    b, lb = forward_generate_network(truth, seed=11)
    np.testing.assert_array_equal(a.ratings, b.ratings)
    assert la == lb
    reordered = GroundTruth(truth.behaviors, truth.biases, dict(reversed(list(truth.lambdas.items()))), truth.logit)
    c, lc = forward_generate_network(reordered, seed=11)
    np.testing.assert_array_equal(a.ratings, c.ratings)
    assert la == lc


def test_ground_truth_validation():
    with pytest.raises(ParameterDomainError):
        GroundTruth([[0.5, 0.5, 0.5]], [0.5], {}, LOGIT4)
    with pytest.raises(ParameterDomainError):
        GroundTruth([[1, 0, 0]], [1.5], {}, LOGIT4)
    with pytest.raises(ParameterDomainError):
        GroundTruth([[1, 0, 0]], [0.5], {(0, 0): 0}, LOGIT4)
    with pytest.raises(ParameterDomainError):
        GroundTruth([[1, 0, 0]], [0.5], {(0, 0): 31}, LOGIT4, lambda_max=30)
    with pytest.raises(ParameterDomainError):
        GroundTruth([[1, 0, 0]], [0.5], {(1, 0): 2}, LOGIT4)


@settings(max_examples=40, deadline=None)
@given(
    b=st.floats(0, 1), d=st.floats(0, 1),
    lam=st.integers(1, 12), a=st.floats(0, 1),
    eps=st.floats(-10, 10), t0=st.floats(-5, 5), gaps=st.lists(st.floats(0, 3), min_size=1, max_size=3),
)
def test_marginal_rating_pmf_is_a_distribution(b, d, lam, a, eps, t0, gaps):
    d = d * (1 - b)
    beh = Behavior(b, d, max(0.0, 1 - b - d))
    theta = tuple(t0 - np.cumsum([0.0] + gaps))
    pmf = marginal_rating_pmf(beh, lam, a, LogitParams(eps, theta))
    assert np.all(pmf >= 0)
    assert pmf.sum() == pytest.approx(1.0, abs=1e-12)
