import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracle_values import (
    BANDIT_M1E4,
    BANDIT_M4E4,
    BATCH_WORKED,
    BATCH_ZERO_M10,
    COR1_K1,
    COR2_LOCAL_K2,
    COR2_M1,
    COR3_ZERO,
    E_MINUS_2,
    HYPE_TWO_POINT,
    LOG2,
    LOG4,
    MARTINGALE_DELTA_NEAR_ONE,
    ONLINE_TWO_STEPS,
    SELDIN_ZERO,
)
from pacsuper.certificates import (
    BoundCertificate,
    EmpiricalMoments,
    Kind,
    OnlineStep,
    bandit_regret_bound,
    baseline_catoni,
    baseline_hype,
    baseline_online_bounded,
    baseline_seldin,
    batch_bound,
    cor1_bound,
    cor2_bounds,
    cor3_bound,
    hype_exp_moment_log,
    martingale_bound,
    online_bound,
    optimal_lambda_oracle,
    union_bound_weights,
)
from pacsuper.errors import DomainError

REL = 1e-9
ZERO = EmpiricalMoments(0.0, 0.0, 0.0, 10)


def close(a, b):
    return a == pytest.approx(b, rel=REL)


def test_martingale_values():
    assert close(martingale_bound(0.0, 0.5, 1.0, 0.0, 0.0).value, LOG4)
    assert close(martingale_bound(0.0, 1 - 1e-12, 1.0, 0.0, 0.0).value, MARTINGALE_DELTA_NEAR_ONE)


def test_martingale_decreasing_in_delta_and_kl_inf():
    vals = [martingale_bound(0.2, d, 0.5, 1.0, 1.0).value for d in (0.01, 0.1, 0.5, 0.9)]
    assert vals == sorted(vals, reverse=True)
    assert martingale_bound(math.inf, 0.1, 1.0, 0.0, 0.0).value == math.inf


@pytest.mark.parametrize("delta", [0.0, 1.0, -0.1, 1.5])
def test_delta_domain(delta):
    with pytest.raises(DomainError):
        martingale_bound(0.0, delta, 1.0, 0.0, 0.0)


def test_lambda_and_kl_domain():
    with pytest.raises(DomainError):
        martingale_bound(0.0, 0.1, 0.0, 0.0, 0.0)
    with pytest.raises(DomainError):
        martingale_bound(-0.1, 0.1, 1.0, 0.0, 0.0)


def test_optimal_lambda():
    assert close(optimal_lambda_oracle(0.0, 2 * math.exp(-2), 4.0), 1.0)


@settings(max_examples=100, deadline=None)
@given(
    st.floats(0, 10),
    st.floats(0.01, 0.99),
    st.floats(0.1, 100),
    st.floats(0.05, 20),
)
def test_optimal_lambda_minimizes(kl, delta, var, other):
    lam = optimal_lambda_oracle(kl, delta, var)
    best = martingale_bound(kl, delta, lam, var, 0.0).value
    assert best <= martingale_bound(kl, delta, other, var, 0.0).value + 1e-9 * best


def test_batch_values():
    assert close(batch_bound(ZERO, 0.0, 0.5, 1.0).value, BATCH_ZERO_M10)
    c = batch_bound(EmpiricalMoments(0.3, 0.2, 0.25, 100), 1.0, 0.1, 0.5)
    assert close(c.value, BATCH_WORKED)
    assert c.kind is Kind.BATCH
    assert close(c.recompute(), c.value)


def test_batch_infinite_quad():
    assert batch_bound(EmpiricalMoments(0.3, 0.2, math.inf, 100), 1.0, 0.1, 0.5).value == math.inf


def test_online_values():
    assert close(online_bound([OnlineStep(0.0, 0.0, 0.0, 0.0)], 0.5, 1.0).value, LOG2)
    steps = [OnlineStep(1.0, 0.0, 0.0, 0.5), OnlineStep(2.0, 0.0, 0.0, 0.5)]
    assert close(online_bound(steps, 0.1, 1.0).value, ONLINE_TWO_STEPS)
    with pytest.raises(DomainError):
        online_bound([], 0.1, 1.0)


def test_bandit_values():
    assert close(bandit_regret_bound(2, 0.1, 10_000, 0.05).value, BANDIT_M1E4)
    assert close(bandit_regret_bound(2, 0.1, 40_000, 0.05).value, BANDIT_M4E4)


def test_bandit_scaling_and_terms():
    a = bandit_regret_bound(3, 0.2, 500, 0.1)
    b = bandit_regret_bound(3, 0.2, 2000, 0.1)
    assert close(b.value, a.value / 2)
    # the chosen lambda balances the variance term against the other two
    assert close(a.variance_term, a.kl_term + a.confidence_term)
    c = bandit_regret_bound(3, 0.2, 500, 0.1, second_moment_bound=4.0)
    assert close(c.value, 2 * a.value)


def test_bandit_domain():
    with pytest.raises(DomainError):
        bandit_regret_bound(2, 0.1, 100, 0.6)
    with pytest.raises(DomainError):
        bandit_regret_bound(1, 0.1, 100, 0.5)
    with pytest.raises(DomainError):
        bandit_regret_bound(2, 0.1, 0, 0.05)


def test_union_weights():
    w = union_bound_weights(0.3, 10)
    assert close(w[0], 0.15)
    assert w.sum() < 0.3
    assert close(union_bound_weights(0.3, 100_000).sum(), 0.3 * (1 - 1 / 100_001))


def test_grid_union_bound_values():
    assert close(cor1_bound(0.0, 1, 0.5, 1.0).value, COR1_K1)
    assert cor1_bound(0.0, 1, 0.5, 1.0).value > martingale_bound(0.0, 0.5, 1.0, 0.0, 0.0).value


def test_bounded_loss_pair_values():
    b = cor2_bounds(0.0, 0.5, 1.0, 1, 1.0)
    assert close(b.anytime.value, COR2_M1)
    assert close(b.local.value, COR2_M1)
    assert close(cor2_bounds(0.0, 0.5, 0.1, 100, 2.0).local.value, COR2_LOCAL_K2)


def test_envelope_moment_bound_values():
    z = EmpiricalMoments(0.0, 0.0, 0.0, 100)
    base = cor3_bound(z, 0.0, 0.5, 0.5, 0.0)
    assert close(base.value, COR3_ZERO)
    assert close(cor3_bound(z, 0.0, 0.5, 0.5, 4.0).value - base.value, 0.2)
    with pytest.raises(DomainError):
        cor3_bound(z, 0.0, 0.5, 1.5, 0.0)


def test_bernstein_baseline_values():
    assert close(baseline_seldin(0.0, 1, 0.5, 1.0, 0.0).value, SELDIN_ZERO)
    diff = baseline_seldin(0.0, 1, 0.5, 1.0, 1.0).value - baseline_seldin(0.0, 1, 0.5, 1.0, 0.0).value
    assert close(diff, E_MINUS_2)
    assert not baseline_seldin(0.0, 1, 0.5, 2.0, 0.0, c_m=1.0).valid
    assert baseline_seldin(0.0, 1, 0.5, 1.0, 0.0, c_m=1.0).valid


def test_bounded_baselines_at_zero():
    assert close(baseline_catoni(0.0, 0.5, 1.0, 1, 0.0, 0.0).value, LOG2)
    assert close(baseline_online_bounded(0.0, 0.0, 0.5, 1.0, 1, 0.0).value, LOG2)


def test_envelope_exponential_baseline_values():
    assert close(hype_exp_moment_log([0.5, 0.5], [1.0, 2.0], 1, 0.0), HYPE_TWO_POINT)
    c = baseline_hype(0.0, 0.5, 0.0, 1, HYPE_TWO_POINT, 0.0)
    assert close(c.value, LOG2 + HYPE_TWO_POINT)


def test_local_bound_vs_bounded_baseline_gap():
    for lam, m, K, kl in [(0.3, 50, 1.0, 0.2), (1.0, 7, 2.5, 0.0)]:
        local = cor2_bounds(kl, 0.1, lam, m, K, 0.4).local
        cat = baseline_catoni(kl, 0.1, lam, m, K, 0.4)
        assert close(local.confidence_term - cat.confidence_term, math.log(2) / lam)
        assert close(local.variance_term, 2 * cat.variance_term)


def test_certificate_round_trip_and_consistency():
    c = batch_bound(EmpiricalMoments(0.3, 0.2, 0.25, 100), 1.0, 0.1, 0.5)
    assert BoundCertificate.from_dict(c.to_dict()) == c
    with pytest.raises(DomainError):
        BoundCertificate(1.0, 0.1, 0.1, 0.1, 1.0, 0.1, 1, Kind.BATCH)
    with pytest.raises(DomainError):
        BoundCertificate(1.0, -0.1, 0.6, 0.5, 1.0, 0.1, 1, Kind.BATCH)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(0, 50),
    st.floats(1e-4, 0.999),
    st.floats(1e-3, 10),
    st.floats(0, 1e3),
    st.floats(0, 1e3),
)
def test_terms_sum_to_value(kl, delta, lam, b, a):
    c = martingale_bound(kl, delta, lam, b, a)
    assert np.isclose(c.recompute(), c.value, rtol=1e-12)
    assert c.value >= 0
