import numpy as np
import pytest

from pacsuper._rng import trial_rng
from pacsuper.bandit import (
    BanditEnv,
    BanditTrace,
    EpsSchedule,
    PolicySchedule,
    apply_round,
    variance_budget_ratio,
    lemma6_check,
    play_round,
    regret_stats,
    run_bandit_experiment,
    select_actions,
    simulate_batch,
)
from pacsuper.certificates import bandit_regret_bound
from pacsuper.distributions import Distribution
from pacsuper.errors import DomainError
from pacsuper.measures import Categorical, HypothesisSpace

LOGN = BanditEnv((Distribution.lognormal(-1.0, 0.5), Distribution.lognormal(-0.5, 0.5)))
UNIFORM_POLICY = PolicySchedule("uniform", EpsSchedule("constant", 0.5))


def test_env_properties():
    assert LOGN.K == 2
    assert LOGN.best_arm == 1
    assert LOGN.gaps[1] == 0.0 and LOGN.gaps[0] > 0
    assert LOGN.C == pytest.approx(max(LOGN.second_moments))
    tie = BanditEnv((Distribution.constant(1.0), Distribution.constant(1.0)))
    assert tie.best_arm == 0
    with pytest.raises(DomainError):
        BanditEnv((Distribution.constant(1.0), Distribution.constant(2.0)), C=1.0)
    with pytest.raises(DomainError):
        BanditEnv((Distribution.pareto(2.0), Distribution.constant(0.0)))


def test_importance_weight_definition():
    env = BanditEnv(tuple(Distribution.constant(v) for v in (2.0, 1.0, 1.0, 1.0)))
    trace = BanditTrace.start(env)
    sched = PolicySchedule("uniform", EpsSchedule("constant", 0.25))
    apply_round(trace, sched, 0.1, [2.0, 1.0, 1.0, 1.0])
    np.testing.assert_array_equal(trace.iw[0], [8.0, 0.0, 0.0, 0.0])


def test_action_selection_inverse_cdf():
    pi = np.array([[0.2, 0.3, 0.5]] * 4)
    np.testing.assert_array_equal(select_actions(pi, np.array([0.0, 0.19, 0.2, 0.99])), [0, 0, 1, 2])


def test_policy_floor_and_normalization():
    sched = PolicySchedule("softmax", EpsSchedule("constant", 0.05), temperature=0.01)
    r_hat = np.array([[100.0, -100.0, 0.0]])
    pi = sched.policy(3, r_hat)
    assert pi.min() >= 0.05 - 1e-15
    assert pi.sum() == pytest.approx(1.0)
    with pytest.raises(DomainError):
        PolicySchedule("softmax", EpsSchedule("constant", 0.6)).check(2)


def test_cube_root_schedule():
    s = EpsSchedule("cube_root")
    assert s(1, 3) == pytest.approx(1 / 3)
    assert s(1000, 3) == pytest.approx(0.1)


def test_delta_hat_recomputed_from_trace():
    trace = BanditTrace.start(LOGN)
    sched = PolicySchedule("softmax", EpsSchedule("constant", 0.05))
    rng = trial_rng(3, 0)
    for _ in range(200):
        play_round(LOGN, sched, trace, rng)
    iw = np.array(trace.iw)
    r_hat = iw.mean(axis=0)
    q = Categorical(HypothesisSpace.finite(2), [0.3, 0.7])
    s = regret_stats(trace, q)
    assert s.delta_hat_Q == pytest.approx(r_hat[1] - q.weights @ r_hat, rel=1e-12)
    assert min(np.min(p) for p in trace.policies) >= 0.05 - 1e-15
    # per-round increments average to m (Delta_hat - Delta)
    np.testing.assert_allclose(np.sum(trace.increments, axis=0), 200 * (trace.delta_hat - LOGN.gaps), atol=1e-9)


def test_importance_weights_unbiased():
    state = simulate_batch(LOGN, UNIFORM_POLICY, 50, seed=4, first=0, count=4000)
    est = state.r_hat
    se = est.std(axis=0, ddof=1) / np.sqrt(est.shape[0])
    assert np.all(np.abs(est.mean(axis=0) - LOGN.means) < 4 * se)


def test_variance_budget_tight_for_symmetric_uniform():
    env = BanditEnv((Distribution.lognormal(0.0, 0.3),) * 2)
    state = simulate_batch(env, UNIFORM_POLICY, 30, seed=0, first=0, count=3)
    np.testing.assert_allclose(variance_budget_ratio(state.V, env.C, 30, 0.5), 1.0, rtol=1e-12)


def test_variance_budget_below_one_with_gap():
    state = simulate_batch(LOGN, PolicySchedule("softmax", EpsSchedule("constant", 0.05)), 300, seed=0, first=0, count=50)
    r = variance_budget_ratio(state.V, LOGN.C, 300, 0.05)
    assert np.all(r < 1.0)
    assert variance_budget_ratio(state.V, LOGN.C, 0, 0.05).tolist() == [0.0] * 50


def test_variance_tail_zero_rewards_and_monotone():
    zero = BanditEnv((Distribution.constant(0.0), Distribution.constant(0.0)), C=1.0)
    sched = PolicySchedule("softmax", EpsSchedule("constant", 0.05))
    assert lemma6_check(zero, sched, 50, 0.2, 100, seed=0)["violation_freq"] == 0.0
    a = lemma6_check(LOGN, sched, 200, 0.2, 300, seed=1, scale=1e-4)
    b = lemma6_check(LOGN, sched, 200, 0.2, 300, seed=1, scale=2e-4)
    assert b["violations"] <= a["violations"]


def test_batch_matches_single_traces():
    sched = PolicySchedule("softmax", EpsSchedule("constant", 0.05))
    state = simulate_batch(LOGN, sched, 40, seed=8, first=2, count=3)
    for j in range(3):
        res = run_bandit_experiment(LOGN, sched, 40, 0.2, [], trial_rng(8, 2 + j))
        np.testing.assert_allclose(res.trace.delta_hat, state.delta_hat[j], rtol=1e-12)
        np.testing.assert_allclose(res.trace.Vhat, state.Vhat[j], rtol=1e-12)


def test_experiment_record():
    sched = PolicySchedule("softmax", EpsSchedule("constant", 0.05))
    space = HypothesisSpace.finite(2)
    res = run_bandit_experiment(LOGN, sched, 100, 0.2, [Categorical.point_mass(space, 1), Categorical.uniform(space)], trial_rng(0, 0))
    assert res.per_q[0].delta_hat_Q == 0.0 and res.per_q[0].covered
    assert res.certificate.value == bandit_regret_bound(2, 0.2, 100, 0.05, second_moment_bound=LOGN.C).value
    assert res.sup_gap >= abs(res.per_q[1].delta_Q - res.per_q[1].delta_hat_Q) - 1e-15
