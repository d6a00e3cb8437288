import math

import numpy as np
import pytest

from pacsuper.errors import DomainError
from pacsuper.processes import (
    STOCK_MODELS,
    VariationLedger,
    accumulate,
    bercu_touati_log_value,
    centered_lognormal_model,
    degenerate_model,
    log_process_path,
    rademacher_model,
    simulate_increments,
    supermartingale_mean_check,
)


def test_accumulate_one_step():
    assert accumulate(VariationLedger(), 2.0, 4.0) == VariationLedger(m=1, M=2.0, bracket=4.0, angle=4.0)


def test_accumulate_rejects_negative_second_moment():
    with pytest.raises(DomainError):
        accumulate(VariationLedger(), 1.0, -0.1)


def test_log_value_by_hand():
    ledger = VariationLedger(m=1, M=2.0, bracket=4.0, angle=4.0)
    assert bercu_touati_log_value(1.0, ledger) == -2.0
    assert bercu_touati_log_value(-1.0, ledger) == -6.0
    assert bercu_touati_log_value(0.0, ledger) == 0.0


def test_path_agrees_with_ledger():
    rng = np.random.default_rng(0)
    x = rng.normal(size=20)
    csm = rng.uniform(0.5, 2.0, size=20)
    path = log_process_path(0.4, x, csm)
    ledger = VariationLedger()
    for i in range(20):
        ledger = accumulate(ledger, x[i], csm[i])
        assert path[i] == pytest.approx(bercu_touati_log_value(0.4, ledger), abs=1e-12)


def test_degenerate_model_is_identically_one():
    chk = supermartingale_mean_check(degenerate_model(), 0.5, 10, 100, seed=1)
    np.testing.assert_array_equal(chk.mean_by_step, 1.0)
    assert chk.supermartingale_ok()


def test_rademacher_value_is_deterministic_given_path():
    # bracket = angle = m for +/-1 increments
    xs, cs = simulate_increments(rademacher_model(), 5, 3, seed=2)
    lp = log_process_path(0.5, xs, cs)
    np.testing.assert_allclose(lp, 0.5 * np.cumsum(xs, axis=1) - 0.125 * 2 * np.arange(1, 6))


def test_lognormal_model_reports_exact_variance():
    _, cs = centered_lognormal_model().draw(np.random.default_rng(0), 4)
    np.testing.assert_allclose(cs, (math.e - 1) * math.e)


def test_mean_check_needs_enough_trials():
    with pytest.raises(DomainError):
        supermartingale_mean_check(rademacher_model(), 0.1, 5, 99, seed=0)


@pytest.mark.parametrize("name", ["rademacher", "lognormal", "pareto"])
def test_stock_models_centered(name):
    chk = supermartingale_mean_check(STOCK_MODELS[name](), 0.1, 20, 4000, seed=3)
    assert chk.centering_ok()
    assert chk.supermartingale_ok()


def test_streams_do_not_depend_on_batch_split():
    a, _ = simulate_increments(rademacher_model(), 8, 6, seed=9)
    b, _ = simulate_increments(rademacher_model(), 8, 3, seed=9, start=3)
    np.testing.assert_array_equal(a[3:], b)
