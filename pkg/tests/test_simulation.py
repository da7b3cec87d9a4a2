import datetime as dt
import math

import numpy as np
import pytest

from helios.data import DatasetSplit, PriceSchedule, StepSeries, default_price_schedule
from helios.optimizer import DEFAULT_U_LED
from helios.predictors import DaylightGatedPredictor, MarkovPredictor, fit_climatology, fit_markov, perfect_predictor
from helios.simulation import (
    ControlConfig,
    MonthModels,
    Strategy,
    derive_heuristic_threshold,
    heuristic_step,
    pick_test_days,
    run_campaign,
    run_day,
    solve_day_once,
)
from helios.synthetic import synthetic_day, synthetic_month
from helios.units import DEFAULT_PARAMS, DomainError

from conftest import flat_day

PRICES = default_price_schedule()


def test_heuristic_threshold_closed_form():
    per_step = 3e6 / 900 / 64
    assert per_step == pytest.approx(52.083, abs=1e-3)
    expected = -math.log(1 - per_step / 121.0) / 0.00277
    assert derive_heuristic_threshold() == pytest.approx(expected, rel=1e-12)
    assert derive_heuristic_threshold() == pytest.approx(203.2, abs=0.05)
    assert derive_heuristic_threshold(ControlConfig(dpi_mol=0.0)) == 0.0
    with pytest.raises(DomainError):
        derive_heuristic_threshold(ControlConfig(dpi_mol=7.0))


def test_heuristic_step():
    assert heuristic_step(0.0, 203.2) == 200.0
    assert heuristic_step(250.0, 203.2) == 0.0
    assert heuristic_step(203.2, 203.2) == 0.0
    assert heuristic_step(100.0, 203.2) == pytest.approx(103.2)


def test_perfect_prediction_equals_one_shot():
    day = synthetic_day(dt.date(2005, 1, 15), scale=0.3)
    rh = run_day(Strategy.BASELINE, day, perfect_predictor(day), PRICES)
    once = solve_day_once(day, PRICES)
    np.testing.assert_allclose(rh.led_etr, once.x, atol=1e-6)
    assert rh.feasible and rh.dpi_met
    # the bnn slot driven by an oracle forecaster is the same controller
    as_bnn = run_day(Strategy.BNN, day, perfect_predictor(day), PRICES)
    assert as_bnn.total_cost == pytest.approx(rh.total_cost, rel=1e-9)


def test_sunny_day_needs_no_light():
    day = flat_day(900.0)
    res = run_day("baseline-oracle", day, perfect_predictor(day), PRICES)
    assert not res.led_etr.any() and res.total_cost == 0.0 and res.dpi_met


def test_dark_day_is_infeasible_at_full_power():
    day = flat_day(0.0)
    res = run_day(Strategy.BASELINE, day, perfect_predictor(day), PRICES)
    assert not res.feasible and not res.dpi_met
    np.testing.assert_allclose(res.led_etr, DEFAULT_U_LED)
    assert res.realized_dpi == pytest.approx(64 * DEFAULT_U_LED * 900e-6)


def test_heuristic_day_meets_dpi_and_ignores_prices():
    day = synthetic_day(dt.date(2005, 12, 1), scale=0.5)
    res = run_day(Strategy.HEURISTIC, day, None, PRICES)
    assert res.led_ppfd.max() <= ControlConfig().led_max_ppfd + 1e-9
    cheap = run_day(Strategy.HEURISTIC, day, None, PriceSchedule(np.ones(64)))
    np.testing.assert_array_equal(res.led_ppfd, cheap.led_ppfd)
    assert res.dpi_met and res.realized_dpi >= 3.0


def _markov_setup(month=3):
    train = synthetic_month(2001, month, seed=1, amplitude_spread=0.4)
    clim = fit_climatology(train)
    return clim, fit_markov(train)


def test_commitment_is_causal():
    clim, mk = _markov_setup()
    day = synthetic_day(dt.date(2009, 3, 10), scale=0.5, seasonal=True)
    pred = DaylightGatedPredictor(clim, MarkovPredictor(mk))
    base = run_day(Strategy.MARKOV, day, pred, PRICES)
    j = 30
    perturbed = np.array(day.sun_ppfd)
    perturbed[j:] *= np.random.default_rng(0).uniform(0.2, 1.8, day.T - j)
    alt = StepSeries.from_ppfd(day.date, perturbed)
    other = run_day(Strategy.MARKOV, alt, pred, PRICES)
    np.testing.assert_array_equal(base.led_etr[:j], other.led_etr[:j])


def test_dpi_guarantee_with_imperfect_forecasts():
    clim, mk = _markov_setup()
    for scale in (0.25, 0.4, 0.6, 1.0):
        day = synthetic_day(dt.date(2009, 3, 12), scale=scale, seasonal=True)
        res = run_day(Strategy.MARKOV, day, DaylightGatedPredictor(clim, MarkovPredictor(mk)), PRICES)
        if res.feasible:
            assert res.realized_dpi >= 3.0 * (1 - 1e-6)


def test_one_step_predictions_recorded():
    day = synthetic_day(dt.date(2009, 3, 12), scale=0.5)
    res = run_day(Strategy.BASELINE, day, perfect_predictor(day), PRICES)
    assert math.isnan(res.predicted_ppfd[0])
    np.testing.assert_array_equal(res.predicted_ppfd[1:], day.sun_ppfd[1:])
    assert res.prediction_score().r_squared == 1.0


def test_pick_test_days_spread():
    days = [flat_day(1.0, dt.date(2010, 1, d)) for d in range(1, 31)]
    picked = pick_test_days(days, 3)
    assert [d.date.day for d in picked] == [1, 15, 30]
    assert len(pick_test_days(days[:2], 3)) == 2


def test_campaign_single_strategy_and_ordering():
    splits, models = {}, {}
    for month in (1, 6):
        train = synthetic_month(2001, month, seed=month, amplitude_spread=0.5, n_days=20)
        test = synthetic_month(2009, month, seed=month + 50, amplitude_spread=0.5, n_days=10)
        train = [StepSeries.from_ppfd(d.date, d.sun_ppfd * 0.15) for d in train]
        test = [StepSeries.from_ppfd(d.date, d.sun_ppfd * 0.15) for d in test]
        splits[month] = DatasetSplit(month, train, test)
        models[month] = MonthModels(fit_climatology(train), markov=fit_markov(train))
    only = run_campaign(splits, [Strategy.BASELINE], PRICES)
    assert len(only.months) == 2 and all(m.increase_abs == 0 for m in only.months)

    report = run_campaign(splits, ["baseline", "markov", "heuristic"], PRICES, models=models)
    for month in (1, 6):
        table = report.month_table(month)
        base = table[Strategy.BASELINE].mean_cost
        assert base > 0
        assert all(row.mean_cost >= base - 1e-9 for row in table.values())
        assert table[Strategy.BASELINE].n_days == 3
    with pytest.raises(KeyError):
        run_campaign(splits, ["markov"], PRICES)
