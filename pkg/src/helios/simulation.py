"""Receding-horizon day simulation for the four lighting strategies.

At every step ``i`` the controller observes the actual sunlight ``s_i``,
asks its predictor for ``s_{i+1..T}``, re-solves the horizon problem against
the DPI still owed, and commits only the LED level of step ``i``. The
heuristic ignores prices and forecasts and tops sunlight up to a fixed PPFD.
"""

from __future__ import annotations

import datetime as dt
import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from helios.bnn import BnnModel, BnnPredictor
from helios.data import DatasetSplit, PriceSchedule, StepSeries
from helios.metrics import PredictionScore, score
from helios.optimizer import (
    DEFAULT_LED_EFFICACY,
    DEFAULT_U_LED,
    HorizonProblem,
    LightingSchedule,
    cost_factor,
    led_ppfd,
    remaining_budget,
    solve_horizon,
)
from helios.predictors import (
    ClimatologyProfile,
    DaylightGatedPredictor,
    MarkovModel,
    MarkovPredictor,
    PerfectPredictor,
    Predictor,
)
from helios.units import DEFAULT_PARAMS, DomainError, PhotosynthesisParams, etr_from_ppfd, ppfd_from_etr

log = logging.getLogger(__name__)


class Strategy(str, enum.Enum):
    BASELINE = "baseline"
    BNN = "bnn"
    MARKOV = "markov"
    HEURISTIC = "heuristic"

    @classmethod
    def parse(cls, name: str) -> "Strategy":
        name = name.strip().lower()
        if name == "baseline-oracle":
            return cls.BASELINE
        try:
            return cls(name)
        except ValueError:
            raise ValueError(f"unknown strategy {name!r}; choose from {[s.value for s in cls]}") from None


ALL_STRATEGIES = (Strategy.BASELINE, Strategy.BNN, Strategy.MARKOV, Strategy.HEURISTIC)


@dataclass(frozen=True)
class ControlConfig:
    params: PhotosynthesisParams = DEFAULT_PARAMS
    u_led: float = DEFAULT_U_LED
    dpi_mol: float = 3.0
    step_seconds: int = 900
    led_efficacy: float = DEFAULT_LED_EFFICACY
    heuristic_ppfd: float | None = None  # derived from the DPI target when None
    dark_ppfd: float = 0.0
    seed: int = 0

    @property
    def cost_factor(self) -> float:
        return cost_factor(self.step_seconds, self.led_efficacy)

    @property
    def led_max_ppfd(self) -> float:
        return ppfd_from_etr(self.u_led, self.params)


@dataclass
class DayResult:
    date: dt.date
    strategy: Strategy
    actual_ppfd: np.ndarray
    predicted_ppfd: np.ndarray  # one-step-ahead forecast of each step; NaN at step 1
    led_etr: np.ndarray
    led_ppfd: np.ndarray
    step_cost: np.ndarray
    total_cost: float
    realized_dpi: float
    dpi_met: bool
    feasible: bool
    diagnostics: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return int(self.actual_ppfd.size)

    def prediction_score(self) -> PredictionScore | None:
        mask = ~np.isnan(self.predicted_ppfd)
        if self.strategy is Strategy.HEURISTIC or not mask.any():
            return None
        return score(self.actual_ppfd[mask], self.predicted_ppfd[mask])


def derive_heuristic_threshold(config: ControlConfig = ControlConfig(), T: int = 64) -> float:
    """Smallest constant PPFD whose ETR, held for ``T`` steps, meets the DPI target."""
    per_step = remaining_budget(config.dpi_mol, config.step_seconds) / T
    if per_step <= 0:
        return 0.0
    if per_step >= config.params.a:
        raise DomainError(f"per-step ETR {per_step:.3f} needed exceeds the asymptote {config.params.a}")
    return ppfd_from_etr(per_step, config.params)


def heuristic_step(s_t: float, threshold_ppfd: float, led_max_ppfd: float = 200.0) -> float:
    if threshold_ppfd < 0:
        raise ValueError("threshold must be >= 0")
    return min(max(0.0, threshold_ppfd - s_t), led_max_ppfd)


def _check_lengths(day: StepSeries, prices: PriceSchedule):
    if prices.T != day.T:
        raise ValueError(f"price schedule has {prices.T} steps, day has {day.T}")


def _horizon_problem(i, day, forecast, prices, budget, config) -> HorizonProblem:
    a = config.params.a
    sun_ppfd = np.concatenate([[day.sun_ppfd[i - 1]], forecast])
    sun_etr = np.concatenate([[day.sun_etr[i - 1]], etr_from_ppfd(forecast, config.params)])
    # a runaway forecast may round to the asymptote
    sun_etr = np.minimum(sun_etr, a * (1 - 1e-9))
    return HorizonProblem(
        prices=prices.prices[i - 1:],
        sun_etr=sun_etr,
        sun_ppfd=sun_ppfd,
        budget=budget,
        params=config.params,
        u_led=config.u_led,
        start_step=i,
    )


def solve_day_once(day: StepSeries, prices: PriceSchedule, config: ControlConfig = ControlConfig()) -> LightingSchedule:
    """One-shot solve at step 1 with the actual sunlight of the whole day."""
    _check_lengths(day, prices)
    budget = remaining_budget(config.dpi_mol, config.step_seconds)
    return solve_horizon(_horizon_problem(1, day, np.asarray(day.sun_ppfd[1:]), prices, budget, config))


def _finish(day, strategy, predicted, x, led, prices, config, feasible, diagnostics) -> DayResult:
    step_cost = prices.prices * led * config.cost_factor
    dpi = float(np.sum(x + day.sun_etr)) * config.step_seconds * 1e-6
    met = dpi >= config.dpi_mol * (1 - 1e-9)
    return DayResult(
        date=day.date,
        strategy=strategy,
        actual_ppfd=np.array(day.sun_ppfd),
        predicted_ppfd=predicted,
        led_etr=x,
        led_ppfd=led,
        step_cost=step_cost,
        total_cost=float(step_cost.sum()),
        realized_dpi=dpi,
        dpi_met=bool(met),
        feasible=bool(feasible),
        diagnostics=diagnostics,
    )


def run_heuristic_day(day: StepSeries, prices: PriceSchedule, config: ControlConfig = ControlConfig()) -> DayResult:
    _check_lengths(day, prices)
    threshold = config.heuristic_ppfd
    if threshold is None:
        threshold = derive_heuristic_threshold(config, day.T)
    cap = config.led_max_ppfd
    led = np.array([heuristic_step(s, threshold, cap) for s in day.sun_ppfd])
    x = np.asarray(etr_from_ppfd(day.sun_ppfd + led, config.params)) - day.sun_etr
    x = np.maximum(x, 0.0)
    predicted = np.full(day.T, np.nan)
    res = _finish(day, Strategy.HEURISTIC, predicted, x, led, prices, config, True, {"threshold_ppfd": threshold})
    res.feasible = res.dpi_met
    return res


def run_day(
    strategy: Strategy | str,
    day: StepSeries,
    predictor: Predictor | None,
    prices: PriceSchedule,
    config: ControlConfig = ControlConfig(),
) -> DayResult:
    """Simulate one day of receding-horizon control (or the heuristic)."""
    strategy = Strategy.parse(strategy) if isinstance(strategy, str) else strategy
    if strategy is Strategy.HEURISTIC:
        return run_heuristic_day(day, prices, config)
    if predictor is None:
        raise ValueError(f"strategy {strategy.value} needs a predictor")
    _check_lengths(day, prices)

    T = day.T
    x = np.zeros(T)
    predicted = np.full(T, np.nan)
    realized = 0.0
    infeasible_solves = 0
    feasible = True
    for i in range(1, T + 1):
        forecast = np.asarray(predictor.predict_horizon(day.sun_ppfd[:i], T), dtype=float)
        if forecast.shape != (T - i,) or np.any(~np.isfinite(forecast)) or np.any(forecast < 0):
            raise RuntimeError(f"predictor returned an invalid forecast at step {i}")
        if i < T:
            predicted[i] = forecast[0]
        budget = remaining_budget(config.dpi_mol, config.step_seconds) - realized
        sched = solve_horizon(_horizon_problem(i, day, forecast, prices, budget, config))
        feasible = sched.feasible
        infeasible_solves += not sched.feasible
        x[i - 1] = sched.x[0]
        realized += x[i - 1] + day.sun_etr[i - 1]

    led = led_ppfd(x, day.sun_etr, config.params)
    return _finish(day, strategy, predicted, x, led, prices, config, feasible,
                   {"infeasible_solves": infeasible_solves})


@dataclass(frozen=True)
class MonthModels:
    climatology: ClimatologyProfile
    bnn: BnnModel | None = None
    markov: MarkovModel | None = None


def pick_test_days(days: Sequence[StepSeries], k: int) -> list[StepSeries]:
    """``k`` days spread evenly through the date-sorted test set."""
    days = sorted(days, key=lambda d: d.date)
    if k >= len(days):
        return list(days)
    idx = np.round(np.linspace(0, len(days) - 1, k)).astype(int)
    return [days[j] for j in idx]


def make_predictor(strategy: Strategy, day: StepSeries, models: MonthModels | None, config: ControlConfig) -> Predictor | None:
    if strategy is Strategy.HEURISTIC:
        return None
    if strategy is Strategy.BASELINE:
        return PerfectPredictor(day)
    if models is None:
        raise KeyError(f"no trained models for month {day.month}")
    if strategy is Strategy.BNN:
        if models.bnn is None:
            raise KeyError(f"no BNN model for month {day.month}")
        seed = np.random.SeedSequence([config.seed, day.date.toordinal()])
        model = BnnPredictor(models.bnn, seed=seed)
    else:
        if models.markov is None:
            raise KeyError(f"no Markov model for month {day.month}")
        model = MarkovPredictor(models.markov)
    return DaylightGatedPredictor(models.climatology, model, config.dark_ppfd)


@dataclass
class MonthSummary:
    month: int
    strategy: Strategy
    n_days: int
    mean_cost: float
    baseline_cost: float
    increase_abs: float
    increase_pct: float
    mean_r2: float
    mean_rmse: float
    all_dpi_met: bool


@dataclass
class CampaignReport:
    days: list
    months: list

    def month_table(self, month: int) -> dict:
        return {m.strategy: m for m in self.months if m.month == month}


def _nanmean(values) -> float:
    vals = [v for v in values if v is not None and not math.isnan(v)]
    return float(np.mean(vals)) if vals else math.nan


def summarize(days: Sequence[DayResult]) -> list[MonthSummary]:
    out = []
    months = sorted({d.date.month for d in days})
    for month in months:
        in_month = [d for d in days if d.date.month == month]
        base = [d.total_cost for d in in_month if d.strategy is Strategy.BASELINE]
        base_cost = float(np.mean(base)) if base else math.nan
        for strategy in ALL_STRATEGIES:
            rows = [d for d in in_month if d.strategy is strategy]
            if not rows:
                continue
            mean_cost = float(np.mean([d.total_cost for d in rows]))
            scores = [d.prediction_score() for d in rows]
            inc = mean_cost - base_cost
            out.append(MonthSummary(
                month=month,
                strategy=strategy,
                n_days=len(rows),
                mean_cost=mean_cost,
                baseline_cost=base_cost,
                increase_abs=inc,
                increase_pct=100.0 * inc / base_cost if base_cost > 0 else math.nan,
                mean_r2=_nanmean([s.r_squared for s in scores if s]),
                mean_rmse=_nanmean([s.rmse_abs for s in scores if s]),
                all_dpi_met=all(d.dpi_met for d in rows),
            ))
    return out


def run_campaign(
    splits: Mapping[int, DatasetSplit],
    strategies: Sequence[Strategy | str],
    prices: PriceSchedule,
    config: ControlConfig = ControlConfig(),
    test_days_per_month: int = 3,
    models: Mapping[int, MonthModels] | None = None,
) -> CampaignReport:
    """Run every strategy on ``test_days_per_month`` test days of each month."""
    strategies = [Strategy.parse(s) if isinstance(s, str) else s for s in strategies]
    models = models or {}
    results = []
    for month in sorted(splits):
        needs_model = {Strategy.BNN, Strategy.MARKOV} & set(strategies)
        if needs_model and month not in models:
            raise KeyError(f"no trained models for month {month}")
        for day in pick_test_days(splits[month].test, test_days_per_month):
            for strategy in strategies:
                predictor = make_predictor(strategy, day, models.get(month), config)
                results.append(run_day(strategy, day, predictor, prices, config))
    return CampaignReport(results, summarize(results))
