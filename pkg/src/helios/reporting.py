"""Tidy CSV outputs of simulations and the cost-increase tables built from them."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from helios.simulation import ALL_STRATEGIES, DayResult, MonthSummary, Strategy

DAY_COLUMNS = ["date", "month", "strategy", "total_cost", "realized_dpi", "dpi_met", "feasible",
               "r2", "rmse", "rmse_pct"]
CAMPAIGN_COLUMNS = ["month", "strategy", "n_days", "mean_cost", "baseline_cost", "increase_abs",
                    "increase_pct", "mean_r2", "mean_rmse", "all_dpi_met"]
TRACE_COLUMNS = ["step", "actual_ppfd", "bnn_pred", "markov_pred", "baseline_led", "bnn_led",
                 "markov_led", "heuristic_led"]
INCREASE_COLUMNS = ["date", "month", "strategy", "cost", "baseline_cost", "increase_abs", "increase_pct"]


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return "" if math.isnan(value) else repr(float(value))
    return str(value)


def _write(path: Path, columns, rows: Iterable[Sequence]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def _num(text: str) -> float:
    return float(text) if text != "" else math.nan


def write_day_results(days: Sequence[DayResult], path) -> Path:
    rows = []
    for d in days:
        sc = d.prediction_score()
        rows.append([d.date.isoformat(), d.date.month, d.strategy.value, d.total_cost, d.realized_dpi,
                     d.dpi_met, d.feasible, sc.r_squared if sc else None, sc.rmse_abs if sc else None,
                     sc.rmse_pct if sc else None])
    return _write(Path(path), DAY_COLUMNS, rows)


def write_campaign_report(months: Sequence[MonthSummary], path) -> Path:
    rows = [[m.month, m.strategy.value, m.n_days, m.mean_cost, m.baseline_cost, m.increase_abs,
             m.increase_pct, m.mean_r2, m.mean_rmse, m.all_dpi_met] for m in months]
    return _write(Path(path), CAMPAIGN_COLUMNS, rows)


def write_traces(days: Sequence[DayResult], directory) -> list[Path]:
    """One plot-ready file per date with every simulated strategy side by side."""
    by_date = defaultdict(dict)
    for d in days:
        by_date[d.date][d.strategy] = d
    out = []
    for date in sorted(by_date):
        runs = by_date[date]
        any_run = next(iter(runs.values()))
        T = any_run.T

        def col(strategy, attr):
            run = runs.get(strategy)
            return getattr(run, attr) if run is not None else np.full(T, np.nan)

        rows = zip(
            range(1, T + 1),
            any_run.actual_ppfd,
            col(Strategy.BNN, "predicted_ppfd"),
            col(Strategy.MARKOV, "predicted_ppfd"),
            col(Strategy.BASELINE, "led_ppfd"),
            col(Strategy.BNN, "led_ppfd"),
            col(Strategy.MARKOV, "led_ppfd"),
            col(Strategy.HEURISTIC, "led_ppfd"),
        )
        out.append(_write(Path(directory) / f"trace_{date.isoformat()}.csv", TRACE_COLUMNS, rows))
    return out


def write_loss_history(history: Sequence[float], path) -> Path:
    return _write(Path(path), ["epoch", "loss"], ((n + 1, v) for n, v in enumerate(history)))


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def cost_increase_rows(day_rows: Sequence[dict]) -> list[list]:
    """Per day and strategy: cost increase over that day's baseline, absolute and percent."""
    baseline = {r["date"]: _num(r["total_cost"]) for r in day_rows if r["strategy"] == Strategy.BASELINE.value}
    out = []
    for r in day_rows:
        cost = _num(r["total_cost"])
        base = baseline.get(r["date"], math.nan)
        inc = cost - base
        pct = 100.0 * inc / base if base > 0 else math.nan
        out.append([r["date"], int(r["month"]), r["strategy"], cost, base, inc, pct])
    order = {s.value: n for n, s in enumerate(ALL_STRATEGIES)}
    out.sort(key=lambda row: (row[0], order.get(row[2], 99)))
    return out


def monthly_rows(increase_rows: Sequence[list]) -> list[list]:
    """Month x strategy mean daily cost and mean increase over the baseline."""
    groups = defaultdict(list)
    for row in increase_rows:
        groups[(row[1], row[2])].append(row)
    order = {s.value: n for n, s in enumerate(ALL_STRATEGIES)}
    out = []
    for (month, strategy) in sorted(groups, key=lambda k: (k[0], order.get(k[1], 99))):
        rows = groups[(month, strategy)]
        cost = float(np.mean([r[3] for r in rows]))
        base = float(np.mean([r[4] for r in rows]))
        inc = cost - base
        out.append([month, strategy, len(rows), cost, base, inc, 100.0 * inc / base if base > 0 else math.nan])
    return out


MONTHLY_COLUMNS = ["month", "strategy", "n_days", "mean_cost", "baseline_cost", "increase_abs", "increase_pct"]


def savings_vs(monthly: Sequence[list], reference: str = "bnn") -> dict:
    """Average over months of the percent saved by ``reference`` against each other strategy."""
    by_month = defaultdict(dict)
    for month, strategy, _, cost, *_ in monthly:
        by_month[month][strategy] = cost
    out = {}
    for other in {s for m in by_month.values() for s in m} - {reference}:
        pcts = [100.0 * (m[other] - m[reference]) / m[other]
                for m in by_month.values() if reference in m and other in m and m[other] > 0]
        if pcts:
            out[other] = float(np.mean(pcts))
    return out


def write_report_tables(day_results_csv, output_dir) -> tuple[Path, Path, list, dict]:
    rows = read_csv(day_results_csv)
    inc = cost_increase_rows(rows)
    monthly = monthly_rows(inc)
    out = Path(output_dir)
    p1 = _write(out / "cost_increase.csv", INCREASE_COLUMNS, inc)
    p2 = _write(out / "monthly_costs.csv", MONTHLY_COLUMNS, monthly)
    return p1, p2, monthly, savings_vs(monthly)
