"""Figures rendered next to the report tables (PNG, non-interactive backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from helios.reporting import read_csv  # noqa: E402

STYLE = {
    "baseline": dict(color="black", ls="-"),
    "bnn": dict(color="tab:blue", ls="--"),
    "markov": dict(color="tab:orange", ls="-."),
    "heuristic": dict(color="tab:green", ls=":"),
}
MONTH_ABBR = "Jan Feb Mar Apr May Jun Jul Aug Sep Oct Nov Dec".split()


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # fixed metadata keeps repeated renders byte-identical
    fig.savefig(path, dpi=120, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    return path


def _col(rows, name):
    return np.array([float(r[name]) if r[name] != "" else np.nan for r in rows])


def plot_trace(trace_csv, path, title=None) -> Path:
    """Sunlight vs forecasts (top) and LED PPFD per strategy (bottom) for one day."""
    rows = read_csv(trace_csv)
    step = _col(rows, "step")
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    top.plot(step, _col(rows, "actual_ppfd"), label="actual", **STYLE["baseline"])
    for name in ("bnn", "markov"):
        y = _col(rows, f"{name}_pred")
        if not np.all(np.isnan(y)):
            top.plot(step, y, label=f"{name} forecast", **STYLE[name])
    top.set_ylabel("sunlight PPFD\n(umol m$^{-2}$ s$^{-1}$)")
    top.legend(fontsize=8)
    for name in STYLE:
        y = _col(rows, f"{name}_led")
        if not np.all(np.isnan(y)):
            bottom.plot(step, y, label=name, **STYLE[name])
    bottom.set_xlabel("control step")
    bottom.set_ylabel("LED PPFD\n(umol m$^{-2}$ s$^{-1}$)")
    bottom.legend(fontsize=8)
    if title:
        top.set_title(title)
    return _save(fig, path)


def plot_monthly_costs(monthly_rows, path) -> Path:
    """Grouped bars of mean daily cost per month and strategy."""
    months = sorted({int(r[0]) for r in monthly_rows})
    strategies = [s for s in STYLE if any(r[1] == s for r in monthly_rows)]
    cost = {(int(r[0]), r[1]): float(r[3]) for r in monthly_rows}
    width = 0.8 / max(len(strategies), 1)
    fig, ax = plt.subplots(figsize=(8, 4))
    x = np.arange(len(months))
    for n, s in enumerate(strategies):
        ax.bar(x + n * width, [cost.get((m, s), np.nan) for m in months], width,
               label=s, color=STYLE[s]["color"])
    ax.set_xticks(x + width * (len(strategies) - 1) / 2)
    ax.set_xticklabels([MONTH_ABBR[m - 1] for m in months])
    ax.set_ylabel("cost (cent m$^{-2}$ day$^{-1}$)")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_prices(prices, path, step_seconds: int = 900) -> Path:
    hours = np.arange(len(prices)) * step_seconds / 3600
    fig, ax = plt.subplots(figsize=(6, 3))
    ax.step(hours, prices, where="post", color="black")
    ax.set_xlabel("hours into photoperiod")
    ax.set_ylabel("price (cent/kWh)")
    return _save(fig, path)
