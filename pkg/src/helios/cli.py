"""Command-line entry point: ``helios {generate,train,simulate,report,predict}``.

Exit codes: 0 success, 1 user error (bad input, config or missing model),
2 internal error. Failures print one JSON line on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as dt
import json
import logging
import sys
from pathlib import Path

import numpy as np

from helios import bnn as bnn_mod
from helios import plotting, reporting, store
from helios.config import ConfigError, RunConfig, load_config
from helios.data import (
    GapError,
    IngestError,
    IrradianceData,
    build_all_step_series,
    build_step_series,
    default_price_schedule,
    load_irradiance_dir,
    load_price_csv,
    split_by_years,
)
from helios.predictors import MarkovPredictor, fit_climatology, fit_markov
from helios.simulation import MonthModels, Strategy, run_campaign
from helios.units import DomainError

log = logging.getLogger("helios")

USER_ERRORS = (ConfigError, IngestError, GapError, store.ModelFileError, DomainError, ValueError,
               KeyError, FileNotFoundError)


class UserError(Exception):
    pass


def _months(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        if "-" in part:
            lo, hi = part.split("-")
            out.extend(range(int(lo), int(hi) + 1))
        elif part.strip():
            out.append(int(part))
    return out


def _strategies(text: str) -> list[Strategy]:
    return [Strategy.parse(s) for s in text.split(",") if s.strip()]


def model_path(cfg: RunConfig, kind: str, month: int) -> Path:
    return cfg.models / f"{kind}_{month:02d}{store.SUFFIX}"


def _load_days(cfg: RunConfig):
    if not Path(cfg.data).exists():
        raise UserError(f"data path {cfg.data} does not exist")
    records = load_irradiance_dir(cfg.data)
    data = IrradianceData.from_records(records)
    return data, build_all_step_series(data, **cfg.series_kwargs())


def _prices(cfg: RunConfig):
    kw = dict(T=cfg.T, m=cfg.step_seconds, photoperiod_start=cfg.photoperiod_start)
    return default_price_schedule(**kw) if cfg.prices is None else load_price_csv(cfg.prices, **kw)


def _split(days, cfg, month):
    split = split_by_years(days, cfg.train_years, cfg.test_years, month)
    if not split.train:
        raise UserError(f"no training days for month {month} in years {cfg.train_years}")
    return split


def cmd_generate(cfg: RunConfig, args) -> int:
    from helios.synthetic import generate_records, write_irradiance_csv

    years = _months(args.years)  # same list/range syntax as --months
    out = Path(args.out) if args.out else Path(cfg.data)
    if out.suffix != ".csv":
        out = out / "synthetic.csv"
    records = generate_records(years, resolution=args.resolution, cloud=args.cloud, seed=cfg.seed,
                               months=cfg.months, transmittance=args.transmittance)
    write_irradiance_csv(records, out)
    print(f"wrote {len(records)} records to {out}")
    return 0


def cmd_train(cfg: RunConfig, args) -> int:
    kinds = ("bnn", "markov") if args.kind == "all" else (args.kind,)
    _, days = _load_days(cfg)
    for month in cfg.months:
        split = _split(days, cfg, month)
        store.save_model(fit_climatology(split.train), model_path(cfg, "climatology", month))
        if "markov" in kinds:
            mk = fit_markov(split.train, cfg.markov_bins, cfg.markov_alpha)
            store.save_model(mk, model_path(cfg, "markov", month))
            log.info("month %d: markov model from %d days", month, len(split.train))
        if "bnn" in kinds:
            batch = bnn_mod.make_batch(split.train)
            bcfg = cfg.bnn_config_for(month)
            model = bnn_mod.train(bnn_mod.init_model(bcfg, batch), batch)
            store.save_model(model, model_path(cfg, "bnn", month))
            reporting.write_loss_history(model.loss_history, cfg.models / f"bnn_{month:02d}_loss.csv")
            log.info("month %d: bnn trained, final loss %.4f", month, model.loss_history[-1] if model.loss_history else float("nan"))
        print(f"month {month:02d}: trained {', '.join(kinds)} on {len(split.train)} days")
    return 0


def _load_month_models(cfg: RunConfig, month: int, strategies) -> MonthModels:
    def need(kind):
        path = model_path(cfg, kind, month)
        if not path.exists():
            raise UserError(f"missing {kind} model for month {month} ({path}); "
                            f"run `helios train --kind {'all' if kind == 'climatology' else kind} --months {month}` first")
        return store.load_model(path, kind)

    clim = need("climatology")
    return MonthModels(
        climatology=clim,
        bnn=need("bnn") if Strategy.BNN in strategies else None,
        markov=need("markov") if Strategy.MARKOV in strategies else None,
    )


def cmd_simulate(cfg: RunConfig, args) -> int:
    strategies = args.strategies or list(Strategy)
    needs_models = {Strategy.BNN, Strategy.MARKOV} & set(strategies)
    _, days = _load_days(cfg)
    prices = _prices(cfg)
    splits, models = {}, {}
    for month in cfg.months:
        splits[month] = split_by_years(days, cfg.train_years, cfg.test_years, month)
        if not splits[month].test:
            raise UserError(f"no test days for month {month} in years {cfg.test_years}")
        if needs_models:
            models[month] = _load_month_models(cfg, month, strategies)
    report = run_campaign(splits, strategies, prices, cfg.control(), cfg.test_days_per_month, models)

    out = Path(cfg.output)
    reporting.write_day_results(report.days, out / "day_results.csv")
    reporting.write_campaign_report(report.months, out / "campaign_report.csv")
    traces = reporting.write_traces(report.days, out / "traces")
    print(f"simulated {len(report.days)} strategy-days; wrote {out / 'day_results.csv'}, "
          f"{out / 'campaign_report.csv'} and {len(traces)} traces")
    return 0


def cmd_report(cfg: RunConfig, args) -> int:
    out = Path(cfg.output)
    day_csv = out / "day_results.csv"
    if not day_csv.exists():
        raise UserError(f"{day_csv} not found; run `helios simulate` first")
    inc_path, monthly_path, monthly, savings = reporting.write_report_tables(day_csv, out)

    print(f"{'month':>5} {'strategy':>10} {'cost':>9} {'vs base':>9} {'pct':>9}")
    for month, strategy, _, cost, _, inc, pct in monthly:
        print(f"{month:>5} {strategy:>10} {cost:9.4f} {inc:+9.4f} {pct:+8.2f}%")
    for other, pct in sorted(savings.items()):
        if other == Strategy.BASELINE.value:
            continue
        print(f"bnn saves {pct:.2f}% on average vs {other}")

    if not args.no_figures:
        figs = out / "figures"
        plotting.plot_monthly_costs(monthly, figs / "monthly_costs.png")
        plotting.plot_prices(_prices(cfg).prices, figs / "prices.png", cfg.step_seconds)
        for trace in sorted((out / "traces").glob("trace_*.csv")):
            plotting.plot_trace(trace, figs / f"{trace.stem}.png", title=trace.stem.removeprefix("trace_"))
    print(f"wrote {inc_path} and {monthly_path}")
    return 0


def cmd_predict(cfg: RunConfig, args) -> int:
    date = dt.date.fromisoformat(args.date)
    month = date.month
    data, _ = _load_days(cfg)
    day = build_step_series(data, date, **cfg.series_kwargs())
    T = day.T
    i = args.step
    if not 1 <= i <= T:
        raise UserError(f"--step must be in 1..{T}")
    clim = store.load_model(model_path(cfg, "climatology", month), "climatology") \
        if model_path(cfg, "climatology", month).exists() else None
    obs = day.sun_ppfd[:i]
    cols = {"step": np.arange(i + 1, T + 1), "actual_ppfd": day.sun_ppfd[i:]}
    if clim is not None:
        cols["climatology"] = clim.predict_horizon(obs, T)
    for kind in ("bnn", "markov"):
        path = model_path(cfg, kind, month)
        if not path.exists():
            continue
        model = store.load_model(path, kind)
        if kind == "bnn":
            seed = np.random.SeedSequence([cfg.seed, date.toordinal()])
            cols["bnn_pred"] = bnn_mod.BnnPredictor(model, seed=seed).predict_horizon(obs, T)
        else:
            cols["markov_pred"] = MarkovPredictor(model).predict_horizon(obs, T)
    if len(cols) == 2:
        raise UserError(f"no models for month {month} in {cfg.models}; run `helios train` first")
    names = list(cols)
    lines = [",".join(names)]
    for n in range(T - i):
        lines.append(",".join(reporting.fmt(cols[k][n].item()) for k in names))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="helios", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--months", type=_months, help="e.g. 1,3,7 or 1-12")
    p.add_argument("--seed", type=int)
    p.add_argument("--data", help="irradiance CSV file or directory")
    p.add_argument("--models", help="model directory")
    p.add_argument("--output", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic irradiance CSV")
    g.add_argument("--years", default="2001-2004", help="e.g. 2001-2004")
    g.add_argument("--cloud", type=float, default=0.6, help="max daily attenuation in [0, 1)")
    g.add_argument("--transmittance", type=float, default=0.35, help="greenhouse cover transmission")
    g.add_argument("--resolution", type=int, default=900, help="sample spacing in seconds")
    g.add_argument("--out", help="CSV path (default: <data>/synthetic.csv)")

    t = sub.add_parser("train", help="fit per-month predictors")
    t.add_argument("--kind", choices=("bnn", "markov", "all"), default="all")
    t.add_argument("--epochs", type=int, help="override BNN epochs")

    s = sub.add_parser("simulate", help="run the strategy comparison campaign")
    s.add_argument("--strategies", type=_strategies, help="comma list of baseline,bnn,markov,heuristic")

    r = sub.add_parser("report", help="cost-increase tables and figures from simulation output")
    r.add_argument("--no-figures", action="store_true")

    pr = sub.add_parser("predict", help="dump forecasts for the rest of one day")
    pr.add_argument("--date", required=True)
    pr.add_argument("--step", type=int, default=1, help="last observed step")
    pr.add_argument("--out")
    return p


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "simulate": cmd_simulate,
            "report": cmd_report, "predict": cmd_predict}


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.months:
        cfg.months = args.months
    if args.seed is not None:
        cfg.seed = args.seed
    for key in ("data", "models", "output"):
        if getattr(args, key):
            setattr(cfg, key, Path(getattr(args, key)).resolve())
    if getattr(args, "epochs", None) is not None:
        cfg.bnn = dataclasses.replace(cfg.bnn, epochs=args.epochs)
    return cfg.validate()


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"status": "error", "kind": kind, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        return COMMANDS[args.command](cfg, args)
    except UserError as exc:
        return _fail("user", str(exc), 1)
    except USER_ERRORS as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        return _fail(type(exc).__name__, str(msg), 1)
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        return _fail(type(exc).__name__, str(exc), 2)


if __name__ == "__main__":
    sys.exit(main())
