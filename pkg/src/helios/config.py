"""Run configuration: one JSON file, with a few command-line overrides.

Relative paths are resolved against the directory of the config file.
Every key is optional; see ``examples/config.json`` in the repository for a
complete file.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from helios.bnn import BnnConfig
from helios.data import n_steps
from helios.optimizer import DEFAULT_LED_EFFICACY, DEFAULT_U_LED
from helios.simulation import ControlConfig
from helios.units import DEFAULT_CONV_FACTOR, PhotosynthesisParams


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    data: Path = Path("data")
    prices: Path | None = None  # None: shipped time-of-use profile
    models: Path = Path("models")
    output: Path = Path("out")
    photoperiod_start: dt.time = dt.time(4, 0)
    photoperiod_hours: float = 16.0
    step_seconds: int = 900
    dpi_mol: float = 3.0
    u_led: float = DEFAULT_U_LED
    a: float = 121.0
    k: float = 0.00277
    conv_factor: float = DEFAULT_CONV_FACTOR
    led_efficacy: float = DEFAULT_LED_EFFICACY
    heuristic_ppfd: float | None = None
    dark_ppfd: float = 0.0
    months: list = field(default_factory=lambda: list(range(1, 13)))
    train_years: list = field(default_factory=lambda: list(range(1997, 2009)))
    test_years: list = field(default_factory=lambda: list(range(2009, 2013)))
    test_days_per_month: int = 3
    bnn: BnnConfig = field(default_factory=BnnConfig)
    markov_bins: int = 10
    markov_alpha: float = 1.0
    seed: int = 0

    @property
    def params(self) -> PhotosynthesisParams:
        return PhotosynthesisParams(self.a, self.k)

    @property
    def photoperiod_seconds(self) -> int:
        return int(round(self.photoperiod_hours * 3600))

    @property
    def T(self) -> int:
        return n_steps(self.photoperiod_seconds, self.step_seconds)

    def control(self) -> ControlConfig:
        return ControlConfig(
            params=self.params,
            u_led=self.u_led,
            dpi_mol=self.dpi_mol,
            step_seconds=self.step_seconds,
            led_efficacy=self.led_efficacy,
            heuristic_ppfd=self.heuristic_ppfd,
            dark_ppfd=self.dark_ppfd,
            seed=self.seed,
        )

    def series_kwargs(self) -> dict:
        return dict(
            m=self.step_seconds,
            photoperiod_start=self.photoperiod_start,
            photoperiod_seconds=self.photoperiod_seconds,
            conv_factor=self.conv_factor,
            params=self.params,
        )

    def bnn_config_for(self, month: int) -> BnnConfig:
        seed = int(np.random.SeedSequence([self.seed, month]).generate_state(1)[0])
        return dataclasses.replace(self.bnn, seed=seed)

    def validate(self) -> "RunConfig":
        try:
            self.params
            _ = self.T
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not self.u_led > 0 or self.u_led >= self.a:
            raise ConfigError("u_led must lie in (0, a)")
        if self.dpi_mol < 0 or self.conv_factor <= 0 or self.led_efficacy <= 0:
            raise ConfigError("dpi_mol must be >= 0; conv_factor and led_efficacy > 0")
        bad = [m for m in self.months if not 1 <= m <= 12]
        if bad or not self.months:
            raise ConfigError(f"months must be a nonempty subset of 1..12, got {self.months}")
        if set(self.train_years) & set(self.test_years):
            raise ConfigError("train_years and test_years overlap")
        if self.test_days_per_month < 1 or self.markov_bins < 2:
            raise ConfigError("test_days_per_month must be >= 1 and markov_bins >= 2")
        return self


def _parse_time(value) -> dt.time:
    try:
        return dt.time.fromisoformat(str(value))
    except ValueError:
        raise ConfigError(f"photoperiod start {value!r} is not HH:MM") from None


def from_dict(d: dict, base: Path = Path(".")) -> RunConfig:
    d = dict(d)
    cfg = RunConfig()
    paths = d.pop("paths", {})
    for key in ("data", "prices", "models", "output"):
        if paths.get(key) is not None:
            setattr(cfg, key, (base / paths[key]).resolve())
        elif key != "prices":
            setattr(cfg, key, (base / getattr(cfg, key)).resolve())
    if "bnn" in d:
        try:
            cfg.bnn = BnnConfig.from_dict(d.pop("bnn"))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad bnn section: {exc}") from None
    markov = d.pop("markov", {})
    for section, allowed, given in (("paths", {"data", "prices", "models", "output"}, paths),
                                    ("markov", {"n_bins", "alpha"}, markov)):
        extra = set(given) - allowed
        if extra:
            raise ConfigError(f"unknown {section} key(s) {sorted(extra)}")
    cfg.markov_bins = int(markov.get("n_bins", cfg.markov_bins))
    cfg.markov_alpha = float(markov.get("alpha", cfg.markov_alpha))
    if "photoperiod_start" in d:
        cfg.photoperiod_start = _parse_time(d.pop("photoperiod_start"))
    known = {f.name for f in dataclasses.fields(RunConfig)}
    for key, value in d.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(cfg, key, value)
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return from_dict({}, Path.cwd()).validate()
    path = Path(path)
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return from_dict(d, path.resolve().parent).validate()
