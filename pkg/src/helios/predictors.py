"""Sunlight predictors used by the receding-horizon controller.

Every predictor works in PPFD space and implements ``predict_horizon``:
given the PPFD observed so far today (steps ``1..i``) and the day length
``T``, return the predicted PPFD of steps ``i+1..T``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from helios.data import StepSeries

log = logging.getLogger(__name__)


@runtime_checkable
class Predictor(Protocol):
    def predict_horizon(self, observed: np.ndarray, T: int) -> np.ndarray: ...


def _check_observed(observed, T) -> np.ndarray:
    obs = np.asarray(observed, dtype=float)
    if obs.ndim != 1 or not 1 <= obs.size <= T:
        raise ValueError(f"need between 1 and {T} observations, got {obs.size}")
    return obs


def _stack_days(train: Sequence[StepSeries]) -> np.ndarray:
    if not train:
        raise ValueError("training set is empty")
    lengths = {s.T for s in train}
    if len(lengths) != 1:
        raise ValueError(f"training days have differing step counts {sorted(lengths)}")
    return np.vstack([s.sun_ppfd for s in train])


@dataclass(frozen=True)
class ClimatologyProfile:
    """Per-step mean PPFD of the training days for one month."""

    month: int
    mean_ppfd: np.ndarray

    def predict_horizon(self, observed, T):
        obs = _check_observed(observed, T)
        if T != self.mean_ppfd.size:
            raise ValueError(f"profile has {self.mean_ppfd.size} steps, day has {T}")
        return self.mean_ppfd[obs.size:].copy()

    def to_payload(self) -> dict:
        return {"month": self.month, "mean_ppfd": self.mean_ppfd.tolist()}

    @classmethod
    def from_payload(cls, d: dict) -> "ClimatologyProfile":
        return cls(int(d["month"]), np.array(d["mean_ppfd"], dtype=float))


def fit_climatology(train: Sequence[StepSeries]) -> ClimatologyProfile:
    days = _stack_days(train)
    months = {s.month for s in train}
    return ClimatologyProfile(month=min(months), mean_ppfd=days.mean(axis=0))


@dataclass(frozen=True)
class MarkovModel:
    """Time-inhomogeneous Markov chain on PPFD bins.

    ``transitions[t-1]`` moves the state distribution from step ``t`` to
    ``t+1``. ``bin_centers`` holds the mean training PPFD seen in each bin
    (the bin midpoint for bins never visited), so a dark state predicts 0.
    """

    bin_edges: np.ndarray
    bin_centers: np.ndarray
    transitions: np.ndarray
    alpha: float = 1.0

    @property
    def n_bins(self) -> int:
        return int(self.bin_centers.size)

    @property
    def T(self) -> int:
        return int(self.transitions.shape[0]) + 1

    def state_of(self, ppfd: float) -> tuple[int, bool]:
        """Bin index holding ``ppfd`` and whether it had to be clamped to the top bin."""
        if ppfd < 0:
            raise ValueError("PPFD must be >= 0")
        top = self.bin_edges[-1]
        if ppfd > top:
            return self.n_bins - 1, True
        idx = int(np.searchsorted(self.bin_edges, ppfd, side="right")) - 1
        return min(max(idx, 0), self.n_bins - 1), False

    def to_payload(self) -> dict:
        return {
            "alpha": self.alpha,
            "bin_edges": self.bin_edges.tolist(),
            "bin_centers": self.bin_centers.tolist(),
            "transitions": self.transitions.tolist(),
        }

    @classmethod
    def from_payload(cls, d: dict) -> "MarkovModel":
        return cls(
            bin_edges=np.array(d["bin_edges"], dtype=float),
            bin_centers=np.array(d["bin_centers"], dtype=float),
            transitions=np.array(d["transitions"], dtype=float),
            alpha=float(d["alpha"]),
        )


def _bin_index(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(edges, values, side="right") - 1
    return np.clip(idx, 0, edges.size - 2)


def fit_markov(train: Sequence[StepSeries], n_bins: int = 10, alpha: float = 1.0) -> MarkovModel:
    """Laplace-smoothed per-step transition frequencies between uniform PPFD bins.

    Rows without any observed transition fall back to staying in place.
    """
    if n_bins < 2:
        raise ValueError(f"n_bins must be >= 2, got {n_bins}")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    days = _stack_days(train)
    top = float(days.max())
    edges = np.linspace(0.0, top if top > 0 else 1.0, n_bins + 1)
    states = _bin_index(days, edges)

    sums = np.bincount(states.ravel(), weights=days.ravel(), minlength=n_bins)
    visits = np.bincount(states.ravel(), minlength=n_bins)
    mids = 0.5 * (edges[:-1] + edges[1:])
    centers = np.where(visits > 0, sums / np.maximum(visits, 1), mids)

    T = days.shape[1]
    counts = np.zeros((T - 1, n_bins, n_bins))
    for t in range(T - 1):
        np.add.at(counts[t], (states[:, t], states[:, t + 1]), 1.0)

    row_n = counts.sum(axis=2, keepdims=True)
    seen = row_n > 0
    stay = np.broadcast_to(np.eye(n_bins), counts.shape)
    transitions = np.divide(counts + alpha, row_n + alpha * n_bins, out=stay.copy(), where=seen)
    return MarkovModel(edges, centers, np.ascontiguousarray(transitions), float(alpha))


def markov_predict(model: MarkovModel, i: int, s_i: float, horizon: int, diagnostics: dict | None = None) -> np.ndarray:
    """Expected PPFD for steps ``i+1..i+horizon`` starting from a point mass at ``s_i``."""
    if not 1 <= i < model.T:
        raise ValueError(f"step i must be in 1..{model.T - 1}, got {i}")
    horizon = min(horizon, model.T - i)
    state, clamped = model.state_of(s_i)
    if clamped:
        log.debug("PPFD %.1f above top bin edge %.1f, clamped", s_i, model.bin_edges[-1])
    if diagnostics is not None:
        diagnostics["clamped"] = clamped

    dist = np.zeros(model.n_bins)
    dist[state] = 1.0
    out = np.empty(horizon)
    for h in range(horizon):
        dist = dist @ model.transitions[i - 1 + h]
        out[h] = dist @ model.bin_centers
    return np.maximum(out, 0.0)


@dataclass(frozen=True)
class MarkovPredictor:
    model: MarkovModel

    def predict_horizon(self, observed, T):
        obs = _check_observed(observed, T)
        i = obs.size
        if i == T:
            return np.zeros(0)
        return markov_predict(self.model, i, float(obs[-1]), T - i)


@dataclass(frozen=True)
class PerfectPredictor:
    """Knows the whole day in advance (the full-information baseline)."""

    day: StepSeries

    def predict_horizon(self, observed, T):
        obs = _check_observed(observed, T)
        if T != self.day.T:
            raise ValueError("horizon length does not match the day")
        return np.array(self.day.sun_ppfd[obs.size:], dtype=float)


def perfect_predictor(day: StepSeries) -> PerfectPredictor:
    return PerfectPredictor(day)


@dataclass(frozen=True)
class DaylightGatedPredictor:
    """Climatology before sunrise, a forecasting model during the day, dark after sunset.

    Sunrise is the first observed PPFD above ``dark_ppfd``; sunset is an
    observation at or below it after sunrise.
    """

    prior: ClimatologyProfile
    model: Predictor
    dark_ppfd: float = 0.0

    def predict_horizon(self, observed, T):
        obs = _check_observed(observed, T)
        lit = obs > self.dark_ppfd
        if not lit.any():
            return self.prior.predict_horizon(obs, T)
        if not lit[-1]:
            return np.zeros(T - obs.size)
        return self.model.predict_horizon(obs, T)
