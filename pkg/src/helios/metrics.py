"""Prediction quality scores (coefficient of determination and RMSE)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PredictionScore:
    r_squared: float  # NaN when the observations have zero variance
    rmse_abs: float
    rmse_pct: float  # percent of max(observed); NaN when that max is 0

    @property
    def r_squared_defined(self) -> bool:
        return not math.isnan(self.r_squared)


def score(observed, predicted) -> PredictionScore:
    y = np.asarray(observed, dtype=float).ravel()
    yhat = np.asarray(predicted, dtype=float).ravel()
    if y.size == 0 or y.size != yhat.size:
        raise ValueError(f"need equal nonzero lengths, got {y.size} and {yhat.size}")

    sse = float(np.sum((y - yhat) ** 2))
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - sse / sst if sst > 0 else math.nan
    rmse = math.sqrt(sse / y.size)
    peak = float(np.max(y))
    pct = 100.0 * rmse / peak if peak > 0 else math.nan
    return PredictionScore(r_squared=r2, rmse_abs=rmse, rmse_pct=pct)
