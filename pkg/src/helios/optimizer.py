"""Receding-horizon LED schedule via the separable KKT structure.

Over steps ``t = i..T`` the controller minimizes the price-weighted LED PPFD

    sum_t C_t * [ (1/k) ln(a / (a - x_t - sbar_t)) - s_t ]

subject to ``sum_t (x_t + sbar_t) >= B`` and ``0 <= x_t <= u_t``, where
``x_t`` is LED-supplied ETR, ``sbar_t`` the (measured or predicted) sunlight
ETR and ``s_t`` the sunlight PPFD. Each term is convex in ``x_t`` with
derivative ``C_t / (k (a - x_t - sbar_t))``, so for a multiplier ``lam`` the
stationary point is ``a - sbar_t - C_t / (k lam)`` clamped to the box: a
water-filling problem on one scalar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from helios.units import DEFAULT_PARAMS, PhotosynthesisParams

#: Table value of the maximum LED ETR (LED max PPFD of 200 umol m^-2 s^-1).
DEFAULT_U_LED = 51.47
#: LED photon efficacy, umol per J.
DEFAULT_LED_EFFICACY = 2.8

MAX_BISECTION_ITERS = 200


def cost_factor(m: int = 900, efficacy: float = DEFAULT_LED_EFFICACY) -> float:
    """Convert ``cent/kWh * umol m^-2 s^-1`` for one ``m``-second step into cent/m^2.

    For 15-minute steps and 2.8 umol/J this is ``0.25 / 2800``.
    """
    return (m / 3600) / (efficacy * 1e3)


def remaining_budget(dpi_mol: float, m: int, history=()) -> float:
    """ETR-sum still required on the step grid; negative once the target is exceeded."""
    return dpi_mol * 1e6 / m - float(np.sum(history))


@dataclass(frozen=True)
class HorizonProblem:
    """Decision problem at step ``start_step`` over the remaining horizon.

    ``sun_etr`` and ``sun_ppfd`` hold the measured value for ``start_step``
    followed by predictions; ``budget`` is the remaining ETR-sum requirement
    including the sunlight contribution.
    """

    prices: np.ndarray
    sun_etr: np.ndarray
    sun_ppfd: np.ndarray
    budget: float
    params: PhotosynthesisParams = DEFAULT_PARAMS
    u_led: float = DEFAULT_U_LED
    start_step: int = 1
    eps: float | None = None

    def __post_init__(self):
        for name in ("prices", "sun_etr", "sun_ppfd"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        n = self.prices.size
        if self.prices.ndim != 1 or self.sun_etr.shape != (n,) or self.sun_ppfd.shape != (n,):
            raise ValueError("prices, sun_etr and sun_ppfd must be 1-D arrays of equal length")
        if np.any(~np.isfinite(self.prices)) or np.any(self.prices <= 0):
            raise ValueError("prices must be positive")
        a = self.params.a
        if np.any(~np.isfinite(self.sun_etr)) or np.any(self.sun_etr < 0) or np.any(self.sun_etr >= a):
            raise ValueError(f"sun ETR must lie in [0, {a})")
        if not self.u_led > 0:
            raise ValueError("u_led must be positive")
        if not math.isfinite(self.budget):
            raise ValueError("budget must be finite")

    @property
    def epsilon(self) -> float:
        return 1e-6 * self.params.a if self.eps is None else self.eps

    @property
    def upper(self) -> np.ndarray:
        """Per-step bound ``min(u_led, a - sbar - eps)``, kept inside the log's domain."""
        return np.clip(self.params.a - self.sun_etr - self.epsilon, 0.0, self.u_led)

    @property
    def need(self) -> float:
        """LED ETR still needed after the sunlight contribution."""
        return self.budget - float(self.sun_etr.sum())


@dataclass(frozen=True)
class LightingSchedule:
    x: np.ndarray  # LED ETR per step, start_step..T
    multiplier: float  # inf when infeasible
    feasible: bool
    diagnostics: dict = field(default_factory=dict)


def led_ppfd(x, sun_etr, params: PhotosynthesisParams = DEFAULT_PARAMS) -> np.ndarray:
    """LED PPFD needed to lift total ETR from ``sun_etr`` to ``sun_etr + x``.

    Equals ``(1/k) ln(a / (a - x - sbar)) - s`` when ``sbar`` is the ETR of ``s``.
    """
    x = np.asarray(x, dtype=float)
    headroom = params.a - np.asarray(sun_etr, dtype=float)
    if np.any(x >= headroom):
        raise ValueError("x + sun ETR reaches the ETR asymptote")
    return np.maximum(-np.log1p(-x / headroom) / params.k, 0.0)


def objective(x, problem: HorizonProblem) -> float:
    """Price-weighted LED PPFD (the optimization objective, physical form)."""
    return float(np.sum(problem.prices * led_ppfd(x, problem.sun_etr, problem.params)))


def schedule_cost(x, prices, sun_etr, params: PhotosynthesisParams = DEFAULT_PARAMS, l: float | None = None) -> float:
    """Electricity cost in cent/m^2 of an LED ETR schedule."""
    l = cost_factor() if l is None else l
    return float(np.sum(np.asarray(prices, dtype=float) * led_ppfd(x, sun_etr, params)) * l)


def _x_of(nu, head, ck, upper):
    # nu = 1/lambda; x is nonincreasing in nu
    return np.clip(head - nu * ck, 0.0, upper)


def solve_horizon(problem: HorizonProblem) -> LightingSchedule:
    """Exact minimizer of the horizon problem."""
    p = problem
    upper = p.upper
    need = p.need
    n = p.prices.size
    if n == 0:
        return LightingSchedule(np.zeros(0), 0.0, need <= 0, {"reason": "empty horizon"})
    if need <= 0:
        return LightingSchedule(np.zeros(n), 0.0, True, {"reason": "budget met by sunlight"})

    cap = float(upper.sum())
    if cap < need - 1e-9 * max(1.0, need):
        return LightingSchedule(upper.copy(), math.inf, False, {"reason": "infeasible", "shortfall": need - cap})
    if cap <= need:
        return LightingSchedule(upper.copy(), math.inf, True, {"reason": "all steps at bound"})

    head = p.params.a - p.sun_etr
    ck = p.prices / p.params.k
    # nu_lo puts every step at its bound, nu_hi turns every step off
    nu_lo, nu_hi = 0.0, float(np.max(head / ck))
    tol = 1e-8 * max(1.0, need)
    iters = 0
    for iters in range(1, MAX_BISECTION_ITERS + 1):
        nu = 0.5 * (nu_lo + nu_hi)
        total = _x_of(nu, head, ck, upper).sum()
        if total >= need:
            nu_lo = nu
        else:
            nu_hi = nu
        if abs(total - need) <= tol and total >= need:
            break

    # nu_lo is on the feasible side; solve exactly on its active set
    nu = nu_lo
    x = _x_of(nu, head, ck, upper)
    free = (x > 0) & (x < upper)
    if free.any():
        at_upper = x >= upper
        nu_star = (head[free].sum() + upper[at_upper].sum() - need) / ck[free].sum()
        x_star = _x_of(nu_star, head, ck, upper)
        if abs(x_star.sum() - need) < abs(x.sum() - need) and x_star.sum() >= need - 1e-12 * max(1.0, need):
            nu, x = nu_star, x_star

    lam = 1.0 / nu if nu > 0 else math.inf
    return LightingSchedule(x, lam, True, {"iterations": iters, "residual": float(x.sum() - need)})
