"""Light units and the photosynthetic light-response curve.

Three quantities flow through the package and must not be mixed up:

* irradiance, solar power in W m^-2 (what weather stations report),
* PPFD, photon flux density in umol m^-2 s^-1 (what lamps are rated in),
* ETR, electron transport rate in umol m^-2 s^-1 (what the plant "uses").

They share a unit string for the last two, so they get distinct names here
and every conversion validates its domain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NewType, Union

import numpy as np

Irradiance = NewType("Irradiance", float)
Ppfd = NewType("Ppfd", float)
Etr = NewType("Etr", float)

ArrayLike = Union[float, np.ndarray]

#: W m^-2 of sunlight to umol m^-2 s^-1 of PPFD.
DEFAULT_CONV_FACTOR = 2.02


class DomainError(ValueError):
    """A quantity fell outside the domain of a conversion."""


@dataclass(frozen=True)
class PhotosynthesisParams:
    """Constants of ``ETR = a * (1 - exp(-k * PPFD))``.

    ``a`` is the ETR asymptote and ``k`` the initial slope divided by ``a``.
    Defaults are for 'Green Towers' lettuce.
    """

    a: float = 121.0
    k: float = 0.00277

    def __post_init__(self):
        if not (self.a > 0 and np.isfinite(self.a)):
            raise DomainError(f"asymptote a must be positive, got {self.a}")
        if not (self.k > 0 and np.isfinite(self.k)):
            raise DomainError(f"slope k must be positive, got {self.k}")


DEFAULT_PARAMS = PhotosynthesisParams()


def _check_nonneg(x, name: str):
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError(f"{name} must be >= 0")
    return arr


def _like(arr: np.ndarray, x):
    # hand scalars back as Python floats
    return float(arr) if np.ndim(x) == 0 else arr


def watts_to_ppfd(irr: ArrayLike, conv_factor: float = DEFAULT_CONV_FACTOR) -> ArrayLike:
    arr = _check_nonneg(irr, "irradiance")
    return _like(conv_factor * arr, irr)


def etr_from_ppfd(p: ArrayLike, params: PhotosynthesisParams = DEFAULT_PARAMS) -> ArrayLike:
    """ETR produced by a PPFD level; strictly increasing and bounded by ``a``."""
    arr = _check_nonneg(p, "PPFD")
    return _like(-params.a * np.expm1(-params.k * arr), p)


def ppfd_from_etr(e: ArrayLike, params: PhotosynthesisParams = DEFAULT_PARAMS) -> ArrayLike:
    """Inverse of :func:`etr_from_ppfd`. Requires ``0 <= e < a``."""
    arr = _check_nonneg(e, "ETR")
    if np.any(arr >= params.a):
        raise DomainError(f"ETR must stay below the asymptote a={params.a}")
    return _like(-np.log1p(-arr / params.a) / params.k, e)
