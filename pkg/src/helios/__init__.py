"""Cost-optimal LED supplemental lighting for greenhouses.

Receding-horizon control of LED output under a daily photochemical
integral requirement, driven by pluggable sunlight predictors.
"""

from helios.units import (
    DEFAULT_PARAMS,
    PhotosynthesisParams,
    etr_from_ppfd,
    ppfd_from_etr,
    watts_to_ppfd,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_PARAMS",
    "PhotosynthesisParams",
    "etr_from_ppfd",
    "ppfd_from_etr",
    "watts_to_ppfd",
]
