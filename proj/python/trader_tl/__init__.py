"""Source-guided horseshoe regression (TRADER) and its horseshoe baseline."""

from ._trader import (
    NumericalError,
    ValidationError,
    cosine_similarity,
    expected_informative_count,
    fit_horseshoe,
    fit_trader,
    kappa,
    metrics,
    rescale_source,
    select_tau,
    simulate,
)

__all__ = [
    "NumericalError",
    "ValidationError",
    "cosine_similarity",
    "expected_informative_count",
    "fit_horseshoe",
    "fit_trader",
    "kappa",
    "metrics",
    "rescale_source",
    "select_tau",
    "simulate",
]
