"""Relaxation of a two-level system coupled to a two-band random-matrix environment.

Exact propagation of the composite pure state, band-resolved (correlated)
and standard projection-operator master equations, Hilbert-space-average
rate equations, and an experiment harness tying them together.
"""
__version__ = "0.1.0"

from ._kernels import BACKEND, COMPILED  # noqa: E402
from .model import (  # noqa: E402
    ConfigurationError,
    ModelParams,
    TwoBandModel,
    build_model,
    random_lower_band_state,
    realization_seeds,
)
from .propagator import IntegrationAccuracyError, IntegratorOptions, evolve, product_state  # noqa: E402

__all__ = [
    "BACKEND",
    "COMPILED",
    "ConfigurationError",
    "IntegrationAccuracyError",
    "IntegratorOptions",
    "ModelParams",
    "TwoBandModel",
    "__version__",
    "build_model",
    "evolve",
    "product_state",
    "random_lower_band_state",
    "realization_seeds",
]
