"""Second-order (oscillator) models of market mispricing.

Submodules: ``sds`` and ``integrate`` for stochastic dynamical systems,
``oscillator`` for the single damped stochastic oscillator, ``noscillator``
and ``stochastic_market`` for n assets under the constraint sum x = 0,
``reducecheck`` for projectability tests, ``stats`` and ``ingest`` for
verification and data, ``cli`` for the command line.
"""

from .errors import NumericalFailure, OscimarketError, ValidationError
from .integrate import IntegratorConfig, Method, Trajectory
from .noise import NoiseEnsemble, NoiseStream
from .noscillator import (
    MarketSpec,
    closed_form_solution,
    inverse_from_frequencies,
    normal_modes,
    verify_interlacing,
)
from .oscillator import DampedOscillatorModel, QuadraticPotential
from .radial import Convention

__all__ = [
    "Convention",
    "DampedOscillatorModel",
    "IntegratorConfig",
    "MarketSpec",
    "Method",
    "NoiseEnsemble",
    "NoiseStream",
    "NumericalFailure",
    "OscimarketError",
    "QuadraticPotential",
    "Trajectory",
    "ValidationError",
    "closed_form_solution",
    "inverse_from_frequencies",
    "normal_modes",
    "verify_interlacing",
]

__version__ = "0.1.0"
