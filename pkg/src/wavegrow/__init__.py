"""Desk-scale laboratory for the cubic wave equation with a time-periodic potential.

``u_tt - Laplacian u + q(t, x) u + u**3 = 0`` on a periodic box, with exact
free propagation, a Duhamel/Picard local solver, a Strang-splitting
integrator, energy-identity diagnostics and constructive recurrence
envelopes.
"""

from .errors import (
    ArityError,
    BlowUpError,
    ConfigError,
    ConfigurationError,
    DomainError,
    NumericalFailure,
    PicardDivergence,
    SequenceOverflowError,
    StorageError,
    WavegrowError,
)
from .potential import PotentialSpec, eval_potential, estimate_deriv_bounds
from .propagator import StepRule, continuation_run, free_step, picard_solve, step_size
from .integrator import IntegratorConfig, evolve, strang_step
from .recurrence import RecurrenceParams, certify_envelope, check_series, extremal_sequence, min_envelope
from .series import NormSeries
from .spectral import Field, GridSpec, State, derivative, hcal_norm, lp_norm, sobolev_norm, transform

__version__ = "0.1.0"

__all__ = [
    "ArityError",
    "BlowUpError",
    "ConfigError",
    "ConfigurationError",
    "DomainError",
    "Field",
    "GridSpec",
    "IntegratorConfig",
    "NormSeries",
    "NumericalFailure",
    "PicardDivergence",
    "PotentialSpec",
    "RecurrenceParams",
    "SequenceOverflowError",
    "State",
    "StepRule",
    "StorageError",
    "WavegrowError",
    "certify_envelope",
    "check_series",
    "continuation_run",
    "derivative",
    "estimate_deriv_bounds",
    "eval_potential",
    "evolve",
    "extremal_sequence",
    "free_step",
    "hcal_norm",
    "lp_norm",
    "min_envelope",
    "picard_solve",
    "sobolev_norm",
    "step_size",
    "strang_step",
    "transform",
]
