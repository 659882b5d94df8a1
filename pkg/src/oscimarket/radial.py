"""Radial amplitude ("bell-shaped") processes and phase increments.

Two conventions for the radial SDE are supported:

``cartesian_consistent``
    dr = (sigma^2 / (2 r) - g(r)) dt + sigma dB, the Ito equation satisfied
    by the radius of the planar damped noisy oscillator.
``paper_literal``
    dr = (1/r - g(r)) dt + dB, unit noise regardless of sigma.

``g`` is the radial damping drift, ``g(r) = c * r`` by default.

Stepping schemes: ``implicit`` treats the singular a/r term implicitly,
solving r' = r - g(r) dt + s dB + a dt / r' for the positive root, which is
always positive.  ``euler`` is plain Euler-Maruyama with a dt-halving retry
when a step lands at r <= 0; near the origin its a/r kick overshoots and
biases the stationary law at practical step sizes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import StepRejectionExhausted, ValidationError

MAX_HALVINGS = 10


class Scheme(str, enum.Enum):
    IMPLICIT = "implicit"
    EULER = "euler"


class Convention(str, enum.Enum):
    CARTESIAN_CONSISTENT = "cartesian_consistent"
    PAPER_LITERAL = "paper_literal"


def tabulated(r_grid, values) -> Callable[[np.ndarray], np.ndarray]:
    """Radial damping drift given on a grid, linearly interpolated."""
    r_grid = np.asarray(r_grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if r_grid.ndim != 1 or r_grid.shape != values.shape or np.any(np.diff(r_grid) <= 0):
        raise ValidationError("tabulated damping needs increasing r values of matching length")
    return lambda r: np.interp(r, r_grid, values)


@dataclass(frozen=True)
class RadialParams:
    c: float = 1.0
    sigma: float = 1.0
    r0: float = 1.0
    convention: Convention = Convention.CARTESIAN_CONSISTENT
    damping: Optional[Callable] = None
    scheme: Scheme = Scheme.IMPLICIT

    def __post_init__(self):
        # c, sigma and r0 may be arrays (one entry per mode) for vectorised stepping
        if np.any(np.asarray(self.c) < 0):
            raise ValidationError("damping coefficient c must be >= 0")
        if np.any(np.asarray(self.sigma) < 0):
            raise ValidationError("sigma must be >= 0")
        if np.any(~(np.asarray(self.r0) > 0)):
            raise ValidationError("initial radius r0 must be > 0")
        object.__setattr__(self, "convention", Convention(self.convention))
        object.__setattr__(self, "scheme", Scheme(self.scheme))

    def damping_drift(self, r):
        if self.damping is not None:
            return np.asarray(self.damping(r), dtype=float)
        return self.c * r

    @property
    def repulsion(self):
        """Coefficient a of the a/r drift term."""
        if self.convention is Convention.PAPER_LITERAL:
            return 1.0
        return 0.5 * np.square(self.sigma)

    def drift(self, r):
        return self.repulsion / r - self.damping_drift(r)

    @property
    def noise_scale(self):
        return 1.0 if self.convention is Convention.PAPER_LITERAL else self.sigma


def stack_params(params) -> Optional[RadialParams]:
    """Merge per-mode parameters into one array-valued RadialParams, if possible.

    Only the implicit scheme is merged; the Euler retry works per element
    with scalar parameters.
    """
    params = tuple(params)
    first = params[0]
    if first.scheme is not Scheme.IMPLICIT or any(p.damping is not None for p in params):
        return None
    if any(p.convention is not first.convention or p.scheme is not first.scheme for p in params):
        return None
    return RadialParams(
        np.array([p.c for p in params], dtype=float),
        np.array([p.sigma for p in params], dtype=float),
        np.array([p.r0 for p in params], dtype=float),
        first.convention,
        None,
        first.scheme,
    )


def _euler(params: RadialParams, r, dt, dB):
    return r + params.drift(r) * dt + params.noise_scale * dB


def _implicit(params: RadialParams, r, dt, dB):
    b = r - params.damping_drift(r) * dt + params.noise_scale * dB
    return 0.5 * (b + np.sqrt(b * b + 4.0 * params.repulsion * dt))


def step_radial(params: RadialParams, r, dt: float, dB):
    """One step of the radial SDE, kept strictly positive.

    With the ``euler`` scheme, where the plain step lands at r <= 0 it is
    redone as 2, 4, ... substeps, the Brownian increment split evenly between
    them, up to 10 halvings.  Works elementwise on arrays.
    """
    r = np.asarray(r, dtype=float)
    dB = np.asarray(dB, dtype=float)
    if np.any(~(r > 0)):
        raise ValidationError("radius must be positive")
    if params.scheme is Scheme.IMPLICIT:
        new = _implicit(params, r, dt, dB)
        if np.all(new > 0):
            return new
        raise StepRejectionExhausted(f"implicit radial step reached r <= 0 (dt={dt} too large for the damping)")
    new = _euler(params, r, dt, dB)
    bad = ~(new > 0)
    if not np.any(bad):
        return new
    if new.ndim == 0:
        return np.float64(_substep(params, float(r), dt, float(dB)))
    new = np.array(new, copy=True)
    r_b = np.broadcast_to(r, new.shape)
    dB_b = np.broadcast_to(dB, new.shape)
    for idx in zip(*np.nonzero(bad)):
        new[idx] = _substep(params, float(r_b[idx]), dt, float(dB_b[idx]))
    return new


def _substep(params, r, dt, dB):
    for level in range(1, MAX_HALVINGS + 1):
        parts = 2 ** level
        trial = r
        for _ in range(parts):
            trial = float(_euler(params, trial, dt / parts, dB / parts))
            if not trial > 0:
                break
        else:
            return trial
    raise StepRejectionExhausted(
        f"radial step from r={r:.6g} stayed non-positive after {MAX_HALVINGS} halvings of dt={dt}"
    )


def step_phase(phase_sigma: float, r, dt: float, dW):
    """Phase increment (phase_sigma / r) dW."""
    return phase_sigma / np.asarray(r, dtype=float) * dW
