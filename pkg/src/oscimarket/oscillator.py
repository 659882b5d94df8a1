"""Single-asset damped stochastic oscillator.

Phase space is (x, y) = (mispricing, momentum).  The model is

    dx = (y - f(r) x) dt + sigma o dB1
    dy = (-U'(x) - f(r) y) dt + sigma o dB2,     r = sqrt(x^2 + y^2)

where ``f(r) = g(r) / r`` and ``g`` is the radial damping drift (``c r`` by
default, so ``f = c`` and the quadratic case is a rotating
Ornstein-Uhlenbeck process with a Rayleigh stationary radius).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Union

import numpy as np
from scipy import integrate as _quad
from scipy import optimize
from scipy.interpolate import CubicHermiteSpline
from scipy.special import gammainc

from .errors import UnsupportedPotential, ValidationError
from .integrate import (
    IntegratorConfig,
    Method,
    Trajectory,
    integrate_sde,
    integrate_second_order,
)
from .noise import NoiseEnsemble, chunk_steps
from .radial import Convention, RadialParams, step_radial
from .sds import VectorFieldSet

TABLE_NODES = 4097  # grid for the tabulated radial CDF of a general damping profile


@dataclass(frozen=True)
class QuadraticPotential:
    k: float = 1.0
    kind = "quadratic"

    def __post_init__(self):
        if not self.k > 0:
            raise ValidationError("quadratic potential needs k > 0")

    def value(self, x):
        return 0.5 * self.k * np.square(x)

    def derivative(self, x):
        return self.k * np.asarray(x, dtype=float)


@dataclass(frozen=True)
class DoubleWellPotential:
    """Quartic with minima exactly at v1 and v2 (value 0) and barrier ``depth``."""

    v1: float = -1.0
    v2: float = 1.0
    depth: float = 1.0
    kind = "double_well"

    def __post_init__(self):
        if not self.depth > 0:
            raise ValidationError("double well needs depth > 0")
        if not self.v1 < self.v2:
            raise ValidationError("double well needs v1 < v2")

    @property
    def _scale(self):
        return self.depth / ((self.v2 - self.v1) / 2.0) ** 4

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return self._scale * ((x - self.v1) * (x - self.v2)) ** 2

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        q = (x - self.v1) * (x - self.v2)
        return 2.0 * self._scale * q * (2.0 * x - self.v1 - self.v2)


@dataclass(frozen=True)
class WalledPotential:
    """Quadratic well plus a Gaussian spike of given height and width."""

    k: float = 1.0
    wall_position: float = 1.0
    wall_height: float = 1.0
    wall_width: float = 0.1
    kind = "walled"

    def __post_init__(self):
        if not (self.k > 0 and self.wall_height > 0 and self.wall_width > 0):
            raise ValidationError("walled potential needs k, wall_height, wall_width > 0")

    def _bump(self, x):
        return self.wall_height * np.exp(-0.5 * ((x - self.wall_position) / self.wall_width) ** 2)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * self.k * x * x + self._bump(x)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        return self.k * x - self._bump(x) * (x - self.wall_position) / self.wall_width ** 2


Potential = Union[QuadraticPotential, DoubleWellPotential, WalledPotential]

_POTENTIALS = {
    "quadratic": QuadraticPotential,
    "double_well": DoubleWellPotential,
    "walled": WalledPotential,
}


def potential_from_dict(spec: dict) -> Potential:
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in _POTENTIALS:
        raise ValidationError(f"potential.kind must be one of {sorted(_POTENTIALS)}, got {kind!r}")
    cls = _POTENTIALS[kind]
    allowed = set(cls.__dataclass_fields__)
    for key in spec:
        if key not in allowed:
            raise ValidationError(f"unknown key potential.{key} for kind {kind!r}")
    return cls(**{k: float(v) for k, v in spec.items()})


class DampingMode(str, enum.Enum):
    RADIAL = "radial"      # -f(r) (x dx + y dy), as in the planar model
    MOMENTUM = "momentum"  # -f(r) y dy only; dissipative for any potential


@dataclass(frozen=True)
class DampedOscillatorModel:
    potential: Potential = QuadraticPotential()
    damping: float = 1.0
    sigma: float = 1.0
    damping_profile: Optional[Callable] = None
    damping_mode: DampingMode = DampingMode.RADIAL

    def __post_init__(self):
        if self.damping < 0:
            raise ValidationError("damping coefficient must be >= 0")
        if self.sigma < 0:
            raise ValidationError("sigma must be >= 0")
        object.__setattr__(self, "damping_mode", DampingMode(self.damping_mode))

    @property
    def linear_damping(self) -> bool:
        return self.damping_profile is None

    def radial_damping(self, r):
        """g(r), the damping drift felt by the radius."""
        if self.damping_profile is None:
            return self.damping * np.asarray(r, dtype=float)
        return np.asarray(self.damping_profile(r), dtype=float)

    def damping_rate(self, x, y):
        """f(r) = g(r) / r, the Cartesian damping multiplier."""
        if self.damping_profile is None:
            return self.damping
        r = np.hypot(x, y)
        return np.where(r > 0, self.radial_damping(np.where(r > 0, r, 1.0)) / np.where(r > 0, r, 1.0), 0.0)

    def radial_params(self, r0: float = 1.0, convention=Convention.CARTESIAN_CONSISTENT) -> RadialParams:
        return RadialParams(self.damping, self.sigma, r0, convention, self.damping_profile)

    def vector_fields(self) -> VectorFieldSet:
        U = self.potential
        radial = self.damping_mode is DampingMode.RADIAL

        def drift(s):
            x, y = s[0], s[1]
            f = self.damping_rate(x, y)
            dx = y - f * x if radial else y + 0.0 * x
            return np.stack([dx, -U.derivative(x) - f * y])

        fields = ()
        if self.sigma > 0:
            sig = self.sigma
            fields = (lambda s: np.array([sig, 0.0]), lambda s: np.array([0.0, sig]))
        return VectorFieldSet(2, drift, fields)


def _ensemble_size(noise, x0):
    if isinstance(noise, NoiseEnsemble):
        return noise.n_paths
    return np.size(x0) if np.ndim(x0) else None


def simulate_cartesian(m: DampedOscillatorModel, x0, y0, cfg: IntegratorConfig, noise=None) -> Trajectory:
    """Phase-plane trajectory; ``x0, y0`` may be arrays for an ensemble.

    Energies (potential, kinetic, total) are attached to the trajectory.
    """
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    if x0.shape != y0.shape:
        raise ValidationError("x0 and y0 must have the same shape")
    if cfg.method is Method.HAMILTONIAN_SPLITTING:
        if m.linear_damping:
            rate = m.damping
        else:
            rate = lambda x, p: m.damping_rate(x, p)
        traj = integrate_second_order(
            lambda x: -m.potential.derivative(x),
            rate,
            m.sigma,
            x0[None, ...],
            y0[None, ...],
            cfg,
            noise if m.sigma > 0 else None,
            position_noise=m.sigma,
            damp_position=m.damping_mode is DampingMode.RADIAL,
        )
    else:
        V = m.vector_fields()
        traj = integrate_sde(V, np.stack([x0, y0]), cfg, noise if V.noise_dim else None)
    es = energy_series(traj, m)
    traj.energy = {"potential": es.potential, "kinetic": es.kinetic, "total": es.total}
    return traj


def simulate_polar_radial(
    m: DampedOscillatorModel,
    r0,
    cfg: IntegratorConfig,
    noise=None,
    convention=Convention.CARTESIAN_CONSISTENT,
) -> Trajectory:
    """Radius-only simulation; ``r0`` may be an array for an ensemble."""
    _require_symmetric(m)
    params = m.radial_params(1.0, convention)
    r = np.array(r0, dtype=float)
    if np.any(~(r > 0)):
        raise ValidationError("r0 must be positive")
    n_paths = r.size if r.ndim else 1
    stochastic = params.noise_scale > 0
    if stochastic:
        if noise is None or noise.dim != 1:
            raise ValidationError("radial simulation needs a one-dimensional noise stream")
        if r.ndim and (not isinstance(noise, NoiseEnsemble) or noise.n_paths != r.size):
            raise ValidationError("an ensemble of radii needs a matching NoiseEnsemble")
    rec = cfg.recorded_steps()
    out = np.empty((len(rec), 1) + r.shape)
    out[0, 0] = r
    slot = 1
    size = chunk_steps(cfg.steps, 1, n_paths)
    dt = cfg.dt
    for start in range(0, cfg.steps, size):
        count = min(size, cfg.steps - start)
        block = noise.increments(start, count, dt)[:, 0] if stochastic else np.zeros((count,) + r.shape)
        for j in range(count):
            r = step_radial(params, r, dt, block[j])
            if slot < len(rec) and rec[slot] == start + j + 1:
                out[slot, 0] = r
                slot += 1
    return Trajectory(cfg.t0 + rec * dt, out)


def _require_symmetric(m: DampedOscillatorModel):
    pot = m.potential
    if not isinstance(pot, QuadraticPotential) or pot.k != 1.0:
        raise UnsupportedPotential(
            f"radial reduction needs the rotation-invariant quadratic potential (k=1), got {pot!r}"
        )


@dataclass(frozen=True)
class RadialDensity:
    """Normalised stationary density of the radius on r > 0."""

    log_unnormalised: Callable[[np.ndarray], np.ndarray]
    log_norm: float
    quad_error: float
    closed_cdf: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def pdf(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        pos = r > 0
        out[pos] = np.exp(self.log_unnormalised(r[pos]) - self.log_norm)
        return out

    __call__ = pdf

    def cdf(self, r):
        r = np.asarray(r, dtype=float)
        if self.closed_cdf is not None:
            return np.where(r > 0, self.closed_cdf(np.clip(r, 0.0, None)), 0.0)
        table = self._cdf_table
        return np.clip(table(np.clip(r, 0.0, table.x[-1])), 0.0, 1.0)

    @cached_property
    def _cdf_table(self):
        """Quadrature at grid nodes, cubic Hermite in between (the pdf is the exact slope)."""
        top = max(1.0, self.mode())
        while self.pdf(np.array([top]))[0] * top > 1e-17:
            top *= 1.5
        nodes = np.linspace(0.0, top, TABLE_NODES)
        pieces = [_quad.quad(self.pdf, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
                  for a, b in zip(nodes[:-1], nodes[1:])]
        values = np.concatenate([[0.0], np.cumsum(pieces)])
        return CubicHermiteSpline(nodes, values, self.pdf(nodes))

    def mean(self) -> float:
        return _quad.quad(lambda r: r * self.pdf(r), 0, np.inf, epsabs=1e-13, epsrel=1e-11, limit=200)[0]

    def mode(self) -> float:
        res = optimize.minimize_scalar(
            lambda r: -self.log_unnormalised(np.asarray(r)), bounds=(1e-9, 1e3), method="bounded",
            options={"xatol": 1e-12},
        )
        return float(res.x)

    def energy_pdf(self, h):
        """Density of h = r^2 / 2."""
        h = np.asarray(h, dtype=float)
        r = np.sqrt(2.0 * np.clip(h, 0.0, None))
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(h > 0, self.pdf(r) / np.where(r > 0, r, 1.0), 0.0)


def stationary_radial_density(m: DampedOscillatorModel, convention=Convention.CARTESIAN_CONSISTENT) -> RadialDensity:
    """p(r) proportional to exp((2/s^2) * integral of the radial drift)."""
    _require_symmetric(m)
    if not (m.damping > 0 or m.damping_profile is not None):
        raise ValidationError("a stationary density needs damping c > 0")
    if not m.sigma > 0:
        raise ValidationError("a stationary density needs sigma > 0")
    convention = Convention(convention)
    if convention is Convention.PAPER_LITERAL:
        # drift 1/r - g(r), unit noise
        log_r_weight, s2 = 2.0, 1.0
    else:
        log_r_weight, s2 = 1.0, m.sigma ** 2

    if m.linear_damping:
        c = m.damping
        # p ~ r^k exp(-(c / s2) r^2): a regularised lower incomplete gamma
        shape, rate = 0.5 * (log_r_weight + 1.0), c / s2

        def closed(r):
            return gammainc(shape, rate * np.square(r))

        def g_integral(r):
            return 0.5 * c * (np.square(r) - 1.0)
    else:
        g = m.damping_profile
        closed = None

        def g_integral(r):
            r = np.asarray(r, dtype=float)
            vals = [_quad.quad(lambda u: float(g(u)), 1.0, float(ri))[0] for ri in r.ravel()]
            return np.array(vals).reshape(r.shape)

    def logp(r):
        r = np.asarray(r, dtype=float)
        return log_r_weight * np.log(r) - 2.0 / s2 * g_integral(r)

    # normalise around the mode so exp() stays in range
    peak = -optimize.minimize_scalar(lambda r: -logp(np.asarray(r)), bounds=(1e-9, 1e3), method="bounded").fun
    val, err = _quad.quad(lambda r: math.exp(float(logp(np.asarray(r))) - peak) if r > 0 else 0.0,
                          0, np.inf, epsabs=0.0, epsrel=1e-12, limit=400)
    rel_err = err / val
    if rel_err > 1e-8:
        raise ValidationError(f"normalisation quadrature did not reach 1e-8 (estimate {rel_err:.2g})")
    return RadialDensity(logp, peak + math.log(val), rel_err, closed)


@dataclass(frozen=True)
class EnergySeries:
    t: np.ndarray
    potential: np.ndarray
    kinetic: np.ndarray
    total: np.ndarray

    def as_array(self) -> np.ndarray:
        """Columns t, potential, kinetic, total (single path only)."""
        return np.column_stack([self.t, self.potential, self.kinetic, self.total])


def energy_series(traj: Trajectory, m: DampedOscillatorModel) -> EnergySeries:
    x = traj.states[:, 0]
    y = traj.states[:, 1]
    pot = np.asarray(m.potential.value(x), dtype=float)
    kin = 0.5 * np.square(y)
    return EnergySeries(traj.times, pot, kin, pot + kin)
