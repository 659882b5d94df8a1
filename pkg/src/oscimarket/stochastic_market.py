"""Stochastic constrained n-oscillator.

Each normal mode j keeps its frequency lambda_j but gets a randomly
evolving amplitude and phase:

    x_i(t) = sum_j C_ij r_j(t) sin(lambda_j t + theta_j + S_j(t))

with r_j a positive radial diffusion and dS_j = (phase_sigma_j / r_j) dW_j.
Modes are driven by independent noise components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import StepRejectionExhausted, ValidationError
from .integrate import IntegratorConfig
from .noise import NoiseStream, chunk_steps
from .noscillator import ClosedFormSolution, NormalModeDecomposition
from .radial import Convention, RadialParams, stack_params, step_phase, step_radial


@dataclass(frozen=True)
class StochasticMarketModel:
    decomp: NormalModeDecomposition
    theta: np.ndarray
    radial: tuple
    phase_sigma: np.ndarray

    def __post_init__(self):
        k = self.decomp.lambdas.size
        theta = np.asarray(self.theta, dtype=float)
        if theta.shape != (k,):
            raise ValidationError(f"theta needs {k} entries, one per mode")
        radial = tuple(self.radial)
        if len(radial) != k or not all(isinstance(p, RadialParams) for p in radial):
            raise ValidationError(f"radial needs {k} RadialParams, one per mode")
        ps = np.broadcast_to(np.asarray(self.phase_sigma, dtype=float), (k,)).copy()
        if np.any(ps < 0):
            raise ValidationError("phase_sigma must be >= 0")
        if np.any(np.abs(self.decomp.C.sum(axis=0)) > 1e-10 * max(1.0, np.abs(self.decomp.C).max())):
            raise ValidationError("columns of C must sum to zero")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "radial", radial)
        object.__setattr__(self, "phase_sigma", ps)

    @property
    def n_modes(self) -> int:
        return self.decomp.lambdas.size

    @classmethod
    def build(
        cls,
        decomp: NormalModeDecomposition,
        *,
        c=1.0,
        sigma=1.0,
        r0=1.0,
        phase_sigma=1.0,
        theta=None,
        convention=Convention.CARTESIAN_CONSISTENT,
        seed: int = 0,
    ) -> "StochasticMarketModel":
        """Per-mode parameters from scalars or sequences.

        Missing initial phases are drawn uniformly on [0, 2 pi) from ``seed``.
        """
        k = decomp.lambdas.size
        c, sigma, r0 = (np.broadcast_to(np.asarray(v, dtype=float), (k,)) for v in (c, sigma, r0))
        if theta is None:
            rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x7E7A]))
            theta = rng.uniform(0.0, 2.0 * np.pi, k)
        radial = tuple(RadialParams(float(c[j]), float(sigma[j]), float(r0[j]), convention) for j in range(k))
        return cls(decomp, theta, radial, phase_sigma)

    @classmethod
    def from_closed_form(cls, sol: ClosedFormSolution, **kwargs) -> "StochasticMarketModel":
        """Start from the amplitudes and phases of a deterministic solution."""
        return cls.build(sol.decomp, r0=sol.amplitudes, theta=sol.phases, **kwargs)


@dataclass
class MarketPath:
    times: np.ndarray
    x: np.ndarray   # (T, n)
    r: np.ndarray   # (T, n-1)
    S: np.ndarray   # (T, n-1)


def simulate_market(model: StochasticMarketModel, cfg: IntegratorConfig, noise: Optional[NoiseStream] = None) -> MarketPath:
    """Simulate one market path.

    The noise stream has dimension 2(n-1): radial increments for each mode
    followed by phase increments for each mode.
    """
    k = model.n_modes
    if noise is not None and (not isinstance(noise, NoiseStream) or noise.dim != 2 * k):
        raise ValidationError(f"simulate_market needs a NoiseStream of dimension {2 * k}")
    needs_noise = any(np.any(p.noise_scale > 0) for p in model.radial) or np.any(model.phase_sigma > 0)
    stacked = stack_params(model.radial)
    if needs_noise and noise is None:
        raise ValidationError("a noise stream is required when sigma or phase_sigma is nonzero")
    dt = cfg.dt
    rec = cfg.recorded_steps()
    R = np.empty((len(rec), k))
    S = np.empty((len(rec), k))
    r = np.array([p.r0 for p in model.radial])
    s = np.zeros(k)
    R[0], S[0] = r, s
    size = chunk_steps(cfg.steps, 2 * k, 1)
    for start in range(0, cfg.steps, size):
        count = min(size, cfg.steps - start)
        block = noise.increments(start, count, dt) if needs_noise else np.zeros((count, 2 * k))
        radii = _radial_block(model.radial, stacked, r, dt, block[:, :k])
        # phase increment uses the radius at the start of the step
        before = np.vstack([r, radii[:-1]])
        inc = step_phase(model.phase_sigma, before, dt, block[:, k:])
        phases = np.cumsum(np.vstack([s, inc]), axis=0)[1:]
        steps = np.arange(start + 1, start + count + 1)
        keep = np.isin(rec, steps)
        R[keep] = radii[rec[keep] - start - 1]
        S[keep] = phases[rec[keep] - start - 1]
        r, s = radii[-1], phases[-1]
    t = cfg.t0 + rec * dt
    z = R * np.sin(np.outer(t, model.decomp.lambdas) + model.theta + S)
    x = z @ model.decomp.C.T
    return MarketPath(t, x, R, S)


def _radial_block(params, stacked, r, dt, dB):
    """Radii after each of the steps driven by the rows of dB."""
    out = np.empty_like(dB)
    if stacked is not None:
        # implicit scheme with linear damping: plain float recursion per mode
        for m, p in enumerate(params):
            c, ns, a4 = p.c, p.noise_scale, 4.0 * p.repulsion * dt
            x = float(r[m])
            col = out[:, m]
            for j, db in enumerate(dB[:, m].tolist()):
                b = x - c * x * dt + ns * db
                x = 0.5 * (b + math.sqrt(b * b + a4))
                if not x > 0:
                    raise StepRejectionExhausted(f"implicit radial step reached r <= 0 (dt={dt} too large for the damping)")
                col[j] = x
        return out
    for j in range(dB.shape[0]):
        r = np.array([step_radial(p, r[m], dt, dB[j, m]) for m, p in enumerate(params)])
        out[j] = r
    return out


def market_velocity(model: StochasticMarketModel, path: MarketPath) -> np.ndarray:
    """d/dt of x with r_j and S_j frozen at their current values.

    The stochastic path itself is not differentiable; this is the velocity of
    the oscillation carried by each mode, which is what the per-component
    energies of a frame are built from.
    """
    lam = model.decomp.lambdas
    zdot = path.r * lam * np.cos(np.outer(path.times, lam) + model.theta + path.S)
    return zdot @ model.decomp.C.T
