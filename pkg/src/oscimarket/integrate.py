"""Fixed-step integrators for SDEs and damped, noisy second-order systems.

All integrators accept a single path (state of shape ``(d,)`` with a
:class:`NoiseStream`) or an ensemble (state of shape ``(d, M)`` with a
:class:`NoiseEnsemble`).  Ensemble arithmetic is elementwise, so a path's
trajectory is bit-identical whether it is run alone or inside any ensemble.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .errors import NumericalFailure, ValidationError
from .noise import NoiseEnsemble, NoiseStream, chunk_steps
from .sds import VectorFieldSet, evaluate_field

Noise = Union[NoiseStream, NoiseEnsemble, None]


class Method(str, enum.Enum):
    EULER_MARUYAMA = "euler_maruyama"
    STRATONOVICH_HEUN = "stratonovich_heun"
    HAMILTONIAN_SPLITTING = "hamiltonian_splitting"


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    steps: int
    method: Method = Method.STRATONOVICH_HEUN
    record_every: int = 1
    t0: float = 0.0

    def __post_init__(self):
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValidationError("dt must be a positive finite number")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValidationError("steps must be a positive integer")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValidationError("record_every must be a positive integer")
        object.__setattr__(self, "method", Method(self.method))

    def recorded_steps(self) -> np.ndarray:
        idx = np.arange(0, self.steps + 1, self.record_every)
        if idx[-1] != self.steps:
            idx = np.append(idx, self.steps)
        return idx

    def times(self) -> np.ndarray:
        return self.t0 + self.recorded_steps() * self.dt


@dataclass
class Trajectory:
    """Sampled solution path(s).

    ``states`` has shape ``(T, d)`` for one path or ``(T, d, M)`` for an
    ensemble; ``energy`` optionally maps a name to a ``(T, ...)`` array.
    """

    times: np.ndarray
    states: np.ndarray
    energy: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if len(self.times) != len(self.states):
            raise ValidationError("times and states differ in length")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValidationError("trajectory times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    @property
    def is_ensemble(self) -> bool:
        return self.states.ndim == 3

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _check_noise(noise: Noise, x: np.ndarray, dim: int):
    if dim == 0:
        return
    if noise is None:
        raise ValidationError("a noise stream is required for a system with noise")
    if noise.dim != dim:
        raise ValidationError(f"noise stream has dimension {noise.dim}, system needs {dim}")
    if x.ndim == 1 and not isinstance(noise, NoiseStream):
        raise ValidationError("a single initial state needs a NoiseStream")
    if x.ndim == 2:
        if not isinstance(noise, NoiseEnsemble) or noise.n_paths != x.shape[1]:
            raise ValidationError("an ensemble of initial states needs a matching NoiseEnsemble")


def _noise_blocks(noise: Noise, dim: int, steps: int, n_paths: int, dt: float):
    """Yield ``(first_step, increments)`` blocks covering all steps."""
    if dim == 0:
        yield 0, None
        return
    size = chunk_steps(steps, dim, n_paths)
    for start in range(0, steps, size):
        yield start, noise.increments(start, min(size, steps - start), dt)


def _recorder(cfg: IntegratorConfig, x0: np.ndarray):
    rec = cfg.recorded_steps()
    out = np.empty((len(rec),) + x0.shape)
    out[0] = x0
    return rec, out


def _contract(b, dB):
    """sum_i b[:, i] dB[i]; a loop over the few noise fields beats einsum on broadcast arrays."""
    out = b[:, 0] * dB[0]
    for i in range(1, dB.shape[0]):
        out = out + b[:, i] * dB[i]
    return out


def integrate_sde(V: VectorFieldSet, x0, cfg: IntegratorConfig, noise: Noise = None) -> Trajectory:
    """Integrate ``dx = X0 dt + sum Xi o dB^i``.

    ``stratonovich_heun`` is the predictor-corrector (trapezoidal) scheme that
    converges to the Stratonovich solution; ``euler_maruyama`` converges to
    the Ito solution and is only correct for additive noise.
    """
    x = np.array(x0, dtype=float)
    if x.shape[0] != V.dimension:
        raise ValidationError(f"initial state has {x.shape[0]} coordinates, system has {V.dimension}")
    if cfg.method is Method.HAMILTONIAN_SPLITTING:
        raise ValidationError("hamiltonian_splitting applies to integrate_second_order only")
    k = V.noise_dim
    _check_noise(noise, x, k)
    n_paths = 1 if x.ndim == 1 else x.shape[1]
    rec, out = _recorder(cfg, x)
    dt = cfg.dt
    heun = cfg.method is Method.STRATONOVICH_HEUN
    r = 1
    for start, block in _noise_blocks(noise, k, cfg.steps, n_paths, dt):
        count = cfg.steps - start if block is None else len(block)
        for j in range(count):
            n = start + j
            a = V.drift_at(x)
            if k:
                dB = block[j]
                b = V.diffusion_at(x)
                stoch = _contract(b, dB)
            else:
                stoch = 0.0
            if heun:
                xp = x + a * dt + stoch
                a2 = V.drift_at(xp)
                if k:
                    stoch = 0.5 * (stoch + _contract(V.diffusion_at(xp), dB))
                x = x + 0.5 * (a + a2) * dt + stoch
            else:
                x = x + a * dt + stoch
            if not np.all(np.isfinite(x)):
                raise NumericalFailure(f"non-finite state at step {n + 1}")
            if r < len(rec) and rec[r] == n + 1:
                out[r] = x
                r += 1
    return Trajectory(cfg.t0 + rec * dt, out)


def _rate(damping, x, p):
    if callable(damping):
        return np.asarray(damping(x, p), dtype=float)
    return float(damping)


def integrate_second_order(
    force: Callable[[np.ndarray], np.ndarray],
    damping,
    noise_amplitude: float,
    x0,
    p0,
    cfg: IntegratorConfig,
    noise: Noise = None,
    *,
    position_noise: float = 0.0,
    damp_position: bool = False,
) -> Trajectory:
    """Kick-drift-kick with exact damping and additive noise.

    One step of size dt::

        p += force(x) dt/2;  x += p dt;  p += force(x) dt/2
        p *= exp(-rate dt)                 (and x too if damp_position)
        p += noise_amplitude dB_p;  x += position_noise dB_x

    ``force`` maps positions to accelerations (it must not depend on p).
    ``damping`` is a rate: a constant, or ``damping(x, p)`` returning a
    scalar or per-coordinate array, frozen over the step.  The noise stream
    dimension is n (momentum noise only) or 2n when ``position_noise`` is
    nonzero, laid out as ``[position..., momentum...]``.

    The returned states stack ``[x; p]`` along the coordinate axis.
    """
    x = np.array(x0, dtype=float)
    p = np.array(p0, dtype=float)
    if x.shape != p.shape:
        raise ValidationError("x0 and p0 must have the same shape")
    if noise_amplitude < 0 or position_noise < 0:
        raise ValidationError("noise amplitudes must be nonnegative")
    n = x.shape[0]
    n_paths = 1 if x.ndim == 1 else x.shape[1]
    k = 0
    if noise_amplitude > 0:
        k = 2 * n if position_noise > 0 else n
    elif position_noise > 0:
        k = 2 * n
    _check_noise(noise, x, k)
    dt = cfg.dt
    half = 0.5 * dt
    const_factor = None if callable(damping) else float(np.exp(-float(damping) * dt))
    rec, out = _recorder(cfg, np.concatenate([x, p]))
    r = 1
    acc = evaluate_field(force, x)
    for start, block in _noise_blocks(noise, k, cfg.steps, n_paths, dt):
        count = cfg.steps - start if block is None else len(block)
        for j in range(count):
            s = start + j
            p = p + half * acc
            x = x + dt * p
            acc = evaluate_field(force, x)
            p = p + half * acc
            if const_factor is None:
                factor = np.exp(-_rate(damping, x, p) * dt)
            else:
                factor = const_factor
            if const_factor != 1.0:
                p = p * factor
                if damp_position:
                    x = x * factor
                    acc = evaluate_field(force, x)
            if k:
                dB = block[j]
                if k == 2 * n:
                    x = x + position_noise * dB[:n]
                    p = p + noise_amplitude * dB[n:]
                    acc = evaluate_field(force, x)
                else:
                    p = p + noise_amplitude * dB
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p))):
                raise NumericalFailure(f"non-finite state at step {s + 1}")
            if r < len(rec) and rec[r] == s + 1:
                out[r, :n] = x
                out[r, n:] = p
                r += 1
    return Trajectory(cfg.t0 + rec * dt, out)
