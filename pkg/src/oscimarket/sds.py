"""Stochastic dynamical systems on R^d and their diffusion operator.

A system is a drift field plus k diffusion fields, read in Stratonovich
form::

    dx = X0(x) dt + sum_i Xi(x) o dB^i

Its generator acts on a scalar function f as

    (A f)(p) = (X0 . grad f)(p) + 1/2 sum_i (Xi . grad (Xi . grad f))(p)

Fields receive the state with the coordinate axis first, so a field written
as ``lambda x: np.array([x[1], -x[0]])`` works for a single point of shape
``(d,)`` and for an ensemble of shape ``(d, M)`` alike.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NumericalFailure, ValidationError

Field = Callable[[np.ndarray], np.ndarray]


def evaluate_field(X: Field, x: np.ndarray) -> np.ndarray:
    """Evaluate a vector field, broadcasting constant outputs to ``x``'s shape."""
    out = np.asarray(X(x), dtype=float)
    if out.shape != x.shape:
        out = out.reshape(out.shape + (1,) * (x.ndim - out.ndim))
        out = np.broadcast_to(out, x.shape)
    return out


@dataclass(frozen=True)
class VectorFieldSet:
    dimension: int
    drift: Field
    diffusion_fields: tuple = ()

    def __post_init__(self):
        if int(self.dimension) < 1:
            raise ValidationError("dimension must be >= 1")
        object.__setattr__(self, "diffusion_fields", tuple(self.diffusion_fields))

    @property
    def noise_dim(self) -> int:
        return len(self.diffusion_fields)

    def drift_at(self, x):
        return evaluate_field(self.drift, np.asarray(x, dtype=float))

    def diffusion_at(self, x):
        """Diffusion fields stacked along a new axis 1: shape ``(d, k, ...)``."""
        x = np.asarray(x, dtype=float)
        if not self.diffusion_fields:
            return np.zeros((x.shape[0], 0) + x.shape[1:])
        return np.stack([evaluate_field(X, x) for X in self.diffusion_fields], axis=1)


@dataclass(frozen=True)
class ScalarField:
    evaluate: Callable[[np.ndarray], float]
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, p):
        return self.evaluate(np.asarray(p, dtype=float))

    def check_gradient(self, points, h: float = 1e-4, tol: float = 1e-5) -> float:
        """Max deviation of the analytic gradient from central differences.

        Raises ValidationError above ``tol``.
        """
        if self.gradient is None:
            return 0.0
        worst = 0.0
        for p in np.atleast_2d(np.asarray(points, dtype=float)):
            g = np.asarray(self.gradient(p), dtype=float)
            fd = np.empty_like(p)
            for j in range(p.size):
                e = np.zeros_like(p)
                e[j] = h
                fd[j] = (self.evaluate(p + e) - self.evaluate(p - e)) / (2 * h)
            worst = max(worst, float(np.max(np.abs(g - fd))))
        if worst > tol:
            raise ValidationError(f"analytic gradient off by {worst:.3g} from finite differences")
        return worst


@dataclass(frozen=True)
class FdScheme:
    h: float = 1e-4
    order: str = "central2"

    def __post_init__(self):
        if not self.h > 0:
            raise ValidationError("finite-difference step must be positive")
        if self.order != "central2":
            raise ValidationError(f"unsupported finite-difference order {self.order!r}")


DEFAULT_SCHEME = FdScheme()


def _finite(value, what):
    v = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(v)):
        raise NumericalFailure(f"non-finite {what}")
    return v


def directional_derivative(X: Field, f, p, scheme: FdScheme = DEFAULT_SCHEME) -> float:
    """(X . grad f)(p).

    Uses ``f.gradient`` when ``f`` is a ScalarField carrying one; otherwise a
    central difference along the unit direction of X(p), scaled back by |X(p)|.
    """
    p = _finite(p, "probe point")
    v = _finite(evaluate_field(X, p), "vector field value")
    grad = getattr(f, "gradient", None)
    if grad is not None:
        return float(_finite(np.dot(v, np.asarray(grad(p), dtype=float)), "gradient"))
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return 0.0
    u = v / norm
    h = scheme.h
    fp = _finite(f(p + h * u), "function value")
    fm = _finite(f(p - h * u), "function value")
    return float(norm * (fp - fm) / (2 * h))


def apply_diffusion_operator(V: VectorFieldSet, f, p, scheme: FdScheme = DEFAULT_SCHEME) -> float:
    p = np.asarray(p, dtype=float)
    if p.shape != (V.dimension,):
        raise ValidationError(f"point has shape {p.shape}, expected ({V.dimension},)")
    total = directional_derivative(V.drift, f, p, scheme)
    for X in V.diffusion_fields:
        inner = lambda q, X=X: directional_derivative(X, f, q, scheme)
        total += 0.5 * directional_derivative(X, inner, p, scheme)
    return float(_finite(total, "generator value"))


def compose(f: Callable, Phi: Callable) -> Callable:
    """Pull back ``f`` along ``Phi``: the function p -> f(Phi(p))."""
    return lambda p: f(np.atleast_1d(np.asarray(Phi(p), dtype=float)))
