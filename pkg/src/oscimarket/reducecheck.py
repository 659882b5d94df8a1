"""Numerical projectability test for SDS reductions.

A diffusion on M projects to a Markov process on N under Phi iff, for every
test function f on N, the generator applied to f o Phi takes the same value
at all points of each fiber Phi^{-1}(q).  The deterministic version compares
pushforwards DPhi . X0 along fibers instead.

The checker samples test functions, base points and fiber points, so a
``projectable`` verdict is evidence rather than proof; ``inconclusive``
covers variations between the two thresholds.  Submersivity of Phi (needed
for the projected process to come from an SDS) is assumed, not checked.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import FiberSamplerFailure, NumericalFailure, ValidationError
from .sds import (
    DEFAULT_SCHEME,
    FdScheme,
    VectorFieldSet,
    apply_diffusion_operator,
    compose,
    evaluate_field,
)

PASS_THRESHOLD = 1e-6
FAIL_THRESHOLD = 1e-3
FIBER_TOL = 1e-10
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class Verdict(str, enum.Enum):
    PROJECTABLE = "projectable"
    NOT_PROJECTABLE = "not_projectable"
    INCONCLUSIVE = "inconclusive"


def default_test_functions() -> list:
    """u, u^2, u^3 and sin u, each applied coordinatewise and summed."""
    return [
        lambda u: float(np.sum(u)),
        lambda u: float(np.sum(u ** 2)),
        lambda u: float(np.sum(u ** 3)),
        lambda u: float(np.sum(np.sin(u))),
    ]


@dataclass(frozen=True)
class ProjectionSetup:
    Phi: Callable[[np.ndarray], np.ndarray]
    fiber_sampler: Callable[[np.ndarray, int], np.ndarray]
    base_points: np.ndarray
    test_functions: tuple = field(default_factory=lambda: tuple(default_test_functions()))

    def __post_init__(self):
        bp = np.atleast_2d(np.asarray(self.base_points, dtype=float))
        object.__setattr__(self, "base_points", bp)
        object.__setattr__(self, "test_functions", tuple(self.test_functions))
        if not self.test_functions:
            raise ValidationError("at least one test function is required")

    def fiber(self, q, s: int) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(self.fiber_sampler(q, s), dtype=float))
        if pts.shape[0] != s:
            raise FiberSamplerFailure(f"fiber sampler returned {pts.shape[0]} points, wanted {s}")
        for p in pts:
            img = np.atleast_1d(np.asarray(self.Phi(p), dtype=float))
            if not np.all(np.isfinite(img)) or np.max(np.abs(img - q)) >= FIBER_TOL * max(1.0, np.max(np.abs(q))):
                raise FiberSamplerFailure(f"point {p.tolist()} is not on the fiber over {np.asarray(q).tolist()}")
        return pts


@dataclass(frozen=True)
class ProjectabilityReport:
    verdict: Verdict
    max_fiber_variation: float
    worst_case: Optional[tuple]
    pass_threshold: float
    fail_threshold: float
    note: str = ("sampled check: 'projectable' is evidence, not proof; "
                 "Phi is assumed to be a submersion")

    def to_dict(self) -> dict:
        wc = None
        if self.worst_case is not None:
            fi, q, p1, p2 = self.worst_case
            wc = {"test_function": fi, "base_point": list(map(float, q)),
                  "fiber_points": [list(map(float, p1)), list(map(float, p2))]}
        return {
            "verdict": self.verdict.value,
            "max_fiber_variation": self.max_fiber_variation,
            "worst_case": wc,
            "pass_threshold": self.pass_threshold,
            "fail_threshold": self.fail_threshold,
            "note": self.note,
        }


def _verdict(variation, pass_threshold, fail_threshold):
    if variation < pass_threshold:
        return Verdict.PROJECTABLE
    if variation > fail_threshold:
        return Verdict.NOT_PROJECTABLE
    return Verdict.INCONCLUSIVE


def _check_thresholds(s, pass_threshold, fail_threshold):
    if s < 2:
        raise ValidationError("need at least 2 fiber samples")
    if not pass_threshold < fail_threshold:
        raise ValidationError("pass_threshold must be below fail_threshold")


def _scan(values_on_fiber, setup, s, n_funcs):
    worst, where = -1.0, None
    for qi, q in enumerate(setup.base_points):
        pts = setup.fiber(q, s)
        for fi in range(n_funcs):
            vals = values_on_fiber(fi, pts)  # (s, m)
            if not np.all(np.isfinite(vals)):
                raise NumericalFailure("non-finite value on fiber")
            spread = vals.max(axis=0) - vals.min(axis=0)
            var = float(np.max(spread / (1.0 + np.max(np.abs(vals), axis=0))))
            if var > worst:
                j = int(np.argmax(spread))
                worst = var
                where = (fi, q.copy(), pts[int(np.argmax(vals[:, j]))].copy(), pts[int(np.argmin(vals[:, j]))].copy())
    return worst, where


def check_projectable_sds(
    V: VectorFieldSet,
    setup: ProjectionSetup,
    fiber_samples: int = 8,
    pass_threshold: float = PASS_THRESHOLD,
    fail_threshold: float = FAIL_THRESHOLD,
    scheme: FdScheme = DEFAULT_SCHEME,
) -> ProjectabilityReport:
    _check_thresholds(fiber_samples, pass_threshold, fail_threshold)
    pulled = [compose(f, setup.Phi) for f in setup.test_functions]

    def values(fi, pts):
        return np.array([[apply_diffusion_operator(V, pulled[fi], p, scheme)] for p in pts])

    var, where = _scan(values, setup, fiber_samples, len(pulled))
    return ProjectabilityReport(_verdict(var, pass_threshold, fail_threshold), var, where,
                                pass_threshold, fail_threshold)


def pushforward(Phi, X0, p, h: float = 1e-4) -> np.ndarray:
    """DPhi(p) . X0(p) by a central difference along X0(p)."""
    p = np.asarray(p, dtype=float)
    v = evaluate_field(X0, p)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return np.zeros_like(np.atleast_1d(np.asarray(Phi(p), dtype=float)))
    u = v / norm
    hi = np.atleast_1d(np.asarray(Phi(p + h * u), dtype=float))
    lo = np.atleast_1d(np.asarray(Phi(p - h * u), dtype=float))
    return norm * (hi - lo) / (2 * h)


def check_projectable_deterministic(
    X0: Callable,
    setup: ProjectionSetup,
    fiber_samples: int = 8,
    pass_threshold: float = PASS_THRESHOLD,
    fail_threshold: float = FAIL_THRESHOLD,
    scheme: FdScheme = DEFAULT_SCHEME,
) -> ProjectabilityReport:
    """Compare pushforwards of the drift at points of each fiber.

    ``setup.test_functions`` is not used.
    """
    _check_thresholds(fiber_samples, pass_threshold, fail_threshold)

    def values(_, pts):
        return np.array([pushforward(setup.Phi, X0, p, scheme.h) for p in pts])

    var, where = _scan(values, setup, fiber_samples, 1)
    return ProjectabilityReport(_verdict(var, pass_threshold, fail_threshold), var, where,
                                pass_threshold, fail_threshold)


# built-in projections

def coordinate_projection(d: int, keep: Sequence[int], *, n_base: int = 16, span: float = 2.0,
                          seed: int = 0) -> ProjectionSetup:
    """Phi(p) = p[keep]; fibers filled with seeded uniform values on [-span, span]."""
    keep = [int(i) for i in keep]
    drop = [i for i in range(d) if i not in keep]
    if not keep or not drop:
        raise ValidationError("a coordinate projection must keep some and drop some coordinates")
    rng = np.random.default_rng(seed)
    base = rng.uniform(-span, span, (n_base, len(keep)))

    def Phi(p):
        return np.asarray(p, dtype=float)[keep]

    def sampler(q, s):
        key = np.random.SeedSequence([seed, 1, *np.frombuffer(np.asarray(q, dtype=float).tobytes(), dtype=np.uint32)])
        fill = np.random.default_rng(key).uniform(-span, span, (s, len(drop)))
        pts = np.empty((s, d))
        pts[:, keep] = q
        pts[:, drop] = fill
        return pts

    return ProjectionSetup(Phi, sampler, base)


def radius_projection(d: int = 2, *, n_base: int = 16, r_min: float = 0.5, r_max: float = 2.0,
                      seed: int = 0) -> ProjectionSetup:
    """Phi(p) = |p|; base radii kept away from the singular origin."""
    if d < 2:
        raise ValidationError("radius projection needs d >= 2")
    base = np.linspace(r_min, r_max, n_base)[:, None]

    def Phi(p):
        return np.array([np.linalg.norm(p)])

    def sampler(q, s):
        r = float(np.asarray(q).ravel()[0])
        # golden-angle and seeded sequences: a larger s extends a smaller one
        if d == 2:
            ang = 2 * np.pi * np.mod((np.arange(s) + 0.5) * GOLDEN, 1.0)
            dirs = np.column_stack([np.cos(ang), np.sin(ang)])
        else:
            dirs = np.random.default_rng(seed).standard_normal((s, d))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        return r * dirs

    return ProjectionSetup(Phi, sampler, base)


# analytic catalogue used by the acceptance suite and the CLI

def brownian_2d(sigma: float = 1.0) -> VectorFieldSet:
    return VectorFieldSet(2, lambda x: np.zeros(2),
                          (lambda x: np.array([sigma, 0.0]), lambda x: np.array([0.0, sigma])))


def rotation_field(x):
    x = np.asarray(x, dtype=float)
    return np.stack([x[1], -x[0]])


def translation_field(x):
    return np.array([1.0, 0.0])
