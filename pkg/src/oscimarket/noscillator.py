"""Constrained n-oscillator market model.

n asset classes with mispricings x_i = R_i - v_i, energy

    E = 1/2 sum a_i x_i^2 + 1/2 sum b_i xdot_i^2

and the holonomic constraint sum x_i = 0.  The constrained motion is

    a_i x_i + b_i xddot_i = lam,   lam = (sum a_i x_i / b_i) / (sum 1 / b_i)

which decouples into n-1 harmonic normal modes whose frequencies interlace
the proper frequencies gamma_i = sqrt(a_i / b_i).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    ConstraintViolation,
    FrequencyMismatch,
    InterlacingViolation,
    LengthMismatch,
    NonReproducible,
    NumericalFailure,
    ValidationError,
)
from .linalg import householder_to_last, jacobi_eigh

CONSTRAINT_TOL = 1e-6
DEGENERATE_RTOL = 1e-9


@dataclass(frozen=True)
class MarketSpec:
    a: np.ndarray
    b: np.ndarray
    v: Optional[np.ndarray] = None
    labels: Optional[tuple] = None

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.ndim != 1 or a.shape != b.shape:
            raise LengthMismatch("a and b must be sequences of equal length")
        if a.size < 2:
            raise ValidationError("a market needs n >= 2 components")
        if not (np.all(a > 0) and np.all(b > 0) and np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValidationError("all a_i and b_i must be positive and finite")
        n = a.size
        v = np.full(n, 1.0 / n) if self.v is None else np.asarray(self.v, dtype=float)
        if v.shape != a.shape:
            raise LengthMismatch("v must have one entry per component")
        if abs(v.sum() - 1.0) > 1e-12:
            raise ValidationError(f"fair values must sum to 1, got {v.sum()!r}")
        labels = tuple(f"A{i + 1}" for i in range(n)) if self.labels is None else tuple(self.labels)
        if len(labels) != n:
            raise LengthMismatch("labels must have one entry per component")
        for name, arr in (("a", a), ("b", b), ("v", v)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.a.size

    @property
    def gammas(self) -> np.ndarray:
        """Proper frequencies sqrt(a_i / b_i), in component order."""
        return np.sqrt(self.a / self.b)


@dataclass(frozen=True)
class ConstrainedState:
    x: np.ndarray
    xdot: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        xdot = np.asarray(self.xdot, dtype=float)
        if x.shape != xdot.shape or x.ndim != 1:
            raise LengthMismatch("x and xdot must be 1-d and of equal length")
        if abs(x.sum()) > 1e-9 or abs(xdot.sum()) > 1e-9:
            raise ConstraintViolation("state must satisfy sum x = 0 and sum xdot = 0")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "xdot", xdot)


def project_to_constraint(x) -> np.ndarray:
    """Remove the mean so that sum x = 0."""
    x = np.asarray(x, dtype=float)
    return x - x.mean(axis=-1, keepdims=True)


def relative_prices(spec: MarketSpec, x) -> np.ndarray:
    """R_i = x_i + v_i.  Negative values are allowed but warned about."""
    R = np.asarray(x, dtype=float) + spec.v
    if np.any(R < 0):
        warnings.warn("relative price went negative; the linear model has no positivity mechanism",
                      RuntimeWarning, stacklevel=2)
    return R


def lagrange_multiplier(spec: MarketSpec, x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sum(spec.a * x / spec.b) / np.sum(1.0 / spec.b))


def equation_rhs(spec: MarketSpec, x) -> np.ndarray:
    """Accelerations of the constrained system.

    ``x`` may carry extra trailing axes (e.g. an ensemble of shape (n, M)).
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] != spec.n:
        raise LengthMismatch(f"state has {x.shape[0]} components, market has {spec.n}")
    if np.any(np.abs(x.sum(axis=0)) > CONSTRAINT_TOL):
        raise ConstraintViolation(f"sum of mispricings is {x.sum(axis=0)!r}, must be 0")
    shape = (-1,) + (1,) * (x.ndim - 1)
    a, b = spec.a.reshape(shape), spec.b.reshape(shape)
    lam = np.sum(a * x / b, axis=0) / np.sum(1.0 / spec.b)
    return lam / b - a * x / b


def force_field(spec: MarketSpec):
    """``equation_rhs`` without the constraint check, for integrators."""
    inv_b = 1.0 / spec.b
    k = spec.a * inv_b

    def acc(x):
        shape = (-1,) + (1,) * (x.ndim - 1)
        kx = k.reshape(shape) * x
        return inv_b.reshape(shape) * np.sum(kx, axis=0) / np.sum(inv_b) - kx

    return acc


@dataclass(frozen=True)
class NormalModeDecomposition:
    """x = C z with z_j'' = -lambda_j^2 z_j; ``pseudo_inverse`` maps x to z."""

    C: np.ndarray
    lambdas: np.ndarray
    pseudo_inverse: np.ndarray
    spec: Optional[MarketSpec] = field(default=None, compare=False)

    @property
    def n(self) -> int:
        return self.C.shape[0]


def _deterministic_basis(Q: np.ndarray, mu: np.ndarray) -> np.ndarray:
    # repeated eigenvalues: rebuild each eigenspace from coordinate vectors
    order = np.argsort(-mu, kind="stable")
    Q, mu = Q[:, order], mu[order]
    out = Q.copy()
    i = 0
    m = len(mu)
    while i < m:
        j = i + 1
        while j < m and abs(mu[j] - mu[i]) <= DEGENERATE_RTOL * max(abs(mu[i]), abs(mu[j])):
            j += 1
        if j - i > 1:
            B = Q[:, i:j]
            P = B @ B.T
            chosen = []
            for e in np.eye(m):
                v = P @ e
                for u in chosen:
                    v = v - np.dot(u, v) * u
                nv = np.linalg.norm(v)
                if nv > 1e-8:
                    chosen.append(v / nv)
                if len(chosen) == j - i:
                    break
            out[:, i:j] = np.column_stack(chosen)
        i = j
    return out, mu


def normal_modes(spec: MarketSpec) -> NormalModeDecomposition:
    """Normal modes through the reflected, rescaled coordinates.

    y = sqrt(a) x turns the constraint into <alpha, y> = 0 with
    alpha = 1/sqrt(a); a Householder reflection H sends alpha to the last
    axis; the leading (n-1) block of H diag(1/gamma^2) H has eigenvalues
    1/lambda_j^2.
    """
    n = spec.n
    sqrt_a = np.sqrt(spec.a)
    H = householder_to_last(1.0 / sqrt_a)
    M = H @ np.diag(1.0 / spec.gammas ** 2) @ H
    A = 0.5 * (M[: n - 1, : n - 1] + M[: n - 1, : n - 1].T)
    mu, Q = jacobi_eigh(A)
    Q, mu = _deterministic_basis(Q, mu)  # mu descending -> lambda ascending
    lambdas = 1.0 / np.sqrt(mu)
    C = (H[:, : n - 1] @ Q) / sqrt_a[:, None]
    P = Q.T @ (H[: n - 1, :] * sqrt_a[None, :])
    # largest entry of each column positive; near-ties go to the first index
    mag = np.abs(C)
    lead = np.argmax(mag >= mag.max(axis=0) * (1.0 - 1e-9), axis=0)
    signs = np.sign(C[lead, np.arange(n - 1)])
    signs[signs == 0] = 1.0
    C = C * signs
    P = P * signs[:, None]
    return NormalModeDecomposition(C, lambdas, P, spec)


@dataclass(frozen=True)
class InterlacingReport:
    ok: bool
    max_violation: float

    def __bool__(self):
        return self.ok


def verify_interlacing(gammas, lambdas) -> InterlacingReport:
    """Check gamma_1 <= lambda_1 <= gamma_2 <= ... <= lambda_{n-1} <= gamma_n."""
    g = np.sort(np.asarray(gammas, dtype=float))
    lam = np.sort(np.asarray(lambdas, dtype=float))
    if g.ndim != 1 or lam.ndim != 1 or lam.size != g.size - 1:
        raise LengthMismatch(f"need n proper and n-1 normal frequencies, got {g.size} and {lam.size}")
    below = g[:-1] - lam
    above = lam - g[1:]
    worst = float(max(0.0, below.max(initial=0.0), above.max(initial=0.0)))
    tol = 1e-9 * max(float(g[-1]), 1.0)
    return InterlacingReport(worst <= tol, worst)


@dataclass(frozen=True)
class InverseResult:
    spec: MarketSpec
    round_trip_error: float


def inverse_from_frequencies(gammas, lambdas) -> InverseResult:
    """Coefficients (a, b) realising given proper and normal frequencies.

    The weights w_i are the squared components of the unit constraint
    direction in y-coordinates; they come from the secular equation of the
    bordered diagonal matrix diag(1/gamma^2).  Scale is fixed by |w| = 1.
    """
    g = np.asarray(gammas, dtype=float)
    lam = np.asarray(lambdas, dtype=float)
    if g.ndim != 1 or lam.ndim != 1 or lam.size != g.size - 1:
        raise LengthMismatch(f"need n proper and n-1 normal frequencies, got {g.size} and {lam.size}")
    if np.any(~(g > 0)) or np.any(~(lam > 0)):
        raise ValidationError("frequencies must be positive")
    merged = np.empty(g.size + lam.size)
    merged[0::2] = g
    merged[1::2] = lam
    if not np.all(np.diff(merged) > 0):
        raise InterlacingViolation("inverse problem needs strictly interlacing frequencies")
    mu = 1.0 / g ** 2
    nu = 1.0 / lam ** 2
    w2 = np.empty(g.size)
    for i in range(g.size):
        num = np.prod(mu[i] - nu)
        den = np.prod(np.delete(mu[i] - mu, i))
        w2[i] = num / den
    if np.any(~(w2 > 0)):
        raise NumericalFailure("weights lost positivity; frequencies too close to resolve")
    w2 = w2 / w2.sum()
    a = 1.0 / w2
    b = a / g ** 2
    spec = MarketSpec(a, b)
    back = normal_modes(spec).lambdas
    err = float(np.max(np.abs(back - lam) / lam))
    if err > 1e-6:
        raise NonReproducible(f"forward solve reproduces the frequencies only to {err:.3g}")
    return InverseResult(spec, err)


@dataclass(frozen=True)
class ClosedFormSolution:
    """x(t) = sum_j C[:, j] r_j sin(lambda_j t + theta_j)."""

    decomp: NormalModeDecomposition
    amplitudes: np.ndarray
    phases: np.ndarray

    def modal(self, t):
        t = np.asarray(t, dtype=float)
        arg = np.multiply.outer(t, self.decomp.lambdas) + self.phases
        return self.amplitudes * np.sin(arg), self.amplitudes * self.decomp.lambdas * np.cos(arg)

    def __call__(self, t):
        """Return ``(x, xdot)``; arrays of shape (n,) or (len(t), n)."""
        z, zdot = self.modal(t)
        return z @ self.decomp.C.T, zdot @ self.decomp.C.T

    def acceleration(self, t):
        z, _ = self.modal(t)
        return -(z * self.decomp.lambdas ** 2) @ self.decomp.C.T


def closed_form_solution(decomp: NormalModeDecomposition, state) -> ClosedFormSolution:
    x0 = np.asarray(state.x if hasattr(state, "x") else state[0], dtype=float)
    v0 = np.asarray(state.xdot if hasattr(state, "xdot") else state[1], dtype=float)
    if x0.shape != (decomp.n,) or v0.shape != (decomp.n,):
        raise LengthMismatch(f"state must have {decomp.n} components")
    z0 = decomp.pseudo_inverse @ x0
    zd0 = decomp.pseudo_inverse @ v0
    lam = decomp.lambdas
    amp = np.hypot(z0, zd0 / lam)
    phase = np.arctan2(z0, zd0 / lam)
    return ClosedFormSolution(decomp, amp, phase)


def component_energies(spec: MarketSpec, x, xdot):
    """Per-component energies 1/2 a_i x_i^2 + 1/2 b_i xdot_i^2 and their sum.

    Leading axis of x may be time: shapes (n,) or (T, n).
    """
    x = np.asarray(x, dtype=float)
    xdot = np.asarray(xdot, dtype=float)
    E = 0.5 * spec.a * x * x + 0.5 * spec.b * xdot * xdot
    return E, E.sum(axis=-1)


@dataclass(frozen=True)
class SectorGrouping:
    groups: tuple
    gammas: np.ndarray
    a_hat: np.ndarray
    b_hat: np.ndarray


def detect_sectors(spec: MarketSpec, gamma_tolerance: float = DEGENERATE_RTOL) -> SectorGrouping:
    """Group components whose proper frequencies agree within a relative tolerance.

    Groups are chained in sorted-gamma order and listed by their smallest
    member index.
    """
    g = spec.gammas
    order = np.argsort(g, kind="stable")
    groups = [[order[0]]]
    for i in order[1:]:
        ref = g[groups[-1][0]]
        if abs(g[i] - ref) <= gamma_tolerance * max(g[i], ref):
            groups[-1].append(i)
        else:
            groups.append([i])
    groups = sorted((tuple(sorted(int(i) for i in grp)) for grp in groups), key=lambda grp: grp[0])
    gam = np.array([g[list(grp)].mean() for grp in groups])
    a_hat = np.array([1.0 / np.sum(1.0 / spec.a[list(grp)]) for grp in groups])
    return SectorGrouping(tuple(groups), gam, a_hat, a_hat / gam ** 2)


def _check_group(spec: MarketSpec, group, tolerance):
    idx = sorted(int(i) for i in group)
    if not idx or len(set(idx)) != len(idx) or idx[0] < 0 or idx[-1] >= spec.n:
        raise ValidationError(f"invalid sector {group!r} for a market of {spec.n} components")
    g = spec.gammas[idx]
    if g.max() - g.min() > tolerance * g.max():
        raise FrequencyMismatch(f"sector {tuple(idx)} mixes proper frequencies {g.tolist()}")
    if len(idx) == 1:
        return idx, float(spec.a[idx[0]]), float(spec.b[idx[0]])
    a_hat = 1.0 / np.sum(1.0 / spec.a[idx])
    return idx, a_hat, a_hat / g.mean() ** 2


@dataclass(frozen=True)
class ReducedMarket:
    spec: MarketSpec
    mapping: tuple  # reduced index -> tuple of original indices


def reduce_sector(spec: MarketSpec, group, tolerance: float = DEGENERATE_RTOL) -> ReducedMarket:
    """Merge a sector into one component with a = 1/sum(1/a_i), b = a/gamma^2."""
    idx, a_hat, b_hat = _check_group(spec, group, tolerance)
    members = set(idx)
    a, b, v, labels, mapping = [], [], [], [], []
    for i in range(spec.n):
        if i in members:
            if i != idx[0]:
                continue
            a.append(a_hat)
            b.append(b_hat)
            v.append(float(np.sum(spec.v[idx])))
            labels.append("+".join(str(spec.labels[j]) for j in idx))
            mapping.append(tuple(idx))
        else:
            a.append(spec.a[i])
            b.append(spec.b[i])
            v.append(spec.v[i])
            labels.append(spec.labels[i])
            mapping.append((i,))
    v = np.array(v)
    v[-1] = 1.0 - v[:-1].sum()
    return ReducedMarket(MarketSpec(a, b, v, labels), tuple(mapping))


def reduce_state(reduced: ReducedMarket, x) -> np.ndarray:
    """Aggregate full-market coordinates (leading axis last) onto the reduced market."""
    x = np.asarray(x, dtype=float)
    return np.stack([x[..., list(m)].sum(axis=-1) for m in reduced.mapping], axis=-1)


def sector_energy_split(spec: MarketSpec, group, x, xdot, tolerance: float = DEGENERATE_RTOL):
    """(E_external, E_internal) of a sector.

    E_internal is the energy of the motion relative to the synchronous one,
    sum a_i (x_i - w_i x_s)^2 / 2 + sum b_i (v_i - u_i v_s)^2 / 2 with
    w_i = a_hat / a_i and u_i = b_hat / b_i, so it is nonnegative by
    construction; the two add up to the sector energy.
    """
    idx, a_hat, b_hat = _check_group(spec, group, tolerance)
    x = np.asarray(x, dtype=float)
    xdot = np.asarray(xdot, dtype=float)
    a, b = spec.a[idx], spec.b[idx]
    xi, vi = x[..., idx], xdot[..., idx]
    xs = xi.sum(axis=-1)
    vs = vi.sum(axis=-1)
    external = 0.5 * a_hat * xs * xs + 0.5 * b_hat * vs * vs
    # Cauchy-Schwarz weights; u_i equals w_i when the gammas coincide exactly
    w = (1.0 / a) / np.sum(1.0 / a)
    u = (1.0 / b) / np.sum(1.0 / b)
    dx = xi - w * xs[..., None]
    dv = vi - u * vs[..., None]
    internal = 0.5 * np.sum(a * dx * dx, axis=-1) + 0.5 * np.sum(b * dv * dv, axis=-1)
    return external, internal
