"""Empirical distributions, KS distance, periodograms and batch means."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InsufficientPeaks, ValidationError

POWER_FLOOR = 1e-20


@dataclass(frozen=True)
class EmpiricalDistribution:
    samples: np.ndarray

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=float).ravel())
        if s.size < 1:
            raise ValidationError("an empirical distribution needs at least one sample")
        if not np.all(np.isfinite(s)):
            raise ValidationError("samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def n(self) -> int:
        return self.samples.size

    def cdf(self, x):
        return np.searchsorted(self.samples, x, side="right") / self.n


def ks_statistic(emp, cdf: Callable) -> float:
    """sup |F_n - F| evaluated on both sides of each jump."""
    if not isinstance(emp, EmpiricalDistribution):
        emp = EmpiricalDistribution(emp)
    s = emp.samples
    n = s.size
    F = np.clip(np.asarray(cdf(s), dtype=float), 0.0, 1.0)
    upper = np.arange(1, n + 1) / n - F
    lower = F - np.arange(n) / n
    return float(max(upper.max(), lower.max()))


def ks_two_sample(a, b) -> float:
    a = a if isinstance(a, EmpiricalDistribution) else EmpiricalDistribution(a)
    b = b if isinstance(b, EmpiricalDistribution) else EmpiricalDistribution(b)
    grid = np.concatenate([a.samples, b.samples])
    return float(np.max(np.abs(a.cdf(grid) - b.cdf(grid))))


@dataclass(frozen=True)
class Periodogram:
    """One-sided power against angular frequency (rad per time unit).

    Bin spacing is 2 pi / (N dt).  ``input_scale`` is the mean square of the
    raw input and sets the floor below which power counts as zero.
    """

    frequencies: np.ndarray
    power: np.ndarray
    input_scale: float = 1.0

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        p = np.asarray(self.power, dtype=float)
        if f.shape != p.shape or f.ndim != 1:
            raise ValidationError("frequencies and power must be 1-d and of equal length")
        if np.any(p < 0):
            raise ValidationError("power must be nonnegative")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "power", p)

    @property
    def resolution(self) -> float:
        return float(self.frequencies[1] - self.frequencies[0])


def periodogram(series, dt: float, window: str = "hann") -> Periodogram:
    """Hann-windowed periodogram after mean removal.

    Normalised so that sum(power) equals the variance of the windowed series,
    sum((w (x - mean))^2) / sum(w^2).
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size < 16:
        raise ValidationError("periodogram needs a 1-d series of length >= 16")
    if not dt > 0:
        raise ValidationError("dt must be positive")
    n = x.size
    if window == "hann":
        w = np.hanning(n)
    elif window == "boxcar":
        w = np.ones(n)
    else:
        raise ValidationError(f"unknown window {window!r}")
    centred = x - x.mean()
    spec = np.fft.rfft(w * centred)
    power = np.abs(spec) ** 2 / (n * np.sum(w * w))
    power[1:] *= 2.0
    if n % 2 == 0:
        power[-1] /= 2.0
    freqs = 2.0 * np.pi * np.fft.rfftfreq(n, dt)
    scale = float(np.mean(x * x))
    return Periodogram(freqs, power, scale if scale > 0 else 1.0)


def find_peaks(p: Periodogram, count: int, min_separation: float = 0.0) -> np.ndarray:
    """The ``count`` largest local maxima at least ``min_separation`` apart, ascending.

    Maxima whose power is below 1e-20 of the input scale are ignored.
    """
    if count < 1:
        raise ValidationError("count must be >= 1")
    pw, f = p.power, p.frequencies
    inner = np.arange(1, pw.size - 1)
    is_max = (pw[inner] > pw[inner - 1]) & (pw[inner] >= pw[inner + 1])
    cand = inner[is_max]
    cand = cand[pw[cand] > POWER_FLOOR * p.input_scale]
    cand = cand[np.argsort(-pw[cand], kind="stable")]
    chosen: list = []
    for i in cand:
        if all(abs(f[i] - f[j]) >= min_separation for j in chosen):
            chosen.append(i)
            if len(chosen) == count:
                break
    if len(chosen) < count:
        raise InsufficientPeaks(f"found {len(chosen)} peaks, wanted {count}")
    return np.sort(f[chosen])


def half_height_width(p: Periodogram, peak: float) -> float:
    """Width of the peak nearest ``peak`` at half its height, linearly interpolated."""
    pw, f = p.power, p.frequencies
    i = int(np.argmin(np.abs(f - peak)))
    # climb to the local maximum
    while 0 < i < pw.size - 1 and max(pw[i - 1], pw[i + 1]) > pw[i]:
        i = i - 1 if pw[i - 1] > pw[i + 1] else i + 1
    half = pw[i] / 2.0
    lo = i
    while lo > 0 and pw[lo] > half:
        lo -= 1
    hi = i
    while hi < pw.size - 1 and pw[hi] > half:
        hi += 1

    def cross(a, b):
        if pw[a] == pw[b]:
            return f[a]
        return f[a] + (half - pw[a]) * (f[b] - f[a]) / (pw[b] - pw[a])

    return float(cross(hi - 1, hi) - cross(lo + 1, lo)) if hi > i and lo < i else 0.0


def autocorrelation(series, max_lag: int) -> np.ndarray:
    """Sample autocorrelation at lags 0..max_lag (biased estimator)."""
    x = np.asarray(series, dtype=float)
    x = x - x.mean()
    n = x.size
    if not 0 <= max_lag < n:
        raise ValidationError("max_lag must lie in [0, len(series))")
    size = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(x, size)
    acov = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1] / n
    return acov / acov[0] if acov[0] > 0 else np.ones(max_lag + 1)


@dataclass(frozen=True)
class BatchMeans:
    means: np.ndarray
    pooled_se: float
    stationary: bool


def batch_means(series, window: int, sub_batches: int = 10) -> BatchMeans:
    """Means over disjoint windows and a stationarity flag.

    The standard error of a window mean is estimated from ``sub_batches``
    sub-batch means inside each window, pooled over windows, which keeps it
    honest for autocorrelated series.  Two window means differ by at most
    3 sqrt(2) SE when the flag is set.
    """
    x = np.asarray(series, dtype=float)
    if window < 2:
        raise ValidationError("window must be >= 2")
    if x.size < 4 * window:
        raise ValidationError("series must contain at least 4 windows")
    k = x.size // window
    blocks = x[: k * window].reshape(k, window)
    means = blocks.mean(axis=1)
    m = max(2, min(sub_batches, window // 2))
    size = window // m
    sub = blocks[:, : m * size].reshape(k, m, size).mean(axis=2)
    pooled_var = float(np.mean(sub.var(axis=1, ddof=1)))
    se = float(np.sqrt(pooled_var / m))
    spread = float(means.max() - means.min())
    scale = max(1.0, float(np.abs(means).max()))
    if se == 0.0:
        ok = spread <= 1e-12 * scale
    else:
        ok = spread < 3.0 * np.sqrt(2.0) * se
    return BatchMeans(means, se, bool(ok))
