"""Price series loading, mispricing and a crude AR(2) oscillator fit."""

from __future__ import annotations

import csv
import datetime as _dt
import enum
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    MissingFairValue,
    NonMonotonicDates,
    NonPositivePrice,
    ParseError,
    SeriesTooShort,
    ValidationError,
)

DEFAULT_FAIR_WINDOW = 521
MIN_AR_LENGTH = 50
DEFAULT_SIGNIFICANCE = 2.0
SAMPLES = ("gold_synthetic.csv", "eurusd_ppp_synthetic.csv")


@dataclass(frozen=True)
class PriceSeries:
    timestamps: np.ndarray  # days since the first row
    price: np.ndarray
    fair_value: Optional[np.ndarray] = None

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=float)
        p = np.asarray(self.price, dtype=float)
        if t.ndim != 1 or t.shape != p.shape:
            raise ValidationError("timestamps and price must be 1-d and of equal length")
        if np.any(np.diff(t) <= 0):
            raise NonMonotonicDates("timestamps must be strictly increasing")
        if np.any(~(p > 0)):
            raise NonPositivePrice("prices must be positive")
        fv = self.fair_value
        if fv is not None:
            fv = np.asarray(fv, dtype=float)
            if fv.shape != p.shape:
                raise ValidationError("fair_value must match price in length")
            if np.any(~(fv > 0)):
                raise NonPositivePrice("fair values must be positive")
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "price", p)
        object.__setattr__(self, "fair_value", fv)

    def __len__(self):
        return self.price.size


def _positive(text, row, what):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"cannot parse {what} {text!r}", row) from None
    if not value > 0 or not math.isfinite(value):
        raise NonPositivePrice(f"{what} must be positive, got {text!r}", row)
    return value


def load_csv(path) -> PriceSeries:
    """Read ``date,price[,fair_value]`` rows; row numbers count the header as row 1."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError("empty file", 1)
        header = [h.strip().lower() for h in header]
        if header not in (["date", "price"], ["date", "price", "fair_value"]):
            raise ParseError(f"header must be date,price[,fair_value], got {','.join(header)}", 1)
        width = len(header)
        days, price, fair = [], [], []
        first = prev = None
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != width:
                raise ParseError(f"expected {width} fields, got {len(row)}", row_no)
            try:
                date = _dt.date.fromisoformat(row[0].strip())
            except ValueError:
                raise ParseError(f"bad ISO-8601 date {row[0]!r}", row_no) from None
            if first is None:
                first = date
            if prev is not None and date <= prev:
                raise NonMonotonicDates(f"date {date} does not follow {prev}", row_no)
            prev = date
            days.append(float((date - first).days))
            price.append(_positive(row[1].strip(), row_no, "price"))
            if width == 3:
                fair.append(_positive(row[2].strip(), row_no, "fair_value"))
    if not days:
        raise ParseError("no data rows", 2)
    return PriceSeries(np.array(days), np.array(price), np.array(fair) if width == 3 else None)


def sample_path(name: str = SAMPLES[0]) -> Path:
    """Location of a bundled synthetic sample CSV."""
    if name not in SAMPLES:
        raise ValidationError(f"unknown sample {name!r}; choose from {SAMPLES}")
    return Path(str(resources.files("oscimarket") / "data" / name))


def rolling_fair_value(price, window: int = DEFAULT_FAIR_WINDOW) -> np.ndarray:
    """Centred rolling mean; the window shrinks symmetrically near the ends."""
    p = np.asarray(price, dtype=float)
    if window < 1:
        raise ValidationError("window must be >= 1")
    half = window // 2
    csum = np.concatenate([[0.0], np.cumsum(p)])
    i = np.arange(p.size)
    h = np.minimum(half, np.minimum(i, p.size - 1 - i))
    return (csum[i + h + 1] - csum[i - h]) / (2 * h + 1)


class MispricingMode(str, enum.Enum):
    LOG_RATIO = "log_ratio"
    DIFFERENCE = "difference"


def mispricing(series: PriceSeries, mode=MispricingMode.LOG_RATIO, constant_fair_value: Optional[float] = None) -> np.ndarray:
    """x = ln(P / V) or x = P - V.

    A constant fair value takes precedence over the series' own column.
    """
    mode = MispricingMode(mode)
    if constant_fair_value is not None:
        if not constant_fair_value > 0:
            raise ValidationError("constant_fair_value must be positive")
        V = np.full_like(series.price, float(constant_fair_value))
    elif series.fair_value is not None:
        V = series.fair_value
    else:
        raise MissingFairValue("no fair value column and no constant fair value supplied")
    P = series.price
    if mode is MispricingMode.LOG_RATIO:
        return np.log(P / V)
    return P - V


def resample_uniform(t, x):
    """Linear interpolation onto the median spacing; returns (grid, values, dt)."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    steps = np.diff(t)
    dt = float(np.median(steps))
    if np.allclose(steps, dt, rtol=1e-12, atol=0.0):
        return t, x, dt
    n = int(np.floor((t[-1] - t[0]) / dt + 1e-9)) + 1
    grid = t[0] + dt * np.arange(n)
    return grid, np.interp(grid, t, x), dt


@dataclass(frozen=True)
class OscillatorFit:
    phi1: float
    phi2: float
    residual_variance: float
    period_estimate: Optional[float] = None
    damping_estimate: Optional[float] = None

    @property
    def oscillatory(self) -> bool:
        return self.period_estimate is not None

    def to_dict(self) -> dict:
        return {
            "phi1": self.phi1,
            "phi2": self.phi2,
            "residual_variance": self.residual_variance,
            "oscillatory": self.oscillatory,
            "period_estimate": self.period_estimate,
            "damping_estimate": self.damping_estimate,
        }


def fit_ar2(x, dt: float = 1.0, significance: float = DEFAULT_SIGNIFICANCE) -> OscillatorFit:
    """Least-squares AR(2) on the demeaned series.

    Complex characteristic roots give a period 2 pi dt / arccos(phi1 / (2 sqrt(-phi2)))
    and a damping rate -ln(-phi2) / (2 dt); otherwise both are absent.

    Roots count as complex only when the discriminant phi1^2 + 4 phi2 lies
    more than ``significance`` standard errors below zero (delta method on
    the least-squares covariance).  Without this gate white noise, whose
    phi2 scatters around zero, looks oscillatory about half the time.
    ``significance=0`` gives the bare sign test.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < MIN_AR_LENGTH:
        raise SeriesTooShort(f"AR(2) fit needs at least {MIN_AR_LENGTH} points, got {x.size}")
    if not dt > 0:
        raise ValidationError("dt must be positive")
    if significance < 0:
        raise ValidationError("significance must be >= 0")
    x = x - x.mean()
    X = np.column_stack([x[1:-1], x[:-2]])
    y = x[2:]
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    phi1, phi2 = float(coef[0]), float(coef[1])
    resid = y - X @ coef
    rv = float(resid @ resid / max(1, y.size - 2))
    disc = phi1 * phi1 + 4.0 * phi2
    grad = np.array([2.0 * phi1, 4.0])
    cov = rv * np.linalg.pinv(X.T @ X)
    se = math.sqrt(max(0.0, float(grad @ cov @ grad)))
    if disc < 0 and disc < -significance * se:
        ratio = np.clip(phi1 / (2.0 * math.sqrt(-phi2)), -1.0, 1.0)
        period = 2.0 * math.pi * dt / math.acos(ratio)
        damping = -math.log(-phi2) / (2.0 * dt)
        return OscillatorFit(phi1, phi2, rv, period, damping)
    return OscillatorFit(phi1, phi2, rv)


def fit_series(series: PriceSeries, mode=MispricingMode.LOG_RATIO, constant_fair_value=None,
               window: int = DEFAULT_FAIR_WINDOW, significance: float = DEFAULT_SIGNIFICANCE) -> dict:
    """Full pipeline: fair value, mispricing, resampling, AR(2) fit."""
    if constant_fair_value is None and series.fair_value is None:
        source = f"rolling_mean({window})"
        series = PriceSeries(series.timestamps, series.price, rolling_fair_value(series.price, window))
    else:
        source = "constant" if constant_fair_value is not None else "column"
    x = mispricing(series, mode, constant_fair_value)
    _, xu, dt = resample_uniform(series.timestamps, x)
    fit = fit_ar2(xu, dt, significance)
    return {
        "n_rows": len(series),
        "n_resampled": int(xu.size),
        "dt_days": dt,
        "fair_value_source": source,
        "mode": MispricingMode(mode).value,
        "mispricing_mean": float(np.mean(x)),
        "mispricing_std": float(np.std(x)),
        "fit": fit.to_dict(),
    }
