import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oscimarket.errors import (
    MissingFairValue,
    NonMonotonicDates,
    NonPositivePrice,
    ParseError,
    SeriesTooShort,
    ValidationError,
)
from oscimarket.ingest import (
    SAMPLES,
    PriceSeries,
    fit_ar2,
    fit_series,
    load_csv,
    mispricing,
    resample_uniform,
    rolling_fair_value,
    sample_path,
)
from oscimarket.integrate import IntegratorConfig
from oscimarket.noise import NoiseEnsemble
from oscimarket.oscillator import DampedOscillatorModel, simulate_cartesian


def write(tmp_path, text, name="s.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_two_rows(tmp_path):
    s = load_csv(write(tmp_path, "date,price\n2020-01-01,10.5\n2020-01-08,11\n"))
    assert len(s) == 2
    assert s.timestamps.tolist() == [0.0, 7.0] and s.price.tolist() == [10.5, 11.0]
    assert s.fair_value is None


def test_load_fair_value_column(tmp_path):
    s = load_csv(write(tmp_path, "date,price,fair_value\n2020-01-01,10,9\n2020-01-02,11,9.5\n\n"))
    assert s.fair_value.tolist() == [9.0, 9.5]


@pytest.mark.parametrize("body, err, row", [
    ("2020-01-01,10\n2020-01-02,-1\n", NonPositivePrice, 3),
    ("2020-01-01,10\n2020-01-02,0\n", NonPositivePrice, 3),
    ("2020-01-05,10\n2020-01-02,11\n", NonMonotonicDates, 3),
    ("2020-01-05,10\n2020-01-05,11\n", NonMonotonicDates, 3),
    ("2020-01-01,ten\n", ParseError, 2),
    ("2020-13-01,10\n", ParseError, 2),
    ("2020-01-01,10,3\n", ParseError, 2),
])
def test_load_errors(tmp_path, body, err, row):
    with pytest.raises(err) as info:
        load_csv(write(tmp_path, "date,price\n" + body))
    assert info.value.row == row


def test_load_bad_header_and_empty(tmp_path):
    with pytest.raises(ParseError):
        load_csv(write(tmp_path, "when,price\n2020-01-01,1\n"))
    with pytest.raises(ParseError):
        load_csv(write(tmp_path, ""))
    with pytest.raises(ParseError):
        load_csv(write(tmp_path, "date,price\n"))


def test_price_series_invariants():
    with pytest.raises(NonMonotonicDates):
        PriceSeries([0.0, 0.0], [1.0, 1.0])
    with pytest.raises(NonPositivePrice):
        PriceSeries([0.0, 1.0], [1.0, -1.0])
    with pytest.raises(ValidationError):
        PriceSeries([0.0, 1.0], [1.0, 1.0], [1.0])


def test_mispricing_examples():
    s = PriceSeries([0.0, 1.0], [100.0, 50.0], [100.0, 50.0])
    assert mispricing(s, "log_ratio").tolist() == [0.0, 0.0]
    assert mispricing(s, "difference").tolist() == [0.0, 0.0]
    s = PriceSeries([0.0], [110.0])
    assert mispricing(s, "difference", 100.0).tolist() == [10.0]
    s = PriceSeries([0.0], [math.e * 100])
    assert mispricing(s, "log_ratio", 100.0)[0] == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(MissingFairValue):
        mispricing(s)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(1e-3, 1e3))
def test_log_ratio_scale_invariant(seed, k):
    rng = np.random.default_rng(seed)
    p, v = np.exp(rng.normal(size=20)), np.exp(rng.normal(size=20))
    t = np.arange(20.0)
    a = mispricing(PriceSeries(t, p, v))
    b = mispricing(PriceSeries(t, k * p, k * v))
    assert np.allclose(a, b, atol=1e-12)


def test_rolling_fair_value():
    p = np.arange(1.0, 11.0)
    assert np.allclose(rolling_fair_value(p, 3), p)  # linear data is reproduced by a centred mean
    fv = rolling_fair_value(np.array([1.0, 5.0, 3.0, 7.0]), 3)
    assert fv.tolist() == [1.0, 3.0, 5.0, 7.0]
    with pytest.raises(ValidationError):
        rolling_fair_value(p, 0)


def test_resample_uniform():
    t, x, dt = resample_uniform([0.0, 1.0, 2.0], [1.0, 2.0, 3.0])
    assert dt == 1.0 and x.tolist() == [1.0, 2.0, 3.0]
    t, x, dt = resample_uniform([0.0, 7.0, 14.0, 24.0, 28.0], [0.0, 7.0, 14.0, 24.0, 28.0])
    assert dt == 7.0 and t.tolist() == [0.0, 7.0, 14.0, 21.0, 28.0] and np.allclose(x, t)


def test_ar2_cosine():
    t = np.arange(1000.0)
    fit = fit_ar2(np.cos(0.5 * t), 1.0)
    assert abs(fit.period_estimate - 4 * np.pi) < 0.02 * 4 * np.pi
    assert fit.phi1 == pytest.approx(2 * np.cos(0.5), abs=1e-3) and fit.phi2 == pytest.approx(-1.0, abs=1e-3)


def test_ar2_white_noise_not_oscillatory():
    runs = 200
    absent = sum(not fit_ar2(np.random.default_rng(s).normal(size=1000)).oscillatory for s in range(runs))
    assert absent >= 0.9 * runs


def test_ar2_bare_sign_test_available():
    x = np.random.default_rng(3).normal(size=1000)
    fit = fit_ar2(x, significance=0.0)
    assert fit.oscillatory == (fit.phi1 ** 2 + 4 * fit.phi2 < 0)


def test_ar2_damped_oscillator():
    m = DampedOscillatorModel(damping=0.05, sigma=0.05)
    paths = 4
    # sampled once per time unit: an AR(2) fit of a finely sampled diffusion is badly biased
    cfg = IntegratorConfig(0.05, 40_000, record_every=20)
    tr = simulate_cartesian(m, np.ones(paths), np.zeros(paths), cfg, NoiseEnsemble.first(0, paths, 2))
    for i in range(paths):
        fit = fit_ar2(tr.states[:, 0, i], 1.0)
        assert abs(fit.period_estimate - 2 * np.pi) < 0.05 * 2 * np.pi
        assert fit.damping_estimate > 0


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-4, 1e4))
def test_ar2_period_scale_invariant(k):
    x = np.cos(0.3 * np.arange(300.0)) + 0.1 * np.random.default_rng(0).normal(size=300)
    assert fit_ar2(k * x).period_estimate == pytest.approx(fit_ar2(x).period_estimate, rel=1e-9)


def test_ar2_errors():
    with pytest.raises(SeriesTooShort):
        fit_ar2(np.ones(49))
    with pytest.raises(ValidationError):
        fit_ar2(np.ones(60), 0.0)


@pytest.mark.parametrize("name", SAMPLES)
def test_bundled_samples(name):
    s = load_csv(sample_path(name))
    assert len(s) > 500
    res = fit_series(s)
    assert res["fit"]["oscillatory"] and res["fit"]["period_estimate"] > 0
    assert res["fair_value_source"] == ("column" if s.fair_value is not None else "rolling_mean(521)")
    with pytest.raises(ValidationError):
        sample_path("nope.csv")


def test_fit_series_constant_fair_value():
    s = load_csv(sample_path(SAMPLES[0]))
    res = fit_series(s, "difference", constant_fair_value=float(np.mean(s.price)))
    assert res["fair_value_source"] == "constant" and res["mode"] == "difference"
    assert res["dt_days"] == 7.0
