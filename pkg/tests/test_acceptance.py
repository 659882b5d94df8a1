"""Acceptance criteria, one test each, at the stated tolerances.

Every test records a PASS/FAIL line (printed in the terminal summary)
before asserting, so a failing criterion is reported with its measured value.
"""

import time

import numpy as np
import pytest

from oscimarket import reducecheck as rc
from oscimarket.ingest import SAMPLES, fit_ar2, fit_series, load_csv, sample_path
from oscimarket.integrate import IntegratorConfig, Method, integrate_second_order
from oscimarket.noise import NoiseEnsemble, NoiseStream
from oscimarket.noscillator import (
    MarketSpec,
    closed_form_solution,
    component_energies,
    force_field,
    inverse_from_frequencies,
    normal_modes,
    project_to_constraint,
    reduce_sector,
    reduce_state,
    sector_energy_split,
    verify_interlacing,
)
from oscimarket.oscillator import (
    DampedOscillatorModel,
    simulate_cartesian,
    simulate_polar_radial,
    stationary_radial_density,
)
from oscimarket.radial import Convention
from oscimarket.reducecheck import Verdict
from oscimarket.stats import find_peaks, ks_statistic, ks_two_sample, periodogram
from oscimarket.stochastic_market import StochasticMarketModel, simulate_market


def log_uniform(rng, lo, hi, size):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size))


def test_01_interlacing_sweep(criterion):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    failures = 0
    for _ in range(1000):
        n = int(rng.integers(2, 13))
        spec = MarketSpec(log_uniform(rng, 1e-2, 1e2, n), log_uniform(rng, 1e-2, 1e2, n))
        d = normal_modes(spec)
        failures += not verify_interlacing(spec.gammas, d.lambdas).ok
    elapsed = time.perf_counter() - start
    ok = failures == 0 and elapsed < 10.0
    criterion(1, "interlacing sweep", ok, f"{failures} failures in 1000 specs, {elapsed:.2f} s")
    assert ok


def test_02_inverse_round_trip(criterion):
    rng = np.random.default_rng(202)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 13))
        g = np.sort(log_uniform(rng, 0.1, 10.0, n))
        lam = g[:-1] + rng.uniform(0.01, 0.99, n - 1) * np.diff(g)
        res = inverse_from_frequencies(g, lam)
        back = normal_modes(res.spec).lambdas
        worst = max(worst, float(np.max(np.abs(back - lam) / lam)))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-8 and elapsed < 5.0
    criterion(2, "inverse round trip", ok, f"max relative error {worst:.2e}, {elapsed:.2f} s")
    assert ok


def test_03_closed_form_vs_numeric(criterion):
    rng = np.random.default_rng(303)
    spec = MarketSpec(rng.uniform(0.5, 2.0, 4), rng.uniform(0.5, 2.0, 4))  # lambda < 2
    x0 = project_to_constraint(rng.normal(size=4))
    v0 = project_to_constraint(rng.normal(size=4))
    cfg = IntegratorConfig(1e-3, 100_000, Method.HAMILTONIAN_SPLITTING, record_every=10)
    tr = integrate_second_order(force_field(spec), 0.0, 0.0, x0, v0, cfg)
    x, _ = closed_form_solution(normal_modes(spec), (x0, v0))(tr.times)
    dev = float(np.max(np.abs(tr.states[:, :4] - x)))
    ok = dev < 1e-4
    criterion(3, "closed form vs numeric", ok, f"max deviation {dev:.2e} over t in [0, 100]")
    assert ok


def test_04_conservation_and_transfer(criterion):
    spec = MarketSpec([1.0, 2.0, 3.0], [1.0, 0.7, 1.3])  # gammas 1, 1.69, 1.52: non-degenerate
    x0 = np.array([0.5, -0.2, -0.3])
    cfg = IntegratorConfig(1e-3, 100_000, Method.HAMILTONIAN_SPLITTING)
    tr = integrate_second_order(force_field(spec), 0.0, 0.0, x0, np.zeros(3), cfg)
    E, total = component_energies(spec, tr.states[:, :3], tr.states[:, 3:])
    drift = float(np.max(np.abs(total - total[0])) / total[0])
    swing = float(np.max(E.max(axis=0) - E.min(axis=0)))
    constraint = float(np.max(np.abs(tr.states[:, :3].sum(axis=1))))
    ok = drift < 1e-6 and swing > 0.1 * total[0] and constraint < 1e-8
    criterion(4, "conservation and transfer", ok,
              f"energy drift {drift:.2e}, max swing {swing / total[0]:.3f} E, |sum x| {constraint:.1e}")
    assert ok


MODEL = DampedOscillatorModel(damping=1.0, sigma=1.0)
PATHS, DT, EVERY, PER_PATH, BURN = 10_000, 0.005, 100, 100, 1000  # 10^6 samples after t = 5
DENSITY_CFG = IntegratorConfig(DT, BURN + PER_PATH * EVERY, record_every=EVERY)
SKIP = BURN // EVERY + 1


@pytest.fixture(scope="module")
def radial_samples():
    out = {}
    for conv in Convention:
        start = time.perf_counter()
        tr = simulate_polar_radial(MODEL, np.ones(PATHS), DENSITY_CFG, NoiseEnsemble.first(5, PATHS, 1), conv)
        out[conv] = (tr.states[SKIP:, 0].ravel(), time.perf_counter() - start)
    start = time.perf_counter()
    tr = simulate_cartesian(MODEL, np.ones(PATHS), np.zeros(PATHS), DENSITY_CFG, NoiseEnsemble.first(6, PATHS, 2))
    out["cartesian"] = (np.hypot(tr.states[SKIP:, 0], tr.states[SKIP:, 1]).ravel(), time.perf_counter() - start)
    return out


def test_05_stationary_density(criterion, radial_samples):
    parts, ok = [], True
    for conv in Convention:
        r, elapsed = radial_samples[conv]
        start = time.perf_counter()
        ks = ks_statistic(r, stationary_radial_density(MODEL, conv).cdf)
        elapsed += time.perf_counter() - start  # a run is simulation plus comparison
        ok &= r.size >= 10 ** 6 and ks < 0.01 and elapsed < 60.0
        parts.append(f"{conv.value} KS {ks:.4f} ({r.size} samples, {elapsed:.1f} s)")
    criterion(5, "stationary density", ok, "; ".join(parts))
    assert ok


def test_06_cartesian_polar_equivalence(criterion, radial_samples):
    cart, elapsed = radial_samples["cartesian"]
    polar, _ = radial_samples[Convention.CARTESIAN_CONSISTENT]
    ks = ks_two_sample(cart, polar)
    ok = ks < 0.01
    criterion(6, "cartesian vs polar radial marginals", ok, f"two-sample KS {ks:.4f} (cartesian route {elapsed:.1f} s)")
    assert ok


def test_07_projectability_catalogue(criterion):
    osc = DampedOscillatorModel(damping=1.0, sigma=1.0).vector_fields()
    coord, radius = rc.coordinate_projection(2, [0]), rc.radius_projection()
    cases = [
        ("brownian, x", rc.check_projectable_sds(rc.brownian_2d(), coord), Verdict.PROJECTABLE),
        ("oscillator, radius", rc.check_projectable_sds(osc, radius), Verdict.PROJECTABLE),
        ("oscillator, forget momentum", rc.check_projectable_sds(osc, coord), Verdict.NOT_PROJECTABLE),
        ("translation, x", rc.check_projectable_deterministic(rc.translation_field, coord), Verdict.PROJECTABLE),
        ("rotation, x", rc.check_projectable_deterministic(rc.rotation_field, coord), Verdict.NOT_PROJECTABLE),
        ("rotation, radius", rc.check_projectable_deterministic(rc.rotation_field, radius), Verdict.PROJECTABLE),
    ]
    wrong = [name for name, rep, want in cases if rep.verdict is not want]
    ok = not wrong
    criterion(7, "projectability catalogue", ok,
              "6/6 verdicts, forget-momentum not_projectable" if ok else f"wrong: {', '.join(wrong)}")
    assert ok


def test_08_spectral_recovery(criterion):
    rng = np.random.default_rng(808)
    while True:
        spec = MarketSpec(rng.uniform(0.5, 3.0, 5), rng.uniform(0.5, 2.0, 5))
        d = normal_modes(spec)
        if np.min(np.diff(d.lambdas)) > 0.1:
            break
    # equal modal amplitudes; observe the component that sees every mode best
    x0 = d.C @ np.full(4, 0.1)
    comp = int(np.argmax(np.min(np.abs(d.C), axis=1)))
    dt, n = 0.01, 1 << 16
    cfg = IntegratorConfig(dt, n - 1, Method.HAMILTONIAN_SPLITTING)
    tr = integrate_second_order(force_field(spec), 0.0, 0.0, x0, np.zeros(5), cfg)
    p = periodogram(tr.states[:, comp], dt)
    peaks = find_peaks(p, 4, min_separation=0.05)
    err = np.abs(peaks - d.lambdas)
    ok = bool(np.all(err <= p.resolution))
    criterion(8, "spectral recovery", ok,
              f"max error {err.max():.4f} vs bin {p.resolution:.4f} (lambdas {np.round(d.lambdas, 4).tolist()})")
    assert ok


def test_09_sector_consistency(criterion):
    rng = np.random.default_rng(909)
    spec = MarketSpec([4.0, 2.0, 1.0, 3.0, 6.0], [1.0, 0.5, 2.0, 1.5, 1.5])  # sector {0, 1, 4} at gamma = 2
    group = (0, 1, 4)
    red = reduce_sector(spec, group)
    a_hat, b_hat = red.spec.a[0], red.spec.b[0]
    w = a_hat / spec.a[list(group)]
    identity = 0.0
    for _ in range(1000):
        xs, vs = rng.normal(size=2)
        x = np.zeros(5)
        v = np.zeros(5)
        x[list(group)] = w * xs
        v[list(group)] = w * vs
        E, _ = component_energies(spec, x, v)
        identity = max(identity, abs(E[list(group)].sum() - (0.5 * a_hat * xs ** 2 + 0.5 * b_hat * vs ** 2)))
    _, internal = sector_energy_split(spec, group, rng.normal(size=(10_000, 5)), rng.normal(size=(10_000, 5)))
    # zero internal energy: synchronous sector motion, everything else arbitrary
    xs, vs = 0.3, -0.2
    x0 = np.zeros(5)
    v0 = np.zeros(5)
    x0[list(group)] = w * xs
    v0[list(group)] = w * vs
    x0[2], v0[2] = -0.1, 0.25
    x0[3], v0[3] = -xs - x0[2], -vs - v0[2]
    t = np.linspace(0.0, 100.0, 2001)
    full, _ = closed_form_solution(normal_modes(spec), (x0, v0))(t)
    reduced, _ = closed_form_solution(normal_modes(red.spec), (reduce_state(red, x0), reduce_state(red, v0)))(t)
    match = float(np.max(np.abs(reduce_state(red, full) - reduced)))
    ok = identity <= 1e-12 and internal.min() >= 0.0 and match < 1e-8
    criterion(9, "sector consistency", ok,
              f"identity error {identity:.1e}, min E_internal {internal.min():.2e}, trajectory match {match:.1e}")
    assert ok


def test_10_stochastic_market(criterion):
    rng = np.random.default_rng(1010)
    spec = MarketSpec([1.0, 2.0, 3.0, 1.5], [1.0, 0.8, 1.2, 2.0])
    d = normal_modes(spec)
    sol = closed_form_solution(d, (project_to_constraint(rng.normal(size=4)), project_to_constraint(rng.normal(size=4))))
    quiet = StochasticMarketModel.from_closed_form(sol, c=0.0, sigma=0.0, phase_sigma=0.0)
    path = simulate_market(quiet, IntegratorConfig(0.01, 10_000, record_every=10))
    dev = float(np.max(np.abs(path.x - sol(path.times)[0])))
    worst_sum, min_r = 0.0, np.inf
    for seed in range(5):
        model = StochasticMarketModel.build(d, c=1.0, sigma=1.0, r0=0.5, seed=seed)
        p = simulate_market(model, IntegratorConfig(0.01, 20_000), NoiseStream(seed, 0, 6))
        worst_sum = max(worst_sum, float(np.max(np.abs(p.x.sum(axis=1)))))
        min_r = min(min_r, float(p.r.min()))
    ok = dev < 1e-8 and worst_sum < 1e-10 and min_r > 0
    criterion(10, "stochastic market sanity", ok,
              f"noiseless deviation {dev:.1e}, max |sum x| {worst_sum:.1e}, min r {min_r:.3g}")
    assert ok


def test_11_ingest_smoke(criterion):
    res = fit_series(load_csv(sample_path(SAMPLES[0])))
    m = DampedOscillatorModel(damping=0.05, sigma=0.05)
    tr = simulate_cartesian(m, 1.0, 0.0, IntegratorConfig(0.05, 40_000, record_every=20), NoiseStream(11, 0, 2))
    fit = fit_ar2(tr.states[:, 0], 1.0)
    rel = abs(fit.period_estimate - 2 * np.pi) / (2 * np.pi) if fit.oscillatory else np.inf
    ok = res["fit"]["oscillatory"] and rel < 0.05
    criterion(11, "ingest smoke test", ok,
              f"gold sample period {res['fit']['period_estimate']:.0f} days; oscillator period error {100 * rel:.2f}%")
    assert ok
