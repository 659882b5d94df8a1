import numpy as np
import pytest

from oscimarket.errors import NumericalFailure, ValidationError
from oscimarket.integrate import IntegratorConfig, Method, Trajectory, integrate_second_order, integrate_sde
from oscimarket.noise import NoiseEnsemble, NoiseStream
from oscimarket.sds import VectorFieldSet


def rotation():
    return VectorFieldSet(2, lambda x: np.stack([x[1], -x[0]]))


def test_config_validation():
    with pytest.raises(ValidationError):
        IntegratorConfig(dt=0.0, steps=10)
    with pytest.raises(ValidationError):
        IntegratorConfig(dt=0.1, steps=0)
    with pytest.raises(ValueError):
        IntegratorConfig(dt=0.1, steps=1, method="rk4")
    cfg = IntegratorConfig(dt=0.1, steps=10, record_every=4)
    assert cfg.recorded_steps().tolist() == [0, 4, 8, 10]


def test_trajectory_invariants():
    with pytest.raises(ValidationError):
        Trajectory(np.array([0.0, 0.0]), np.zeros((2, 1)))
    with pytest.raises(ValidationError):
        Trajectory(np.array([0.0, 1.0]), np.zeros((3, 1)))


def test_no_dynamics_constant():
    V = VectorFieldSet(2, lambda x: np.zeros(2), (lambda x: np.array([0.0, 0.0]),))
    tr = integrate_sde(V, [1.0, 0.0], IntegratorConfig(0.01, 100), NoiseStream(0, 0, 1))
    assert len(tr) == 101
    assert np.all(tr.states == np.array([1.0, 0.0]))


def test_ou_variance():
    V = VectorFieldSet(1, lambda x: -x, (lambda x: np.ones(1),))
    M = 100_000
    # Heun's stationary OU variance is 0.5 - O(dt^2), far below the SE at dt = 0.01
    cfg = IntegratorConfig(dt=0.01, steps=500, method=Method.STRATONOVICH_HEUN, record_every=500)
    tr = integrate_sde(V, np.zeros((1, M)), cfg, NoiseEnsemble.first(11, M, 1))
    x = tr.final[0]
    var = x.var(ddof=1)
    # SE of a sample variance of a normal: var * sqrt(2 / (M - 1))
    se = var * np.sqrt(2.0 / (M - 1))
    exact = 0.5 * (1 - np.exp(-10.0))
    assert abs(var - exact) < 3 * se


def test_rotation_returns_home():
    steps = 6283
    cfg = IntegratorConfig(dt=2 * np.pi / steps, steps=steps)
    tr = integrate_sde(rotation(), [1.0, 0.0], cfg)
    assert np.max(np.abs(tr.final - [1.0, 0.0])) < 1e-4


def test_symplectic_energy_drift():
    cfg = IntegratorConfig(1e-3, 100_000, Method.HAMILTONIAN_SPLITTING, record_every=100)
    tr = integrate_second_order(lambda x: -x, 0.0, 0.0, [1.0], [0.0], cfg)
    E = 0.5 * (tr.states[:, 0] ** 2 + tr.states[:, 1] ** 2)
    assert np.max(np.abs(E - 0.5)) / 0.5 < 1e-6


def test_pure_damping_is_exponential():
    cfg = IntegratorConfig(1e-3, 2000, Method.HAMILTONIAN_SPLITTING)
    tr = integrate_second_order(lambda x: 0.0 * x, 0.7, 0.0, [0.0], [2.0], cfg)
    assert np.max(np.abs(tr.states[:, 1] - 2.0 * np.exp(-0.7 * tr.times))) < 1e-6


def test_free_particle():
    cfg = IntegratorConfig(0.01, 500, Method.HAMILTONIAN_SPLITTING)
    tr = integrate_second_order(lambda x: 0.0 * x, 0.0, 0.0, [1.0, -1.0], [0.5, 2.0], cfg)
    expect = np.array([1.0, -1.0]) + np.outer(tr.times, [0.5, 2.0])
    assert np.max(np.abs(tr.states[:, :2] - expect)) < 1e-12


def test_callable_damping_matches_constant():
    cfg = IntegratorConfig(0.01, 300, Method.HAMILTONIAN_SPLITTING)
    a = integrate_second_order(lambda x: -x, 0.3, 0.0, [1.0], [0.0], cfg)
    b = integrate_second_order(lambda x: -x, lambda x, p: 0.3, 0.0, [1.0], [0.0], cfg)
    assert np.allclose(a.states, b.states, atol=1e-14)


def test_bitwise_reproducible():
    V = VectorFieldSet(2, lambda x: np.stack([x[1], -x[0] - 0.2 * x[1]]),
                       (lambda x: np.stack([0.1 * x[1], 0.3 + 0 * x[0]]),))
    cfg = IntegratorConfig(0.01, 500)
    a = integrate_sde(V, [1.0, 0.0], cfg, NoiseStream(5, 2, 1))
    b = integrate_sde(V, [1.0, 0.0], cfg, NoiseStream(5, 2, 1))
    assert np.array_equal(a.states, b.states)


def test_ensemble_order_invariance():
    V = VectorFieldSet(2, lambda x: np.stack([x[1], -x[0]]), (lambda x: np.array([0.2, 0.1]),))
    cfg = IntegratorConfig(0.01, 200)
    ens = NoiseEnsemble.first(3, 6, 1)
    x0 = np.tile([[1.0], [0.0]], 6)
    full = integrate_sde(V, x0, cfg, ens).states
    rev = NoiseEnsemble(3, tuple(range(5, -1, -1)), 1)
    backwards = integrate_sde(V, x0, cfg, rev).states[:, :, ::-1]
    assert np.array_equal(full, backwards)
    for m in range(6):
        single = integrate_sde(V, [1.0, 0.0], cfg, ens.stream(m)).states
        assert np.allclose(single, full[:, :, m], rtol=0, atol=1e-14)


def _slope(errors, dts):
    return np.polyfit(np.log(dts), np.log(errors), 1)[0]


@pytest.mark.parametrize("method, order", [(Method.EULER_MARUYAMA, 1.0), (Method.STRATONOVICH_HEUN, 2.0)])
def test_convergence_order_sde_solvers(method, order):
    T = 1.0
    dts = [0.02, 0.01, 0.005, 0.0025]
    errs = []
    for dt in dts:
        tr = integrate_sde(rotation(), [1.0, 0.0], IntegratorConfig(dt, int(round(T / dt)), method))
        errs.append(np.linalg.norm(tr.final - [np.cos(T), -np.sin(T)]))
    assert abs(_slope(errs, dts) - order) < 0.3


def test_convergence_order_splitting():
    T = 1.0
    dts = [0.02, 0.01, 0.005, 0.0025]
    errs = []
    for dt in dts:
        cfg = IntegratorConfig(dt, int(round(T / dt)), Method.HAMILTONIAN_SPLITTING)
        tr = integrate_second_order(lambda x: -x, 0.0, 0.0, [1.0], [0.0], cfg)
        errs.append(np.linalg.norm(tr.final - [np.cos(T), -np.sin(T)]))
    assert abs(_slope(errs, dts) - 2.0) < 0.3


def test_blow_up_reports_step():
    V = VectorFieldSet(1, lambda x: x * x)
    with np.errstate(over="ignore", invalid="ignore"), pytest.raises(NumericalFailure, match="step"):
        integrate_sde(V, [1.0], IntegratorConfig(0.5, 100, Method.EULER_MARUYAMA))


def test_noise_requirements():
    V = VectorFieldSet(1, lambda x: -x, (lambda x: np.ones(1),))
    cfg = IntegratorConfig(0.1, 10)
    with pytest.raises(ValidationError):
        integrate_sde(V, [0.0], cfg)
    with pytest.raises(ValidationError):
        integrate_sde(V, [0.0], cfg, NoiseStream(0, 0, 2))
    with pytest.raises(ValidationError):
        integrate_sde(V, np.zeros((1, 3)), cfg, NoiseStream(0, 0, 1))
    with pytest.raises(ValidationError):
        integrate_sde(V, [0.0], IntegratorConfig(0.1, 10, Method.HAMILTONIAN_SPLITTING), NoiseStream(0, 0, 1))
