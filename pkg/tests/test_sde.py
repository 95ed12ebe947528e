import math

import numpy as np
import pytest

from cutofflab import sde
from cutofflab.errors import CollisionError, ConfigError, DomainError, NonFiniteError
from cutofflab.model import ModelSpec
from cutofflab.sde import Ensemble, Scheme, SimConfig


def test_config_validation():
    for bad in (dict(dt=0.0), dict(dt=-1.0), dict(t_end=-1.0), dict(n_particles=0), dict(n_particles=2.5),
                dict(seed=-1), dict(seed=2**64), dict(min_gap=0.0), dict(dt=1.0, t_end=0.5), dict(scheme="rk4")):
        with pytest.raises(ConfigError):
            SimConfig(**bad)
    assert SimConfig(scheme="em").scheme is Scheme.EULER_MARUYAMA
    assert SimConfig(scheme="strang").scheme is Scheme.OU_SPLITTING
    cfg = SimConfig.for_model(ModelSpec.ou(2, 4.0))
    assert cfg.dt == pytest.approx(2.5e-4) and cfg.burn_in == pytest.approx(2.5)


def test_ensemble_roundtrips(tmp_path):
    x = np.random.default_rng(0).normal(size=(6, 3))
    e = Ensemble(x, 1.25)
    assert Ensemble.from_bytes(e.to_bytes()) == e
    e.save(tmp_path / "e.bin")
    assert Ensemble.load(tmp_path / "e.bin") == e
    text = e.to_csv(tmp_path / "e.csv")
    assert text.splitlines()[0] == "x1,x2,x3"
    assert Ensemble.from_csv(tmp_path / "e.csv", time=1.25) == e
    with pytest.raises(ValueError):
        Ensemble.from_bytes(b"short")
    with pytest.raises(NonFiniteError):
        Ensemble(np.array([[np.nan]]), 0.0)
    with pytest.raises(DomainError):
        Ensemble(np.zeros(3), 0.0)


def test_determinism_and_seed_sensitivity():
    model = ModelSpec.quartic_pair(4, 0.2)
    cfg = SimConfig(dt=1e-2, t_end=0.5, n_particles=64, seed=7)
    a = sde.simulate(model, np.ones(4), cfg)
    b = sde.simulate(model, np.ones(4), cfg)
    assert a == b
    assert a.to_bytes() == b.to_bytes()
    assert not np.array_equal(a.samples, sde.simulate(model, np.ones(4), cfg.with_(seed=8)).samples)


def test_simulate_path_snapshots_match_single_runs():
    model = ModelSpec.ou(3)
    cfg = SimConfig(dt=0.01, n_particles=20, seed=2)
    snaps = sde.simulate_path(model, np.zeros(3), cfg, [0.5, 0.2])
    assert [s.time for s in snaps] == [0.2, 0.5]
    assert snaps[0] == sde.simulate(model, np.zeros(3), cfg.with_(t_end=0.2))
    assert sde.simulate_path(model, np.zeros(3), cfg, [0.0])[0].samples.tolist() == np.zeros((20, 3)).tolist()


def test_ou_splitting_hits_mehler_moments():
    # the splitting scheme is exact for OU, so even a coarse step gives the right law
    rho, t = 2.0, 0.7
    model = ModelSpec.ou(2, rho, mean_shift=[1.0, -1.0])
    x0 = np.array([3.0, 0.0])
    e = sde.simulate(model, x0, SimConfig(dt=0.35, t_end=t, n_particles=40000, seed=1))
    mean = model.shift() + math.exp(-rho * t) * (x0 - model.shift())
    var = (1 - math.exp(-2 * rho * t)) / rho
    n = e.n
    assert np.all(np.abs(e.samples.mean(axis=0) - mean) < 5 * math.sqrt(var / n))
    assert np.all(np.abs(e.samples.var(axis=0) - var) < 5 * var * math.sqrt(2 / n))


def test_euler_maruyama_converges():
    rho, t = 1.0, 1.0
    model = ModelSpec.ou(1, rho)
    e = sde.simulate(model, np.array([5.0]), SimConfig(dt=1e-3, t_end=t, n_particles=40000, seed=3, scheme="em"))
    assert abs(e.samples.mean() - 5 * math.exp(-1)) < 0.03


def test_dyson_stays_ordered():
    model = ModelSpec.dyson(5, 2.0)
    e = sde.simulate(model, sde.default_start(model), SimConfig(dt=1e-3, t_end=1.0, n_particles=200, seed=0))
    assert np.all(np.diff(e.samples, axis=1) < 0)
    with pytest.raises(DomainError):
        sde.simulate(model, np.arange(5.0), SimConfig(dt=1e-3, t_end=0.1, n_particles=2))


def test_collision_guard_raises():
    model = ModelSpec.dyson(3, 1.0)
    cfg = SimConfig(dt=1e-2, t_end=0.1, n_particles=4, min_gap=10.0)
    with pytest.raises(CollisionError):
        sde.simulate(model, np.array([1.0, 0.0, -1.0]), cfg)


def test_dyson_two_particle_gap():
    # for d=2 the gap u = x1 - x2 has density ~ u^beta exp(-rho u^2 / 4),
    # so E u^2 = 2 (beta + 1) / rho
    for beta in (1.0, 2.0, 4.0):
        x = sde.dyson_tridiagonal_sample(2, beta, 1.5, 40000, seed=1)
        u2 = (x[:, 0] - x[:, 1]) ** 2
        assert u2.mean() == pytest.approx(2 * (beta + 1) / 1.5, rel=0.03)
        assert np.all(x[:, 0] > x[:, 1])


def test_sample_stationary_ou_and_quadratic():
    ou = ModelSpec.ou(3, 4.0, mean_shift=[1.0, 2.0, 3.0])
    x = sde.sample_stationary(ou, SimConfig(n_particles=50000, seed=0)).samples
    assert np.allclose(x.mean(axis=0), [1, 2, 3], atol=0.01)
    assert np.allclose(np.cov(x.T), np.eye(3) / 4, atol=0.01)
    d, rho, g = 4, 1.5, 0.6
    q = ModelSpec.quadratic_pair(d, g, rho, mean_shift=[1.0, 0.0, -1.0, 2.0])
    y = sde.sample_stationary(q, SimConfig(n_particles=200000, seed=1)).samples
    H = rho * np.eye(d) + 2 * g * (d * np.eye(d) - np.ones((d, d)))
    assert np.allclose(np.cov(y.T), np.linalg.inv(H), atol=5e-3)
    assert np.allclose(y.mean(axis=0), q.exact_mean(), atol=5e-3)


def test_sample_stationary_dyson_and_chains():
    dy = ModelSpec.dyson(4, 2.0)
    x = sde.sample_stationary(dy, SimConfig(n_particles=500, seed=0)).samples
    assert np.all(np.diff(x, axis=1) < 0)
    qp = ModelSpec.quartic_pair(3, 0.1)
    e = sde.sample_stationary(qp, SimConfig(dt=1e-2, n_particles=100, burn_in=2.0, seed=0), samples_per_chain=3)
    assert e.n == 300
    with pytest.raises(ConfigError):
        sde.sample_stationary(qp, SimConfig(n_particles=10, burn_in=0.0))


def test_estimate_mean():
    est = sde.estimate_mean(ModelSpec.dyson(3, 2.0), SimConfig(n_particles=20000, seed=4))
    assert abs(est.coord_sum) <= est.sum_half_width * 1.5
    mean, hw = est
    # the ordered cone is symmetric under x -> -reverse(x)
    assert np.allclose(mean, -mean[::-1], atol=3 * hw.max())
