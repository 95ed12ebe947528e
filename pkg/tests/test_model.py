import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from cutofflab.errors import ConfigError, DomainError, EmptySetError
from cutofflab.model import (
    AffineMap,
    Ball,
    Cube,
    Finite,
    ModelSpec,
    ScaledIdentityMap,
    check_domain,
    generator_apply,
    grad_potential,
    hessian_quadratic_form,
    potential_value,
    sup_lambda,
)
from cutofflab.sde import dyson_tridiagonal_sample

FAMILIES = [
    lambda d: ModelSpec.ou(d, 1.7),
    lambda d: ModelSpec.quadratic_pair(d, 0.4, 1.2),
    lambda d: ModelSpec.quartic_pair(d, 0.3, 0.8),
    lambda d: ModelSpec.dyson(d, 2.0, 1.5),
]


def _point(model, seed):
    g = np.random.default_rng(seed)
    if model.is_dyson:
        return dyson_tridiagonal_sample(model.d, model.potential.coupling, model.rho, 1, seed)[0]
    return g.normal(size=model.d) * 1.3


def test_constructors_and_config_roundtrip():
    for make in FAMILIES:
        m = make(4)
        back = ModelSpec.from_config_text(m.to_config_text())
        assert back == m
        assert back.model_id == m.model_id
    shifted = ModelSpec.ou(3, 2.0, mean_shift=[1.0, -1.0, 0.5])
    assert ModelSpec.from_config(shifted.to_config()) == shifted


def test_config_errors():
    with pytest.raises(ConfigError):
        ModelSpec.ou(3, -1.0)
    with pytest.raises(ConfigError):
        ModelSpec.dyson(3, -2.0)
    with pytest.raises(ConfigError):
        ModelSpec.from_config({"family": "banana", "d": "3"})
    with pytest.raises(ConfigError):
        ModelSpec.from_config({"family": "ou"})
    with pytest.raises(ConfigError):
        ModelSpec.ou(3, mean_shift=[1.0, 2.0])


def test_dyson_domain():
    m = ModelSpec.dyson(3)
    check_domain(m, [2.0, 0.0, -1.0])
    with pytest.raises(DomainError):
        check_domain(m, [0.0, 2.0, -1.0])
    with pytest.raises(DomainError):
        check_domain(m, [1.0, 1.0, -1.0])
    assert potential_value(m, [0.0, 2.0, -1.0]) == math.inf
    with pytest.raises(DomainError):
        check_domain(ModelSpec.ou(2), [np.nan, 0.0])


def test_potential_values_by_hand():
    x = np.array([1.0, -0.5, 2.0])
    assert potential_value(ModelSpec.ou(3, 2.0), x) == pytest.approx(0.5 * 2.0 * (1 + 0.25 + 4))
    pairs = [(1.5, 1), (-1.0, 1), (-2.5, 1)]  # x1-x2, x1-x3, x2-x3
    quad = 0.5 * (1 + 0.25 + 4) + 0.3 * sum(u**2 for u, _ in pairs)
    assert potential_value(ModelSpec.quadratic_pair(3, 0.3), x) == pytest.approx(quad)
    quart = 0.5 * (1 + 0.25 + 4) + 0.3 * sum(u**4 for u, _ in pairs)
    assert potential_value(ModelSpec.quartic_pair(3, 0.3), x) == pytest.approx(quart)
    y = np.array([2.0, 1.0, -0.5])
    dys = 0.5 * (4 + 1 + 0.25) - 2.0 * (math.log(1.0) + math.log(2.5) + math.log(1.5))
    assert potential_value(ModelSpec.dyson(3, 2.0), y) == pytest.approx(dys)


@pytest.mark.parametrize("k", range(4))
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), d=st.integers(2, 7))
def test_gradient_matches_finite_differences(k, seed, d):
    model = FAMILIES[k](d)
    x = _point(model, seed)
    grad = grad_potential(model, x)
    h = 1e-6
    fd = np.array([(potential_value(model, x + h * e) - potential_value(model, x - h * e)) / (2 * h)
                   for e in np.eye(d)])
    assert np.max(np.abs(fd - grad)) <= 1e-6 * max(1.0, np.max(np.abs(grad)))


@pytest.mark.parametrize("k", range(4))
@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), d=st.integers(1, 8))
def test_curvature_lower_bound(k, seed, d):
    model = FAMILIES[k](d)
    x = _point(model, seed)
    v = np.random.default_rng(seed + 1).normal(size=d)
    assert hessian_quadratic_form(model, x, v) >= model.rho * float(v @ v) - 1e-12


def test_hessian_form_against_finite_differences():
    for make in FAMILIES:
        model = make(5)
        x = _point(model, 3)
        v = np.random.default_rng(4).normal(size=5)
        h = 1e-4
        fd = (grad_potential(model, x + h * v) - grad_potential(model, x - h * v)) @ v / (2 * h)
        assert hessian_quadratic_form(model, x, v) == pytest.approx(fd, rel=1e-6)


@pytest.mark.parametrize("k", range(4))
def test_eigenmap_orthonormal_and_eigenfunctions(k):
    model = FAMILIES[k](6)
    data = model.spectral()
    A = data.eigenmap.A
    assert np.max(np.abs(A @ A.T - data.lambda1 * np.eye(data.k1))) <= 1e-12
    assert data.lambda1 == model.rho
    assert data.k1 == (6 if k == 0 else 1)
    T = data.eigenmap
    for seed in range(20):
        x = _point(model, seed)
        for i in range(T.k):
            def f(y, i=i):
                return float(T(y)[i])

            assert abs(generator_apply(model, f, x) + model.rho * f(x)) <= 1e-5


def test_generator_on_nonlinear_function():
    # L |x|^2 = 2d - 2 rho |x|^2 for OU centred at 0
    model = ModelSpec.ou(3, 1.5)
    x = np.array([0.3, -0.7, 1.1])
    val = generator_apply(model, lambda y: float(y @ y), x)
    assert val == pytest.approx(2 * 3 - 2 * 1.5 * float(x @ x), rel=1e-5)


def test_exact_mean_quadratic_matches_minimiser():
    shift = [1.0, -2.0, 0.5, 0.0]
    model = ModelSpec.quadratic_pair(4, 0.7, 1.3, mean_shift=shift)
    res = optimize.minimize(lambda x: potential_value(model, x), np.zeros(4), jac=lambda x: grad_potential(model, x),
                            tol=1e-14)
    assert np.allclose(model.exact_mean(), res.x, atol=1e-7)
    # the diagonal coordinate keeps the mean of the well
    assert model.exact_mean().sum() == pytest.approx(sum(shift))
    assert ModelSpec.dyson(3).exact_mean() is None
    assert np.array_equal(ModelSpec.quartic_pair(3).exact_mean(), np.zeros(3))


def test_scaled_identity_matches_dense():
    b = np.array([0.5, -1.0, 2.0])
    T = ScaledIdentityMap(1.7, b)
    D = AffineMap(1.7 * np.eye(3), b)
    x = np.random.default_rng(0).normal(size=(5, 3))
    assert np.allclose(T(x), D(x))
    assert np.array_equal(T.A, D.A)
    assert np.allclose(T.rmatvec(b), D.rmatvec(b))
    assert np.array_equal(T.row(1), D.row(1))
    assert np.allclose(T.head(2)(x), D.head(2)(x))
    assert T.k == 3 and T.dim == 3
    # large-d OU does not build the matrix
    big = ModelSpec.ou(10**6).spectral().eigenmap
    assert isinstance(big, ScaledIdentityMap)
    assert big(np.ones(10**6))[0] == 1.0


def _brute_sup(data, pts):
    return data.k1 + max(float(np.sum(data.eigenmap(p) ** 2)) for p in pts)


def test_sup_lambda_sets():
    g = np.random.default_rng(5)
    for make in FAMILIES[:3]:
        model = make(3)
        data = model.spectral()
        c = g.normal(size=3)
        # ball: dense sampling of the sphere from below, closed form from above
        u = g.normal(size=(20000, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        ball = Ball(c, 0.8)
        val = sup_lambda(data, ball)
        assert _brute_sup(data, c + 0.8 * u) <= val + 1e-12
        assert _brute_sup(data, c + 0.8 * u) == pytest.approx(val, rel=1e-3)
        cube = Cube(c, 0.5)
        corners = [c + 0.5 * (2 * np.array(s) - 1) for s in np.ndindex(2, 2, 2)]
        assert sup_lambda(data, cube) == pytest.approx(_brute_sup(data, corners), rel=1e-12)
        pts = g.normal(size=(4, 3))
        assert sup_lambda(data, Finite(pts)) == pytest.approx(_brute_sup(data, pts), rel=1e-12)


def test_initial_set_errors():
    with pytest.raises(EmptySetError):
        Ball(np.zeros(2), -1.0)
    with pytest.raises(EmptySetError):
        Cube(np.zeros(2), np.inf)
    with pytest.raises(EmptySetError):
        Finite(np.zeros((0, 2)))
