import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cutofflab import bounds
from cutofflab.analytic import gaussian_fisher, gaussian_kl, gaussian_tv, gaussian_w2, ou_transition, stationary_ou_law
from cutofflab.bounds import POINCARE, Side
from cutofflab.errors import DomainError, NonpositiveTimeError, OrderingError
from cutofflab.model import Ball, Cube, Finite, ModelSpec


def test_cutoff_time():
    assert bounds.cutoff_time(100, 2.0) == pytest.approx(math.log(100) / 4)
    with pytest.raises(DomainError):
        bounds.cutoff_time(1, 1.0)
    with pytest.raises(DomainError):
        bounds.cutoff_time(10, 0.0)


@settings(max_examples=80, deadline=None)
@given(d=st.integers(2, 50), rho=st.floats(0.2, 5), r=st.floats(0, 5), t=st.floats(0, 4))
def test_ou_sandwich_with_exact_distance(d, rho, r, t):
    model = ModelSpec.ou(d, rho)
    data = model.spectral()
    ball = Ball(np.zeros(d), r)
    x0 = np.zeros(d)
    x0[0] = r
    exact = gaussian_w2(ou_transition(x0, rho, t), stationary_ou_law(d, rho))
    lo = bounds.w2_lower_mean_term(data, ball, t).value
    hi = bounds.w2_upper(model, ball, t).value
    assert lo <= exact * (1 + 1e-12) + 1e-12
    assert exact <= hi * (1 + 1e-12) + 1e-12
    # the displayed lower form equals the upper form for OU
    assert bounds.w2_lower_paper(data, ball, t).value == pytest.approx(hi, rel=1e-12)


def test_w2_upper_second_moment_routes():
    model = ModelSpec.quartic_pair(4, 0.5, 2.0)
    ball = Ball(np.zeros(4), 1.0)
    a = bounds.w2_upper(model, ball, 0.5)
    assert a.inputs["second_moment"] == "poincare"
    assert bounds.w2_upper(model, ball, 0.5, POINCARE).value == a.value
    g = bounds.w2_upper(model, ball, 0.5, 0.3)
    assert g.value == pytest.approx(math.exp(-1.0) * math.sqrt(1.0 + 0.3))
    with pytest.raises(ValueError):
        bounds.w2_upper(ModelSpec.dyson(3), Ball(np.zeros(3), 1.0), 1.0)
    with pytest.raises(NonpositiveTimeError):
        bounds.w2_upper(model, ball, -1.0)
    assert a.side is Side.UPPER and '"name": "w2_upper"' in a.to_json()


@settings(max_examples=80, deadline=None)
@given(d=st.integers(1, 40), rho=st.floats(0.2, 5), r=st.floats(0, 5), t=st.floats(0.01, 6))
def test_entropy_and_tv_bounds_dominate_exact(d, rho, r, t):
    x0 = np.zeros(d)
    x0[0] = r
    mu = stationary_ou_law(d, rho)
    nu = ou_transition(x0, rho, t)
    w0 = math.sqrt(r * r + d / rho)
    h = bounds.entropy_upper(t, w0, rho)
    assert gaussian_kl(nu, mu) <= h.value * (1 + 1e-9) + 1e-12
    assert gaussian_tv(nu, mu) <= bounds.tv_upper_from_entropy(h.value) + 1e-9
    assert h.value == min(h.inputs["routes"].values())
    if t > 1.0:
        i = bounds.fisher_upper_best(t, w0, rho)
        assert gaussian_fisher(nu, mu) <= i * (1 + 1e-9)


def test_entropy_routes():
    h = bounds.entropy_upper(0.5, 2.0, 1.0)
    assert "unit_time" not in h.inputs["routes"]
    h3 = bounds.entropy_upper(3.0, 2.0, 1.0)
    assert h3.inputs["routes"]["unit_time"] == pytest.approx(math.exp(-2.0) * 2.0)
    with pytest.raises(NonpositiveTimeError):
        bounds.entropy_upper(0.0, 1.0, 1.0)


def test_fisher_bounds():
    assert bounds.fisher_upper(2.0, 3.0, 1.0, 1.0) == pytest.approx(math.exp(-1.0) / 2)
    with pytest.raises(OrderingError):
        bounds.fisher_upper(3.0, 2.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        bounds.fisher_upper(0.5, 2.0, 1.0, 1.0)
    assert bounds.fisher_upper_best(0.9, 1.0, 1.0) == math.inf
    # optimum t0 = t1 - 1/rho beats its neighbours
    best = bounds.fisher_upper_best(5.0, 1.0, 2.0)
    for t0 in (4.0, 4.4, 4.6, 4.9):
        assert best <= bounds.fisher_upper(t0, 5.0, 1.0, 2.0) + 1e-15


def test_functional_constants():
    assert bounds.poincare_constant(4.0) == 0.25
    assert bounds.lsi_constant(4.0) == 0.5
    assert bounds.h_from_fisher_lsi(2.0, 4.0) == 0.25
    assert bounds.w2_from_h_talagrand(0.5, 4.0) == 0.5
    assert bounds.curvature_product(2.0, 3.0) == 6.0
    with pytest.raises(DomainError):
        bounds.curvature_product(-1.0, 1.0)
    with pytest.raises(DomainError):
        bounds.tv_upper_from_entropy(-1.0)


def test_witness_points():
    model = ModelSpec.quadratic_pair(4, 0.1)
    w = bounds.witness_points(model, Ball(np.zeros(4), 2.0))
    # the ball point furthest along the diagonal eigen-row
    far = max(w, key=lambda p: abs(model.spectral().eigenmap(p)[0]))
    assert np.allclose(far, np.full(4, 1.0))
    pts = np.array([[1.0, 0, 0, 0], [0, 2.0, 0, 0]])
    assert np.array_equal(bounds.witness_points(model, Finite(pts)), pts)
    assert len(bounds.witness_points(model, Cube(np.ones(4), 0.5))) >= 1


def test_mixing_time_analytic_ou():
    d, rho, eta = 50, 1.0, 0.25
    model = ModelSpec.ou(d, rho)
    ball = Ball(np.zeros(d), math.sqrt(d))
    rep = bounds.mixing_time_report(model, ball, eta)
    x0 = np.zeros(d)
    x0[0] = math.sqrt(d)
    mu = stationary_ou_law(d, rho)

    def tv(t):
        return gaussian_tv(ou_transition(x0, rho, t), mu)

    assert rep.side is Side.UPPER
    assert tv(rep.value) <= eta
    assert tv(rep.value - 1e-3) > eta
    assert bounds.mixing_time_tv(model, ball, eta) == rep.value
    with pytest.raises(DomainError):
        bounds.mixing_time_tv(model, ball, 1.5)


def test_mixing_time_monte_carlo_is_close():
    model = ModelSpec.ou(4, 1.0)
    ball = Ball(np.zeros(4), 2.0)
    t_mc = bounds.mixing_time_tv(model, ball, 0.3, "mc", n_particles=4000, dt=0.01, seed=1)
    t_an = bounds.mixing_time_tv(model, ball, 0.3)
    assert t_mc <= t_an + 0.1
    assert t_mc > 0.3 * t_an
