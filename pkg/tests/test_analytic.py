import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cutofflab.analytic import (
    IsotropicGaussianLaw,
    dirac,
    gaussian_chi_square,
    gaussian_fisher,
    gaussian_kl,
    gaussian_tv,
    gaussian_w2,
    l2_distance,
    ou_transition,
    projected_ou_law,
    standard_gaussian,
    stationary_ou_law,
)
from cutofflab.errors import DegenerateError, DimensionMismatchError
from cutofflab.model import ModelSpec

# reference values from tests/oracles/generate.py (noncentral chi-square TV,
# full-covariance KL / Bures W2, coordinate-wise quadrature for chi^2 and Fisher)
ORACLE = {
    "d3": (([0.3, -1.2, 2.0], 0.7, [0.0, 0.5, 1.0], 1.3),
           dict(tv=0.7137314429702851, kl=1.7670203510708733, w2=2.0630959239691995, chi2=10.635505265534363,
                fisher=3.2679628064243453)),
    "d1": (([1.5], 2.5, [0.0], 1.0),
           dict(tv=0.4663000636202555, kl=1.4168546340629224, w2=1.6086399037173051, chi2=math.inf,
                fisher=3.150000000000001)),
    "d5": (([0.0] * 5, 0.6, [0.0] * 5, 1.0),
           dict(tv=0.3034575564171754, kl=0.2770640594149767, w2=0.5040171699309126, chi2=0.5463285872731896,
                fisher=1.3333333333333341)),
}

# TV of the worst-case OU start at (1 +- 0.2) t*, rho = 1, c = 1 (same oracle)
CUTOFF_TV = {
    (100, -0.2): 0.5777461381186567, (100, 0.2): 0.24807831224877042,
    (1000, -0.2): 0.6825060144000065, (1000, 0.2): 0.19789601562615522,
    (10000, -0.2): 0.7910071188319069, (10000, 0.2): 0.15778040567716234,
}


@pytest.mark.parametrize("name", sorted(ORACLE))
def test_closed_forms_against_oracles(name):
    (m1, v1, m2, v2), ref = ORACLE[name]
    nu, mu = IsotropicGaussianLaw(m1, v1), IsotropicGaussianLaw(m2, v2)
    assert gaussian_tv(nu, mu) == pytest.approx(ref["tv"], abs=1e-8)
    assert gaussian_kl(nu, mu) == pytest.approx(ref["kl"], rel=1e-12)
    assert gaussian_w2(nu, mu) == pytest.approx(ref["w2"], rel=1e-12)
    assert gaussian_fisher(nu, mu) == pytest.approx(ref["fisher"], rel=1e-12)
    assert gaussian_chi_square(nu, mu) == pytest.approx(ref["chi2"], rel=1e-10)


@pytest.mark.parametrize("cell", sorted(CUTOFF_TV))
def test_cutoff_tv_cells(cell):
    d, eps = cell
    t = (1 + eps) * math.log(d) / 2
    x0 = np.zeros(d)
    x0[0] = math.sqrt(d)
    nu = ou_transition(x0, 1.0, t)
    assert gaussian_tv(nu, stationary_ou_law(d, 1.0)) == pytest.approx(CUTOFF_TV[cell], abs=1e-8)


def test_mehler_law():
    x0 = np.array([1.0, -2.0])
    m = np.array([0.5, 0.5])
    law = ou_transition(x0, 2.0, 0.3, center=m)
    assert np.allclose(law.mean, m + math.exp(-0.6) * (x0 - m))
    assert law.variance == pytest.approx((1 - math.exp(-1.2)) / 2.0)
    assert ou_transition(x0, 2.0, 0.0).is_dirac
    far = ou_transition(x0, 2.0, 50.0, center=m)
    assert far == IsotropicGaussianLaw(m, 0.5) or np.allclose(far.mean, m)


def test_projected_law_matches_mehler_for_ou():
    model = ModelSpec.ou(3, 2.0, mean_shift=[1.0, 0.0, -1.0])
    T = model.spectral().eigenmap
    x0 = np.array([2.0, 1.0, 0.0])
    p = projected_ou_law(T, x0, 2.0, 0.4)
    q = ou_transition(x0, 2.0, 0.4, center=model.shift())
    # T is affine so T(X_t) ~ N(T(mean), rho * var)
    assert np.allclose(p.mean, T(q.mean))
    assert p.variance == pytest.approx(2.0 * q.variance)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), s=st.floats(0, 3), t=st.floats(0, 3), rho=st.floats(0.1, 5))
def test_semigroup(seed, s, t, rho):
    x0 = np.random.default_rng(seed).normal(size=4)
    a = ou_transition(x0, rho, s + t)
    mid = ou_transition(x0, rho, s)
    b = ou_transition(mid.mean, rho, t)
    assert np.allclose(a.mean, b.mean, rtol=1e-12, atol=1e-14)
    assert a.variance == pytest.approx(math.exp(-2 * rho * t) * mid.variance + b.variance, rel=1e-12, abs=1e-15)


def _laws(seed):
    g = np.random.default_rng(seed)
    d = int(g.integers(1, 30))
    rho = float(np.exp(g.uniform(-1.5, 1.5)))
    mu = stationary_ou_law(d, rho)
    nu = IsotropicGaussianLaw(g.normal(size=d) * g.uniform(0, 2) / math.sqrt(rho), float(np.exp(g.uniform(-1.5, 1.5))) / rho)
    return rho, nu, mu


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 10**7))
def test_functional_inequalities(seed):
    rho, nu, mu = _laws(seed)
    kl = gaussian_kl(nu, mu)
    tv = gaussian_tv(nu, mu)
    assert 0 <= tv <= 1
    assert tv**2 <= 2 * kl + 1e-10
    assert tv**2 <= kl / 2 + 1e-9  # sharp Pinsker
    assert gaussian_w2(nu, mu) ** 2 <= 2 / rho * kl + 1e-10
    assert kl <= gaussian_fisher(nu, mu) / (2 * rho) + 1e-10
    chi = gaussian_chi_square(nu, mu)
    assert math.log1p(chi) >= kl - 1e-10  # KL <= log(1 + chi^2)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**7))
def test_zero_iff_equal(seed):
    rho, nu, mu = _laws(seed)
    for f in (gaussian_w2, gaussian_tv, gaussian_kl, gaussian_fisher, gaussian_chi_square):
        assert f(mu, mu) == 0.0
        assert f(nu, nu) == 0.0
        assert f(nu, mu) > 0


def test_tv_special_cases():
    a = IsotropicGaussianLaw([0.0, 0.0], 1.0)
    b = IsotropicGaussianLaw([1.0, 0.0], 1.0)
    assert gaussian_tv(a, b) == pytest.approx(math.erf(1 / (2 * math.sqrt(2))))
    assert gaussian_tv(dirac([0.0, 0.0]), a) == 1.0
    assert gaussian_tv(dirac([0.0, 1.0]), dirac([0.0, 1.0])) == 0.0
    # symmetric in its arguments
    c = IsotropicGaussianLaw([0.3, -0.2], 2.2)
    assert gaussian_tv(a, c) == pytest.approx(gaussian_tv(c, a), abs=1e-8)


def test_small_variance_ratio_keeps_precision():
    # y = v1/v2 - 1 tiny: the series branch must agree with a high-precision value
    mu = standard_gaussian(1000)
    nu = IsotropicGaussianLaw(np.zeros(1000), 1.0 + 1e-9)
    assert gaussian_kl(nu, mu) == pytest.approx(0.5 * 1000 * (1e-9) ** 2 / 2, rel=1e-6)


def test_chi_square_threshold_and_l2():
    mu = standard_gaussian(2)
    assert gaussian_chi_square(IsotropicGaussianLaw([0.0, 0.0], 2.0), mu) == math.inf
    assert math.isfinite(gaussian_chi_square(IsotropicGaussianLaw([0.0, 0.0], 1.99), mu))
    nu = IsotropicGaussianLaw([0.4, 0.0], 0.5)
    assert l2_distance(nu, mu) == pytest.approx(math.sqrt(gaussian_chi_square(nu, mu)))


def test_w2_with_dirac():
    mu = stationary_ou_law(4, 2.0)
    x0 = np.array([1.0, 0.0, 0.0, 0.0])
    assert gaussian_w2(dirac(x0), mu) == pytest.approx(math.sqrt(1.0 + 4 / 2.0))


def test_errors():
    with pytest.raises(DimensionMismatchError):
        gaussian_w2(standard_gaussian(2), standard_gaussian(3))
    with pytest.raises(DegenerateError):
        gaussian_kl(dirac([0.0]), standard_gaussian(1))
    with pytest.raises(DegenerateError):
        IsotropicGaussianLaw([0.0], -1.0)
    with pytest.raises(ValueError):
        ou_transition([0.0], 1.0, -1.0)
