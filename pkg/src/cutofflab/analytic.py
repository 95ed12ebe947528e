"""Closed-form Gaussian laws and distances for the OU case.

Every law produced by the OU dynamics, started from a point, is an isotropic
Gaussian ``N(m, v I_k)``; so are the images of any rigid model under its affine
eigenmap. All divergences below are exact for that class (TV up to quadrature).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import DegenerateError, DimensionMismatchError, QuadratureError
from .model import AffineMap

__all__ = [
    "IsotropicGaussianLaw",
    "dirac",
    "stationary_ou_law",
    "standard_gaussian",
    "ou_transition",
    "projected_ou_law",
    "gaussian_w2",
    "gaussian_kl",
    "gaussian_fisher",
    "gaussian_tv",
    "gaussian_chi_square",
    "l2_distance",
]


@dataclass(frozen=True, eq=False)
class IsotropicGaussianLaw:
    """``N(mean, variance * I_dim)``; ``variance == 0`` encodes a Dirac mass."""

    mean: np.ndarray
    variance: float

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float)).copy()
        mean.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", float(self.variance))
        if mean.ndim != 1 or mean.size < 1:
            raise DimensionMismatchError("mean must be a non-empty vector")
        if not (np.isfinite(self.variance) and self.variance >= 0):
            raise DegenerateError(f"variance must be finite and >= 0, got {self.variance}")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def is_dirac(self) -> bool:
        return self.variance == 0.0

    def __eq__(self, other):
        if not isinstance(other, IsotropicGaussianLaw):
            return NotImplemented
        return self.variance == other.variance and np.array_equal(self.mean, other.mean)

    def __repr__(self):
        return f"IsotropicGaussianLaw(dim={self.dim}, |mean|={np.linalg.norm(self.mean):.6g}, variance={self.variance:.6g})"


def dirac(x0) -> IsotropicGaussianLaw:
    return IsotropicGaussianLaw(x0, 0.0)


def stationary_ou_law(d: int, rho: float, center=None) -> IsotropicGaussianLaw:
    """Invariant law ``N(m, I/rho)`` of the OU process."""
    m = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    return IsotropicGaussianLaw(m, 1.0 / rho)


def standard_gaussian(k: int) -> IsotropicGaussianLaw:
    return IsotropicGaussianLaw(np.zeros(k), 1.0)


def ou_transition(x0, rho: float, t: float, center=None) -> IsotropicGaussianLaw:
    """Mehler law of ``X_t`` for ``dX = -rho (X - m) dt + sqrt(2) dB``, ``X_0 = x0``.

    Mean ``m + e^{-rho t}(x0 - m)``, variance ``(1 - e^{-2 rho t}) / rho``.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    if t < 0:
        raise ValueError("t must be >= 0")
    x0 = np.asarray(x0, dtype=float)
    m = np.zeros_like(x0) if center is None else np.asarray(center, dtype=float)
    return IsotropicGaussianLaw(m + math.exp(-rho * t) * (x0 - m), -math.expm1(-2.0 * rho * t) / rho)


def projected_ou_law(eigenmap: AffineMap, x0, rho: float, t: float) -> IsotropicGaussianLaw:
    """Law of ``T(X_t)``: a ``k1``-dimensional OU process run at speed ``rho``.

    Its invariant law is the standard Gaussian ``gamma_{k1}``.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    if t < 0:
        raise ValueError("t must be >= 0")
    z0 = eigenmap(x0)
    return IsotropicGaussianLaw(math.exp(-rho * t) * z0, -math.expm1(-2.0 * rho * t))


def _check_pair(g1: IsotropicGaussianLaw, g2: IsotropicGaussianLaw) -> None:
    if g1.dim != g2.dim:
        raise DimensionMismatchError(f"dimensions differ: {g1.dim} vs {g2.dim}")


def _series_x_minus_log1p(y: float) -> float:
    # y - log(1+y) = sum_{n>=2} (-1)^n y^n / n
    s, p = 0.0, y
    for n in range(2, 14):
        p *= y
        s += (-1) ** n * p / n
    return s


def gaussian_w2(g1: IsotropicGaussianLaw, g2: IsotropicGaussianLaw) -> float:
    """``W2`` between isotropic Gaussians (Dirac masses allowed)."""
    _check_pair(g1, g2)
    dm2 = float(np.sum((g1.mean - g2.mean) ** 2))
    s1, s2 = math.sqrt(g1.variance), math.sqrt(g2.variance)
    ds = 0.0 if s1 + s2 == 0 else (g1.variance - g2.variance) / (s1 + s2)
    return math.sqrt(dm2 + g1.dim * ds * ds)


def _require_density(*laws: IsotropicGaussianLaw) -> None:
    for g in laws:
        if g.is_dirac:
            raise DegenerateError("divergence undefined for a Dirac mass")


def gaussian_kl(nu: IsotropicGaussianLaw, mu: IsotropicGaussianLaw) -> float:
    """Relative entropy ``H(nu | mu)``."""
    _check_pair(nu, mu)
    _require_density(nu, mu)
    y = (nu.variance - mu.variance) / mu.variance
    dm2 = float(np.sum((nu.mean - mu.mean) ** 2))
    return 0.5 * nu.dim * _series_or_direct(y) + dm2 / (2.0 * mu.variance)


def _series_or_direct(y: float) -> float:
    """``y - log(1 + y)`` without cancellation for small ``y``."""
    return _series_x_minus_log1p(y) if abs(y) < 1e-3 else y - math.log1p(y)


def gaussian_fisher(nu: IsotropicGaussianLaw, mu: IsotropicGaussianLaw) -> float:
    """Relative Fisher information ``I(nu | mu) = E_nu |grad log(dnu/dmu)|^2``.

    The log-ratio gradient is affine, ``a x + c``, so the expectation is
    ``a^2 k v_nu + |a m_nu + c|^2``.
    """
    _check_pair(nu, mu)
    _require_density(nu, mu)
    a = 1.0 / mu.variance - 1.0 / nu.variance
    c = nu.mean / nu.variance - mu.mean / mu.variance
    r = a * nu.mean + c
    return a * a * nu.dim * nu.variance + float(r @ r)


def gaussian_chi_square(nu: IsotropicGaussianLaw, mu: IsotropicGaussianLaw) -> float:
    """``chi^2(nu | mu) = int (dnu/dmu)^2 dmu - 1``; ``inf`` when not integrable."""
    _check_pair(nu, mu)
    _require_density(nu, mu)
    v1, v2 = nu.variance, mu.variance
    if 2.0 * v2 - v1 <= 0:
        return math.inf
    y = (v1 - v2) / v2
    dm2 = float(np.sum((nu.mean - mu.mean) ** 2))
    log_one_plus = -0.5 * nu.dim * math.log1p(-y * y) + dm2 / (2.0 * v2 - v1)
    if log_one_plus > 700:
        return math.inf
    return math.expm1(log_one_plus)


def l2_distance(nu: IsotropicGaussianLaw, mu: IsotropicGaussianLaw) -> float:
    """``|| dnu/dmu - 1 ||_{L^2(mu)} = sqrt(chi^2)``."""
    return math.sqrt(gaussian_chi_square(nu, mu))


def _log_normal_pdf(s: float, mean: float, var: float) -> float:
    return -0.5 * math.log(2.0 * math.pi * var) - (s - mean) ** 2 / (2.0 * var)


def gaussian_tv(
    nu: IsotropicGaussianLaw,
    mu: IsotropicGaussianLaw,
    quadrature_points: int = 200,
    tol: float = 1e-8,
) -> float:
    """Total variation distance between isotropic Gaussians.

    Writing ``x - m_mu = s u + w`` with ``u`` along the mean difference, the
    likelihood ratio depends on ``(s, |w|^2)`` only, and for fixed ``s`` the
    region where it exceeds one is a half-line in ``|w|^2``. The ``|w|^2``
    integral is a chi-square tail, leaving a 1-d adaptive Gauss-Kronrod
    integral in ``s`` (``quadrature_points`` caps the number of subintervals).
    Equal variances use ``erf(|dm| / (2 sqrt(2 v)))`` directly.
    """
    _check_pair(nu, mu)
    v1, v2 = nu.variance, mu.variance
    delta = float(np.linalg.norm(nu.mean - mu.mean))
    if v1 == 0.0 or v2 == 0.0:
        if v1 == v2:
            return 0.0 if delta == 0.0 else 1.0
        return 1.0
    if v1 == v2:
        return math.erf(delta / (2.0 * math.sqrt(2.0 * v1)))

    k = nu.dim
    df = k - 1
    kap = 0.5 * (1.0 / v2 - 1.0 / v1)
    logratio = math.log(v1 / v2)

    def C(s):
        return -0.5 * k * logratio - (s - delta) ** 2 / (2.0 * v1) + s * s / (2.0 * v2)

    def integrand(s):
        p1 = math.exp(_log_normal_pdf(s, delta, v1))
        p2 = math.exp(_log_normal_pdf(s, 0.0, v2))
        c = C(s)
        if df == 0:
            return p1 - p2 if c > 0 else 0.0
        rstar = -c / kap
        if kap > 0:
            if rstar <= 0:
                q1, q2 = 1.0, 1.0
            else:
                q1, q2 = special.chdtrc(df, rstar / v1), special.chdtrc(df, rstar / v2)
        else:
            if rstar <= 0:
                return 0.0
            q1, q2 = special.chdtr(df, rstar / v1), special.chdtr(df, rstar / v2)
        return max(p1 * q1 - p2 * q2, 0.0)

    smax = math.sqrt(max(v1, v2))
    lo = min(0.0, delta) - 14.0 * smax
    hi = max(0.0, delta) + 14.0 * smax
    # breakpoints: both means and the s-values where the half-line threshold
    # crosses the bulk of either chi-square law
    points = {0.0, delta}
    offsets = [0.0] if df == 0 else [kap * df * v1, kap * df * v2]
    for off in offsets:
        a2, a1 = kap, delta / v1
        a0 = -0.5 * k * logratio - delta * delta / (2.0 * v1) + off
        disc = a1 * a1 - 4.0 * a2 * a0
        if disc >= 0 and a2 != 0:
            sq = math.sqrt(disc)
            for r in ((-a1 - sq) / (2 * a2), (-a1 + sq) / (2 * a2)):
                if lo < r < hi:
                    points.add(r)
    pts = sorted(p for p in points if lo < p < hi)
    val, err = integrate.quad(integrand, lo, hi, points=pts or None, limit=quadrature_points, epsabs=tol, epsrel=1e-10)
    if not np.isfinite(val) or err > 100 * tol:
        raise QuadratureError(f"TV quadrature did not reach tolerance (estimate {val}, error {err})")
    return float(min(max(val, 0.0), 1.0))
