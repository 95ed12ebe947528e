"""Quantitative bounds and critical times for rigid Langevin models.

Conventions: ``lambda1 = rho`` (rigidity), the eigenmap ``T(x) = A x + b`` has
orthogonal rows of norm ``sqrt(lambda1)`` and pushes the invariant law to the
standard Gaussian ``gamma_{k1}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .analytic import gaussian_tv, ou_transition, projected_ou_law, standard_gaussian, stationary_ou_law
from .errors import ConvergenceError, DomainError, NonpositiveTimeError, OrderingError
from .model import Family, InitialSet, ModelSpec, SpectralData, check_domain, sup_lambda

__all__ = [
    "Side",
    "BoundReport",
    "PoincareBound",
    "POINCARE",
    "cutoff_time",
    "w2_upper",
    "w2_lower_paper",
    "w2_lower_mean_term",
    "sup_eigen_offset",
    "entropy_upper",
    "tv_upper_from_entropy",
    "fisher_upper",
    "fisher_upper_best",
    "h_from_fisher_lsi",
    "w2_from_h_talagrand",
    "poincare_constant",
    "lsi_constant",
    "mixing_time_tv",
    "mixing_time_report",
    "witness_points",
    "curvature_product",
]


class Side(str, Enum):
    LOWER = "Lower"
    UPPER = "Upper"


@dataclass(frozen=True)
class BoundReport:
    name: str
    value: float
    side: Side
    inputs: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "side", Side(self.side))
        if not math.isfinite(self.value):
            raise ValueError(f"bound {self.name} is not finite: {self.value}")

    def __float__(self):
        return float(self.value)

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "side": self.side.value, "inputs": self.inputs}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=_jsonable)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return str(v)


class PoincareBound:
    """Marker: bound the variance of the invariant law by ``d / lambda1``."""

    def __repr__(self):
        return "POINCARE"


POINCARE = PoincareBound()


def _check_t(t: float) -> None:
    if not t >= 0:
        raise NonpositiveTimeError(f"time must be >= 0, got {t}")


def cutoff_time(d: int, lambda1: float) -> float:
    """Critical time ``log(d) / (2 lambda1)``."""
    if d < 2:
        raise DomainError("cutoff time needs d >= 2")
    if not lambda1 > 0:
        raise DomainError("lambda1 must be positive")
    return math.log(d) / (2.0 * lambda1)


def _inputs(data: SpectralData, s: InitialSet, t: float, **extra) -> dict:
    return {"d": data.eigenmap.dim, "lambda1": data.lambda1, "k1": data.k1, "t": t, "set": s.descriptor(), **extra}


def w2_upper(model: ModelSpec, initial_set: InitialSet, t: float, second_moment=None, center=None) -> BoundReport:
    """``e^{-lambda1 t} sqrt(sup_{x0 in S} |x0 - m|^2 + M)`` with ``m`` the invariant mean.

    ``M`` is the total variance of the invariant law: ``None`` picks the exact
    ``d/rho`` for OU and the Poincare bound ``d/lambda1`` otherwise; a float is
    used as given. ``center`` defaults to :meth:`ModelSpec.exact_mean`; models
    without a closed-form mean (Dyson) need an explicit one, e.g. from
    :func:`cutofflab.sde.estimate_mean`.
    """
    _check_t(t)
    data = model.spectral()
    lam, d = data.lambda1, model.d
    if second_moment is None:
        M, route = (d / model.rho, "exact") if model.family is Family.OU else (d / lam, "poincare")
    elif isinstance(second_moment, PoincareBound):
        M, route = d / lam, "poincare"
    else:
        M, route = float(second_moment), "given"
    m = model.exact_mean() if center is None else np.asarray(center, dtype=float)
    if m is None:
        raise ValueError(f"no closed-form invariant mean for {model.label}; pass center=")
    value = math.exp(-lam * t) * math.sqrt(initial_set.sup_sq_distance(m) + M)
    return BoundReport("w2_upper", value, Side.UPPER, _inputs(data, initial_set, t, rho=model.rho, second_moment=route))


def w2_lower_paper(data: SpectralData, initial_set: InitialSet, t: float) -> BoundReport:
    """``e^{-lambda1 t} / sqrt(lambda1) * sqrt(sup_S (k1 + |T(x0)|^2))``, kept as displayed.

    The ``k1`` term overstates the covariance cost at ``t > 0``; for OU this
    expression coincides with :func:`w2_upper`, so it can exceed the exact
    distance. It is reported, never asserted.
    """
    _check_t(t)
    lam = data.lambda1
    value = math.exp(-lam * t) / math.sqrt(lam) * math.sqrt(sup_lambda(data, initial_set))
    return BoundReport("w2_lower_paper", value, Side.LOWER, _inputs(data, initial_set, t))


def sup_eigen_offset(data: SpectralData, initial_set: InitialSet) -> float:
    """``sup_{x0 in S} |A x0 + b|``."""
    return math.sqrt(max(sup_lambda(data, initial_set) - data.k1, 0.0))


def w2_lower_mean_term(data: SpectralData, initial_set: InitialSet, t: float) -> BoundReport:
    """``e^{-lambda1 t} / sqrt(lambda1) * sup_S |T(x0)|``.

    ``T`` is ``sqrt(lambda1)``-Lipschitz and ``T(X_t)`` has mean
    ``e^{-lambda1 t} T(x0)`` while ``T(mu)`` is centred, so this never
    exceeds the true distance.
    """
    _check_t(t)
    lam = data.lambda1
    value = math.exp(-lam * t) / math.sqrt(lam) * sup_eigen_offset(data, initial_set)
    return BoundReport("w2_lower_mean_term", value, Side.LOWER, _inputs(data, initial_set, t))


def entropy_upper(t: float, w2_at_zero: float, rho: float) -> BoundReport:
    """Upper bound on ``H(X_t | mu)`` from ``W = W2(delta_{x0}, mu)``.

    Minimum of ``W^2/(2t)``, ``e^{-rho(t-1)} W^2/2`` (``t >= 1``) and
    ``inf_{t0 in (0,t]} rho e^{-2 rho t0}/(1-e^{-2 rho t0}) W^2 e^{-rho(t-t0)}``.
    The last infimum is attained at ``t0 = t`` since ``e^{rho t0}/(e^{2 rho t0}-1)``
    decreases in ``t0``.
    """
    if not t > 0:
        raise NonpositiveTimeError(f"entropy_upper needs t > 0, got {t}")
    w2sq = float(w2_at_zero) ** 2
    routes = {"small_time": w2sq / (2.0 * t), "regularized": rho * w2sq / math.expm1(2.0 * rho * t)}
    if t >= 1:
        routes["unit_time"] = math.exp(-rho * (t - 1.0)) * w2sq / 2.0
    best = min(routes, key=routes.get)
    return BoundReport("entropy_upper", routes[best], Side.UPPER, {"t": t, "w2_at_zero": w2_at_zero, "rho": rho,
                                                                    "route": best, "routes": routes})


def tv_upper_from_entropy(h: float) -> float:
    """Pinsker: ``TV <= min(1, sqrt(2 H))``."""
    if h < 0:
        raise DomainError("entropy must be >= 0")
    return min(1.0, math.sqrt(2.0 * h))


def fisher_upper(t0: float, t1: float, w2: float, rho: float) -> float:
    """``I(X_{t1} | mu) <= e^{-rho(t0-1)} / (2 (t1 - t0)) * W^2`` for ``1 < t0 < t1``."""
    if t0 >= t1:
        raise OrderingError(f"need t0 < t1, got t0={t0}, t1={t1}")
    if t0 <= 1:
        raise DomainError(f"need t0 > 1, got {t0}")
    return _fisher_formula(t0, t1, w2, rho)


def _fisher_formula(t0, t1, w2, rho):
    return math.exp(-rho * (t0 - 1.0)) / (2.0 * (t1 - t0)) * w2 * w2


def fisher_upper_best(t1: float, w2: float, rho: float) -> float:
    """Tightest :func:`fisher_upper` over ``t0``.

    The optimum is ``t0 = t1 - 1/rho``; when that falls at or below ``1`` the
    infimum over the open range is the ``t0 -> 1`` limit. ``inf`` for ``t1 <= 1``.
    """
    if t1 <= 1:
        return math.inf
    return _fisher_formula(max(t1 - 1.0 / rho, 1.0), t1, w2, rho)


def h_from_fisher_lsi(i: float, rho: float) -> float:
    """Log-Sobolev: ``H <= I / (2 rho)``."""
    return i / (2.0 * rho)


def w2_from_h_talagrand(h: float, rho: float) -> float:
    """Talagrand: ``W2 <= sqrt(2 H / rho)``."""
    if h < 0:
        raise DomainError("entropy must be >= 0")
    return math.sqrt(2.0 * h / rho)


def poincare_constant(rho: float) -> float:
    """Best ``C`` in ``Var_mu(f) <= C E_mu |grad f|^2``: ``1/rho``."""
    return 1.0 / rho


def lsi_constant(rho: float) -> float:
    """Best ``C`` in ``Ent_mu(f^2) <= C E_mu |grad f|^2``: ``2/rho``, twice the Poincare constant."""
    return 2.0 / rho


def curvature_product(kappa: float, t0: float) -> float:
    """Product-condition diagnostic ``kappa * t0``."""
    if not (kappa > 0 and t0 > 0):
        raise DomainError("kappa and t0 must be positive")
    return kappa * t0


# mixing time ------------------------------------------------------------------

def witness_points(model: ModelSpec, initial_set: InitialSet) -> np.ndarray:
    """Finite subset of ``S`` standing in for the supremum over ``S``.

    Balls and cubes: the boundary point pushed furthest by the eigenmap (along
    ``A^T T(center)``, or the first eigen-row when the center maps to 0) plus
    the center. Finite sets are used whole.
    """
    T = model.spectral().eigenmap
    center = getattr(initial_set, "center", None)
    if center is None:
        return initial_set.witnesses(None)
    direction = T.rmatvec(T(center))
    if not np.any(direction):
        direction = T.row(0)
    return initial_set.witnesses(direction)


def _tv_analytic(model: ModelSpec, x0: np.ndarray, t: float) -> float:
    if model.family is Family.OU:
        m = model.shift()
        return gaussian_tv(ou_transition(x0, model.rho, t, center=m), stationary_ou_law(model.d, model.rho, m))
    T = model.spectral().eigenmap
    return gaussian_tv(projected_ou_law(T, x0, model.rho, t), standard_gaussian(T.k))


def _bisect(f, eta, t_scale, tol, t_cap):
    lo, hi = 0.0, t_scale
    while f(hi) > eta:
        lo, hi = hi, 2.0 * hi
        if hi > t_cap:
            raise ConvergenceError(f"TV still above eta={eta} at t={t_cap}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > eta:
            lo = mid
        else:
            hi = mid
    return hi


def mixing_time_tv(model: ModelSpec, initial_set: InitialSet, eta: float, mode: str = "analytic", *,
                   n_particles: int = 4000, dt: float | None = None, seed: int = 0, threads: int | None = None) -> float:
    """First time the worst witness TV distance to equilibrium drops to ``eta``.

    ``analytic``: exact Mehler TV for OU (the result is the right end of the
    final bisection bracket, so it upper-bounds the true time within
    ``1e-3/rho``); for interacting models the projected Gaussian TV is used,
    which is a lower bound on TV and hence on the mixing time.
    ``montecarlo``: histogram TV of the simulated projected statistic, again a
    lower bound. See :func:`mixing_time_report` for the side.
    """
    return mixing_time_report(model, initial_set, eta, mode, n_particles=n_particles, dt=dt, seed=seed, threads=threads).value


def mixing_time_report(model: ModelSpec, initial_set: InitialSet, eta: float, mode: str = "analytic", *,
                       n_particles: int = 4000, dt: float | None = None, seed: int = 0,
                       threads: int | None = None) -> BoundReport:
    if not 0 < eta < 1:
        raise DomainError("eta must lie in (0, 1)")
    mode = str(mode).lower().replace("_", "").replace("-", "")
    rho = model.rho
    tol = 1e-3 / rho
    t_star = cutoff_time(model.d, rho) if model.d >= 2 else 1.0 / rho
    t_cap = 100.0 * max(t_star, 1.0 / rho)
    pts = witness_points(model, initial_set)
    if mode == "analytic":
        def worst(t):
            return max(_tv_analytic(model, x0, t) for x0 in pts)

        value = _bisect(worst, eta, t_star, tol, t_cap)
        side = Side.UPPER if model.family is Family.OU else Side.LOWER
    elif mode in ("montecarlo", "mc"):
        value = _mixing_time_mc(model, pts, eta, tol, t_star, t_cap, n_particles, dt, seed, threads)
        side = Side.LOWER
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return BoundReport("mixing_time_tv", value, side, {"d": model.d, "rho": rho, "eta": eta, "mode": mode,
                                                        "set": initial_set.descriptor()})


def _mixing_time_mc(model, pts, eta, tol, t_star, t_cap, n, dt, seed, threads):
    # imported here: sde/distance pull in numba kernels that analytic users do not need
    from .distance import tv_1d
    from .sde import SimConfig, simulate_path

    T = model.spectral().eigenmap
    dt = 1e-3 / model.rho if dt is None else dt
    cfg = SimConfig(dt=dt, n_particles=n, seed=seed)

    def tv_of(ens):
        z = T(ens.samples)[:, 0]
        return tv_1d(z, standard_gaussian(1), n_boot=0).value

    for x0 in pts:
        check_domain(model, x0)
    best = 0.0
    for x0 in pts:
        coarse = max(t_star / 20.0, tol)
        t_hi = None
        t = 0.0
        while t_hi is None:
            grid = [t + coarse * (j + 1) for j in range(20)]
            vals = simulate_path(model, x0, cfg, grid, threads, observe=tv_of)
            for g, v in zip(grid, vals):
                if v <= eta:
                    t_hi = g
                    break
            t = grid[-1]
            if t_hi is None and t > t_cap:
                raise ConvergenceError(f"Monte-Carlo TV still above eta={eta} at t={t}")
        lo = max(t_hi - coarse, 0.0)
        k = max(1, math.ceil((t_hi - lo) / tol))
        fine = [lo + (t_hi - lo) * (j + 1) / k for j in range(k)]
        vals = simulate_path(model, x0, cfg, fine, threads, observe=tv_of)
        hit = next((g for g, v in zip(fine, vals) if v <= eta), t_hi)
        best = max(best, hit)
    return best
