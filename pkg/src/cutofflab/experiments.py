"""Dimension sweeps, bound sandwiches and factorization checks.

Every experiment returns a :class:`Table` (or its subclass
:class:`CutoffProfile`) that writes deterministic CSV: floats in round-trip
``repr``, ``inf``/``nan`` spelled out, rows in a fixed order.

Temperature. The process ``dY = -grad V dt + sqrt(2 s2) dB`` is the
``s2``-accelerated process of ``V / s2``. Sweeps with ``temperature=s2``
simulate exactly that (potential ``V / s2``, clock ``s2 t``, ball radius
``c sqrt(d s2)``) and report distances for the carre du champ
``s2 |grad|^2``: ``W2`` in units of ``sqrt(s2)``, Fisher information times
``s2``. Quadratic-type potentials give the same values as ``s2 = 1``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .analytic import (
    gaussian_chi_square,
    gaussian_fisher,
    gaussian_kl,
    gaussian_tv,
    gaussian_w2,
    ou_transition,
    projected_ou_law,
    standard_gaussian,
    stationary_ou_law,
)
from .bounds import (
    cutoff_time,
    entropy_upper,
    fisher_upper_best,
    tv_upper_from_entropy,
    w2_lower_mean_term,
    w2_lower_paper,
    w2_upper,
)
from .distance import DistanceKind, ks_statistic, projected_divergence
from .errors import ConfigError, DomainError, InsufficientSamplesError
from .model import AffineMap, Ball, Family, Finite, ModelSpec
from .sde import SimConfig, estimate_mean, sample_stationary, simulate_path

__all__ = [
    "Mode",
    "Table",
    "ProfileRow",
    "CutoffProfile",
    "FactorizationReport",
    "build_model",
    "parse_kinds",
    "cutoff_sweep",
    "bound_sandwich_report",
    "factorization_check",
    "l2_profile_ou",
    "profile_svg",
    "MC_MAX_DIM",
    "MC_MAX_PARTICLES",
]

MC_MAX_DIM = 128
MC_MAX_PARTICLES = 100_000

_KIND_ORDER = (DistanceKind.W2, DistanceKind.TV, DistanceKind.KL, DistanceKind.FISHER, DistanceKind.CHI_SQUARE)
_KIND_ALIASES = {
    "w2": DistanceKind.W2, "wasserstein": DistanceKind.W2,
    "tv": DistanceKind.TV,
    "kl": DistanceKind.KL, "h": DistanceKind.KL, "entropy": DistanceKind.KL,
    "fisher": DistanceKind.FISHER, "i": DistanceKind.FISHER,
    "chi2": DistanceKind.CHI_SQUARE, "chisquare": DistanceKind.CHI_SQUARE,
}


class Mode(str, Enum):
    ANALYTIC = "Analytic"
    MONTE_CARLO = "MonteCarlo"

    @classmethod
    def parse(cls, value) -> "Mode":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("-", "").replace("_", "")
        if key in ("analytic", "exact"):
            return cls.ANALYTIC
        if key in ("mc", "montecarlo"):
            return cls.MONTE_CARLO
        raise ConfigError(f"unknown mode {value!r}")


def parse_kinds(kinds) -> list[DistanceKind]:
    """Normalise kind names (``w2, tv, kl/h, fisher/i, chi2``), deduplicated, canonical order."""
    if isinstance(kinds, (str, DistanceKind)):
        kinds = [kinds]
    out = set()
    for k in kinds:
        if isinstance(k, DistanceKind):
            out.add(k)
            continue
        key = str(k).strip().lower().replace("_", "").replace("-", "")
        if key not in _KIND_ALIASES:
            raise ConfigError(f"unknown distance kind {k!r}")
        out.add(_KIND_ALIASES[key])
    if not out:
        raise ConfigError("no distance kinds given")
    return [k for k in _KIND_ORDER if k in out]


def build_model(family: str, d: int, rho: float = 1.0, beta: float = 2.0, gamma: float = 1.0,
                mean_shift=None) -> ModelSpec:
    """Model from a CLI-style family name: ``ou``, ``quadratic``, ``quartic`` or ``dyson``."""
    key = str(family).strip().lower()
    if key == "ou":
        return ModelSpec.ou(d, rho, mean_shift)
    if key in ("quadratic", "quadraticpair"):
        return ModelSpec.quadratic_pair(d, gamma, rho, mean_shift)
    if key in ("quartic", "quarticpair"):
        return ModelSpec.quartic_pair(d, gamma, rho, mean_shift)
    if key in ("dyson", "dysonou"):
        return ModelSpec.dyson(d, beta, rho, mean_shift)
    raise ConfigError(f"unknown family {family!r}")


def _rescaled(model: ModelSpec, s2: float) -> ModelSpec:
    """Potential ``V / s2`` (same center)."""
    if s2 == 1.0:
        return model
    pot = model.potential
    m = pot.mean_shift
    if model.family is Family.OU:
        return ModelSpec.ou(model.d, pot.rho / s2, m)
    return ModelSpec.pairwise(pot.pair_kind, model.d, pot.rho / s2, pot.coupling / s2, m)


# tables -------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, Enum):
        return str(v.value)
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


@dataclass
class Table:
    """Column names plus rows of plain values."""

    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> list:
        j = self.columns.index(name)
        return [r[j] for r in self.rows]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(v) for v in r])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


@dataclass(frozen=True)
class ProfileRow:
    d: int
    epsilon: float
    t: float
    kind: DistanceKind
    value: float
    lower: float
    upper: float
    mode: Mode
    ci: float = 0.0

    def astuple(self) -> tuple:
        return (self.d, self.epsilon, self.t, self.kind, self.value, self.lower, self.upper, self.mode, self.ci)


PROFILE_COLUMNS = ("d", "epsilon", "t", "kind", "value", "lower", "upper", "mode", "ci")


class CutoffProfile(Table):
    """Sweep output; ``ci`` is the Monte-Carlo bootstrap half-width (0 for analytic rows)."""

    def __init__(self, rows: Iterable[ProfileRow] = ()):
        self.profile_rows = list(rows)
        super().__init__(PROFILE_COLUMNS, [r.astuple() for r in self.profile_rows])

    def series(self, kind, epsilon: float) -> tuple[np.ndarray, np.ndarray]:
        """``(dims, values)`` for one kind and one signed epsilon."""
        kind = parse_kinds([kind])[0]
        sel = [r for r in self.profile_rows if r.kind is kind and r.epsilon == epsilon]
        return np.array([r.d for r in sel]), np.array([r.value for r in sel])

    def get(self, d: int, epsilon: float, kind) -> ProfileRow:
        kind = parse_kinds([kind])[0]
        for r in self.profile_rows:
            if r.d == d and r.epsilon == epsilon and r.kind is kind:
                return r
        raise KeyError((d, epsilon, kind))


# cutoff sweeps --------------------------------------------------------------------

def _expand_eps(epsilons) -> list[float]:
    eps = sorted({float(e) for e in np.atleast_1d(epsilons)})
    for e in eps:
        if not -1.0 < e:
            raise ConfigError(f"epsilon must exceed -1, got {e}")
    return eps


def _line_law(T: AffineMap, x0, rho: float, t: float):
    # first eigen-row only: exact 1-d projected law, against N(0, 1)
    return projected_ou_law(T.head(1), x0, rho, t)


def _bounds_for(kind, model, ball, x0, t, w2_zero, data, scale):
    """(lower, upper) for one cell, in the user-facing units of ``scale = s2``."""
    rho = model.rho
    proj = _line_law(data.eigenmap, x0, rho, t)
    gamma1 = standard_gaussian(1)
    if kind is DistanceKind.W2:
        lo = w2_lower_mean_term(data, ball, t).value / math.sqrt(scale)
        up = w2_upper(model, ball, t, center=ball.center).value / math.sqrt(scale)
        return lo, up
    if t == 0:
        return 0.0, math.inf
    h_up = entropy_upper(t, w2_zero, rho).value
    if kind is DistanceKind.TV:
        return gaussian_tv(proj, gamma1), tv_upper_from_entropy(h_up)
    if kind is DistanceKind.KL:
        return gaussian_kl(proj, gamma1), h_up
    if kind is DistanceKind.FISHER:
        # log-Sobolev: I >= 2 rho H >= 2 rho H(projection)
        return 2.0 * rho * gaussian_kl(proj, gamma1) * scale, fisher_upper_best(t, w2_zero, rho) * scale
    if kind is DistanceKind.CHI_SQUARE:
        return gaussian_chi_square(proj, gamma1), math.inf
    raise ValueError(kind)


def _analytic_value(kind, model, x0, t, scale):
    nu = ou_transition(x0, model.rho, t, center=model.shift())
    mu = stationary_ou_law(model.d, model.rho, model.shift())
    if kind is DistanceKind.W2:
        return gaussian_w2(nu, mu) / math.sqrt(scale)
    if nu.is_dirac:
        return {DistanceKind.TV: 1.0}.get(kind, math.inf)
    if kind is DistanceKind.TV:
        return gaussian_tv(nu, mu)
    if kind is DistanceKind.KL:
        return gaussian_kl(nu, mu)
    if kind is DistanceKind.FISHER:
        return gaussian_fisher(nu, mu) * scale
    return gaussian_chi_square(nu, mu)


def _mc_observer(kinds, model, seed, level, scale):
    T = model.spectral().eigenmap
    ref = standard_gaussian(T.k)
    lam = model.spectral().lambda1

    def observe(ens):
        out = {}
        for kind in kinds:
            if kind is DistanceKind.W2:
                r = projected_divergence(ens, T, ref, "W2", seed=seed, level=level)
                # T is sqrt(lambda1)-Lipschitz
                out[kind] = (r.value / math.sqrt(lam * scale), r.ci_half_width / math.sqrt(lam * scale))
            elif kind is DistanceKind.TV:
                r = projected_divergence(ens, T, ref, "TV", seed=seed, level=level)
                out[kind] = (r.value, r.ci_half_width)
            elif kind in (DistanceKind.KL, DistanceKind.FISHER):
                r = out.get("kl") or projected_divergence(ens, T, ref, "KL", seed=seed, level=level)
                out["kl"] = r
                if kind is DistanceKind.KL:
                    out[kind] = (r.value, r.ci_half_width)
                else:
                    f = 2.0 * model.rho * scale
                    out[kind] = (f * r.value, f * r.ci_half_width)
            else:
                raise ConfigError(f"{kind.value} has no Monte-Carlo estimator")
        return out

    return observe


def cutoff_sweep(family, rho: float = 1.0, c: float = 1.0, dims: Sequence[int] = (100,), epsilons=(0.2,),
                 kinds=("W2",), mode="analytic", *, beta: float = 2.0, gamma: float = 1.0, temperature: float = 1.0,
                 n_particles: int = 10_000, dt: float | None = None, seed: int = 0, level: float = 0.99,
                 threads: int | None = None, max_dim: int = MC_MAX_DIM) -> CutoffProfile:
    """Distances to equilibrium at ``t = (1 + eps) log(d) / (2 rho)`` across dimensions.

    The start is ``x0 = m + c sqrt(d) u`` on the boundary of the ball of radius
    ``c sqrt(d)`` about the invariant mean ``m``, with ``u`` the first
    eigen-direction. ``epsilons`` are used as given (sorted, deduplicated); the
    CLI expands ``0.2`` to ``(-0.2, 0.2)``.

    Analytic (OU only): closed-form Mehler distances. MonteCarlo: ``n_particles``
    trajectories through the eigenmap; values are projected estimates, which
    are lower bounds on the full-space distance. Fisher comes from the
    log-Sobolev inequality applied to the projected KL estimate. The ``lower``
    and ``upper`` columns come from :mod:`cutofflab.bounds` and the exact
    projected law. Rows are ordered by ``(d, eps, kind)``.
    """
    mode = Mode.parse(mode)
    kinds = parse_kinds(kinds)
    eps = _expand_eps(epsilons)
    dims = sorted({int(d) for d in np.atleast_1d(dims)})
    s2 = float(temperature)
    if not (math.isfinite(s2) and s2 > 0):
        raise ConfigError("temperature must be positive")
    if not c >= 0:
        raise ConfigError("c must be >= 0")
    if any(d < 2 for d in dims):
        raise ConfigError("dims must all be >= 2")
    rows = []
    for d in dims:
        base = build_model(family, d, rho, beta, gamma)
        if mode is Mode.ANALYTIC and base.family is not Family.OU:
            raise ConfigError("analytic mode is only available for the ou family")
        if mode is Mode.MONTE_CARLO:
            if d > max_dim:
                raise ConfigError(f"Monte-Carlo sweeps are capped at d <= {max_dim}")
            if n_particles > MC_MAX_PARTICLES:
                raise ConfigError(f"Monte-Carlo sweeps are capped at n <= {MC_MAX_PARTICLES}")
        model = _rescaled(base, s2)
        data = model.spectral()
        t_star = cutoff_time(d, base.rho)
        center = model.exact_mean()
        if center is None:
            cfg = SimConfig.for_model(model, n_particles=n_particles, seed=seed)
            center = estimate_mean(model, cfg, threads=threads).mean
        radius = c * math.sqrt(d * s2)
        x0 = center + radius * data.eigenmap.top_direction()
        ball = Ball(center, radius)
        total_var = d / model.rho if model.family is Family.OU else d / data.lambda1
        w2_zero = math.sqrt(radius ** 2 + total_var)
        times = [(1.0 + e) * t_star for e in eps]
        if mode is Mode.ANALYTIC:
            cells = [{k: (_analytic_value(k, model, x0, s2 * t, s2), 0.0) for k in kinds} for t in times]
        else:
            cfg = SimConfig(dt=(1e-3 / model.rho) if dt is None else dt * s2, n_particles=n_particles, seed=seed)
            cells = simulate_path(model, x0, cfg, [s2 * t for t in times], threads,
                                  observe=_mc_observer(kinds, model, seed, level, s2))
        for e, t, cell in zip(eps, times, cells):
            for k in kinds:
                value, ci = cell[k]
                lo, up = _bounds_for(k, model, ball, x0, s2 * t, w2_zero, data, s2)
                rows.append(ProfileRow(d, e, t, k, value, lo, up, mode, ci))
    return CutoffProfile(rows)


# bound sandwich -------------------------------------------------------------------

SANDWICH_COLUMNS = ("d", "t", "lower_paper", "lower_mean", "exact_or_mc", "ci", "upper", "violated_flags")


def bound_sandwich_report(model: ModelSpec, x0, t_grid, *, center=None, n_particles: int = 10_000,
                          dt: float | None = None, seed: int = 0, level: float = 0.99, slack: float = 1e-10,
                          threads: int | None = None) -> Table:
    """Per-time ``W2`` bounds from ``S = {x0}`` against the exact or simulated distance.

    OU: exact Mehler ``W2``. Other families: the projected ``W2`` estimate
    divided by ``sqrt(lambda1)`` (itself a lower bound on ``W2``) with its
    bootstrap half-width. ``center`` is the invariant mean for ``w2_upper``
    (estimated when not known in closed form).

    ``violated_flags`` lists, ``;``-separated, every bound on the wrong side of
    the value by more than ``ci + slack``.
    """
    t_grid = [float(t) for t in t_grid]
    if any(t < 0 for t in t_grid) or any(b <= a for a, b in zip(t_grid, t_grid[1:])):
        raise DomainError("t_grid must be non-negative and strictly increasing")
    x0 = np.asarray(x0, dtype=float)
    data = model.spectral()
    S = Finite(x0[None, :])
    if center is None:
        center = model.exact_mean()
    if center is None:
        center = estimate_mean(model, SimConfig.for_model(model, n_particles=n_particles, seed=seed), threads=threads).mean
    if model.family is Family.OU:
        mu = stationary_ou_law(model.d, model.rho, model.shift())
        values = [(gaussian_w2(ou_transition(x0, model.rho, t, model.shift()), mu), 0.0) for t in t_grid]
    else:
        T = data.eigenmap
        ref = standard_gaussian(T.k)
        lam = math.sqrt(data.lambda1)

        def observe(ens):
            r = projected_divergence(ens, T, ref, "W2", seed=seed, level=level)
            return r.value / lam, r.ci_half_width / lam

        cfg = SimConfig(dt=1e-3 / model.rho if dt is None else dt, n_particles=n_particles, seed=seed)
        values = simulate_path(model, x0, cfg, t_grid, threads, observe=observe)
    table = Table(SANDWICH_COLUMNS)
    for t, (v, ci) in zip(t_grid, values):
        lp = w2_lower_paper(data, S, t).value
        lm = w2_lower_mean_term(data, S, t).value
        up = w2_upper(model, S, t, center=center).value
        tol = ci + slack
        flags = [name for name, bad in (("lower_paper", lp > v + tol), ("lower_mean", lm > v + tol),
                                        ("upper", v - tol > up)) if bad]
        table.rows.append((model.d, t, lp, lm, v, ci, up, ";".join(flags)))
    return table


# Gaussian factor ---------------------------------------------------------------------

@dataclass(frozen=True)
class FactorizationReport:
    """KS test of the diagonal coordinate and its correlations with the rest."""

    d: int
    n: int
    ks_statistic: float
    ks_pvalue: float
    max_abs_correlation: float
    correlation_ci: float
    level: float

    @property
    def passed(self) -> bool:
        return self.ks_pvalue > 1.0 - self.level and self.max_abs_correlation <= self.correlation_ci

    def to_dict(self) -> dict:
        return {"d": self.d, "n": self.n, "ks_statistic": self.ks_statistic, "ks_pvalue": self.ks_pvalue,
                "max_abs_correlation": self.max_abs_correlation, "correlation_ci": self.correlation_ci,
                "level": self.level, "passed": self.passed}


def _diagonal_basis(d: int) -> np.ndarray:
    """Orthonormal basis (rows) whose first vector is ``(1, ..., 1)/sqrt(d)``."""
    M = np.eye(d)
    M[:, 0] = 1.0
    Q, _ = np.linalg.qr(M)
    Q = Q.T
    if Q[0, 0] < 0:
        Q[0] = -Q[0]
    return Q


def factorization_check(model: ModelSpec, n: int = 10_000, seed: int = 0, *, level: float = 0.99,
                        samples=None, threads: int | None = None) -> FactorizationReport:
    """Test that the invariant law splits off ``N(., 1/rho)`` along the diagonal.

    Stationary samples (drawn with :func:`cutofflab.sde.sample_stationary`
    unless ``samples`` is given) are rotated into an orthonormal basis with
    ``e1 = (1, ..., 1)/sqrt(d)``. Coordinate 1 is KS-tested against
    ``N(sum(m)/sqrt(d), 1/rho)``; its sample correlations with the other
    coordinates are compared to a Fisher-z band at ``level``, Bonferroni
    corrected over the ``d - 1`` pairs. ``passed`` needs ``p > 1 - level``
    and every correlation inside the band.
    """
    if n < 10_000 and samples is None:
        raise InsufficientSamplesError("factorization_check needs n >= 10^4")
    d = model.d
    if d < 2:
        raise DomainError("factorization_check needs d >= 2")
    if samples is None:
        cfg = SimConfig.for_model(model, n_particles=n, seed=seed)
        samples = sample_stationary(model, cfg, threads=threads).samples
    x = np.asarray(samples, dtype=float)
    n = x.shape[0]
    y = x @ _diagonal_basis(d).T
    loc = model.shift().sum() / math.sqrt(d)
    ks = ks_statistic(y[:, 0], stats.norm(loc=loc, scale=1.0 / math.sqrt(model.rho)))
    r = np.corrcoef(y, rowvar=False)[0, 1:]
    z = stats.norm.ppf(1.0 - (1.0 - level) / (2.0 * (d - 1)))
    band = math.tanh(z / math.sqrt(n - 3))
    return FactorizationReport(d, n, ks.statistic, ks.pvalue, float(np.max(np.abs(r))), band, level)


# L2 profile ---------------------------------------------------------------------------

def l2_profile_ou(d: int, rho: float, x0, t_grid, center=None) -> Table:
    """``|| d law(X_t)/d mu - 1 ||_{L2(mu)}`` for OU started at ``x0``; ``inf`` where not square-integrable."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (d,):
        raise DomainError(f"x0 must have length {d}")
    mu = stationary_ou_law(d, rho, center)
    table = Table(("d", "t", "chi_square", "l2"))
    for t in t_grid:
        t = float(t)
        if t < 0:
            raise DomainError("times must be >= 0")
        if t == 0:
            table.rows.append((d, t, math.inf, math.inf))
            continue
        chi = gaussian_chi_square(ou_transition(x0, rho, t, center), mu)
        table.rows.append((d, t, chi, math.sqrt(chi)))
    return table


# plotting -------------------------------------------------------------------------------

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def profile_svg(profile: CutoffProfile, width: int = 640, height: int = 420) -> str:
    """Log-log plot of value against ``d``, one line per ``(kind, eps)``. Deterministic text."""
    series = []
    for kind in _KIND_ORDER:
        for e in sorted({r.epsilon for r in profile.profile_rows}):
            ds, vs = profile.series(kind, e)
            keep = (vs > 0) & np.isfinite(vs)
            if np.any(keep):
                series.append((f"{kind.value} eps={e:+g}", np.log10(ds[keep]), np.log10(vs[keep])))
    pad = 60
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>']
    if series:
        xs = np.concatenate([s[1] for s in series])
        ys = np.concatenate([s[2] for s in series])
        x_lo, x_hi = float(xs.min()), float(xs.max())
        y_lo, y_hi = float(ys.min()), float(ys.max())
        x_hi = x_hi if x_hi > x_lo else x_lo + 1.0
        y_hi = y_hi if y_hi > y_lo else y_lo + 1.0

        def px(x, y):
            return (pad + (x - x_lo) / (x_hi - x_lo) * (width - 2 * pad),
                    height - pad - (y - y_lo) / (y_hi - y_lo) * (height - 2 * pad))

        parts.append(f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
                     'fill="none" stroke="black"/>')
        parts.append(f'<text x="{width / 2:.1f}" y="{height - 15}" text-anchor="middle" font-size="12">'
                     f'log10 d  [{x_lo:.3g}, {x_hi:.3g}]</text>')
        parts.append(f'<text x="15" y="{height / 2:.1f}" font-size="12" transform="rotate(-90 15 {height / 2:.1f})" '
                     f'text-anchor="middle">log10 value  [{y_lo:.3g}, {y_hi:.3g}]</text>')
        for i, (label, sx, sy) in enumerate(series):
            color = _COLORS[i % len(_COLORS)]
            pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in (px(x, y) for x, y in zip(sx, sy)))
            parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
            parts.append(f'<text x="{width - pad + 4}" y="{pad + 14 * (i + 1)}" font-size="10" fill="{color}">'
                         f'{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
