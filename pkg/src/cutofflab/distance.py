"""Empirical distance estimators between ensembles and reference laws.

Bootstrap half-widths (``ci_half_width``) are the ``level`` quantile of the
estimator's self-discrepancy under resampling, e.g. ``W2(resample, sample)``.
By the triangle inequality that quantity bounds how far the estimate can sit
from the population value, so "0 within CI" reads ``value <= ci_half_width``.
The KL plug-in, which has no triangle inequality, reports the ``level``
quantile of ``|KL(resample) - KL(sample)|`` instead.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import optimize, stats

from . import rng
from .analytic import IsotropicGaussianLaw, gaussian_kl
from .errors import DimensionMismatchError, InsufficientSamplesError, LengthMismatchError, SizeLimitError
from .model import AffineMap

__all__ = [
    "DistanceKind",
    "Estimator",
    "DistanceReport",
    "KSResult",
    "w2_1d",
    "w2_assignment",
    "sliced_w2",
    "tv_1d",
    "ks_statistic",
    "projected_divergence",
    "ASSIGNMENT_LIMIT",
]

ASSIGNMENT_LIMIT = 1024
N_BOOTSTRAP = 200


class DistanceKind(str, Enum):
    W2 = "W2"
    TV = "TV"
    KL = "KL"
    FISHER = "Fisher"
    CHI_SQUARE = "ChiSquare"
    KS = "KS"
    SLICED_W2 = "SlicedW2"


class Estimator(str, Enum):
    EXACT = "Exact"
    ASSIGNMENT = "Assignment"
    SLICED = "Sliced"
    HISTOGRAM = "Histogram"
    PROJECTION = "Projection"


@dataclass(frozen=True)
class DistanceReport:
    kind: DistanceKind
    value: float
    estimator: Estimator
    ci_half_width: float = 0.0
    n_used: int = 0
    lower_bound: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", DistanceKind(self.kind))
        object.__setattr__(self, "estimator", Estimator(self.estimator))
        if not self.value >= 0:
            raise ValueError(f"distance value must be >= 0, got {self.value}")
        if not self.ci_half_width >= 0:
            raise ValueError("ci_half_width must be >= 0")

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "value": self.value, "estimator": self.estimator.value,
               "ci": self.ci_half_width, "n": self.n_used}
        if self.lower_bound:
            out["lower_bound"] = True
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def contains(self, target: float) -> bool:
        return abs(self.value - target) <= self.ci_half_width


def _as_1d(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 2 and a.shape[1] == 1:
        a = a[:, 0]
    if a.ndim != 1:
        raise DimensionMismatchError("expected 1-d samples")
    return a


def _as_cloud(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return a[:, None] if a.ndim == 1 else a


def _w2_sorted(a: np.ndarray, b: np.ndarray) -> float:
    return math.sqrt(float(np.mean((a - b) ** 2)))


def w2_1d(a, b) -> DistanceReport:
    """Exact ``W2`` between two equal-size 1-d empirical measures (quantile coupling)."""
    a, b = _as_1d(a), _as_1d(b)
    if a.size != b.size:
        raise LengthMismatchError(f"sample sizes differ: {a.size} vs {b.size}")
    if a.size == 0:
        raise InsufficientSamplesError("need at least one sample")
    return DistanceReport(DistanceKind.W2, _w2_sorted(np.sort(a), np.sort(b)), Estimator.EXACT, 0.0, a.size)


def w2_assignment(a, b) -> DistanceReport:
    """Exact empirical ``W2`` in ``R^d`` via the Hungarian/LAPJV solver (``n <= 1024``)."""
    a, b = _as_cloud(a), _as_cloud(b)
    if a.shape != b.shape:
        if a.shape[0] != b.shape[0]:
            raise LengthMismatchError(f"sample sizes differ: {a.shape[0]} vs {b.shape[0]}")
        raise DimensionMismatchError(f"dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    n = a.shape[0]
    if n > ASSIGNMENT_LIMIT:
        raise SizeLimitError(f"assignment W2 limited to n <= {ASSIGNMENT_LIMIT}, got {n}")
    cost = (np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * a @ b.T)
    rows, cols = optimize.linear_sum_assignment(cost)
    # recompute the matched costs directly (the expanded form cancels badly)
    val = float(np.mean(np.sum((a[rows] - b[cols]) ** 2, axis=1)))
    return DistanceReport(DistanceKind.W2, math.sqrt(val), Estimator.ASSIGNMENT, 0.0, n)


def random_directions(n_directions: int, d: int, seed: int) -> np.ndarray:
    """Uniform unit vectors from the counter-based stream (normalised Gaussians)."""
    g = rng.normal_block(seed, rng.STREAM_DIRECTIONS, n_directions, d)
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sliced_w2(a, b, n_directions: int = 128, seed: int = 0, level: float = 0.95) -> DistanceReport:
    """Root-mean-square over random directions of the 1-d ``W2`` of projections.

    This is a different (smaller) quantity than ``W2``; it is reported under
    its own kind. The half-width is a normal-approximation interval over the
    direction-wise squared distances, mapped through the square root.
    """
    a, b = _as_cloud(a), _as_cloud(b)
    if a.shape != b.shape:
        raise LengthMismatchError(f"shapes differ: {a.shape} vs {b.shape}")
    if n_directions < 1:
        raise ValueError("n_directions must be >= 1")
    u = random_directions(n_directions, a.shape[1], seed)
    pa = np.sort(a @ u.T, axis=0)
    pb = np.sort(b @ u.T, axis=0)
    w2sq = np.mean((pa - pb) ** 2, axis=0)
    value = math.sqrt(float(w2sq.mean()))
    hw = 0.0
    if n_directions > 1 and value > 0:
        z = stats.norm.ppf(0.5 + level / 2)
        hw = float(z * w2sq.std(ddof=1) / math.sqrt(n_directions) / (2.0 * value))
    return DistanceReport(DistanceKind.SLICED_W2, value, Estimator.SLICED, hw, a.shape[0])


def _bootstrap_indices(n: int, seed: int, n_boot: int = N_BOOTSTRAP) -> np.ndarray:
    u = rng.uniform_block(seed, rng.STREAM_BOOTSTRAP, n_boot, n)
    return np.minimum((u * n).astype(np.int64), n - 1)


def _as_law(law):
    if isinstance(law, IsotropicGaussianLaw):
        if law.dim != 1:
            raise DimensionMismatchError("tv_1d needs a 1-d reference law")
        return stats.norm(loc=float(law.mean[0]), scale=math.sqrt(law.variance))
    if not hasattr(law, "cdf"):
        raise TypeError("reference law must provide a cdf")
    return law


def _binned_tv(counts: np.ndarray, n: int, ref_mass: np.ndarray, outside: float) -> float:
    return 0.5 * (float(np.sum(np.abs(counts / n - ref_mass))) + outside)


def tv_1d(a, law, seed: int = 0, level: float = 0.99, n_boot: int = N_BOOTSTRAP) -> DistanceReport:
    """Histogram estimate of ``TV`` between samples and a 1-d law.

    Bins follow the Freedman-Diaconis rule over the sample range. The estimate
    compares binned masses, ``1/2 sum_b |p_hat_b - P(b)|``, plus the reference
    mass outside the sample range, so it never needs a density and lies in
    ``[0, 1]``. Half-width: ``level`` quantile of
    ``1/2 sum_b |p*_b - p_hat_b|`` over ``n_boot`` bootstrap resamples
    (``n_boot=0`` skips it and reports a zero half-width).
    """
    a = _as_1d(a)
    n = a.size
    if n < 100:
        raise InsufficientSamplesError(f"tv_1d needs n >= 100, got {n}")
    law = _as_law(law)
    edges = np.histogram_bin_edges(a, bins="fd")
    cdf = law.cdf(edges)
    ref_mass = np.diff(cdf)
    outside = float(cdf[0] + (1.0 - cdf[-1]))
    counts, _ = np.histogram(a, bins=edges)
    value = min(max(_binned_tv(counts, n, ref_mass, outside), 0.0), 1.0)
    if n_boot == 0:
        return DistanceReport(DistanceKind.TV, value, Estimator.HISTOGRAM, 0.0, n)
    idx = _bootstrap_indices(n, seed, n_boot)
    bins = np.clip(np.searchsorted(edges, a, side="right") - 1, 0, len(edges) - 2)
    p_hat = counts / n
    disc = np.empty(idx.shape[0])
    for r in range(idx.shape[0]):
        c = np.bincount(bins[idx[r]], minlength=len(edges) - 1)
        disc[r] = 0.5 * np.sum(np.abs(c / n - p_hat))
    return DistanceReport(DistanceKind.TV, value, Estimator.HISTOGRAM, float(np.quantile(disc, level)), n)


@dataclass(frozen=True)
class KSResult:
    statistic: float
    pvalue: float
    n: int

    def to_report(self) -> DistanceReport:
        return DistanceReport(DistanceKind.KS, self.statistic, Estimator.EXACT, 0.0, self.n)


def ks_statistic(a, cdf) -> KSResult:
    """Kolmogorov-Smirnov distance to a reference cdf with its asymptotic p-value.

    ``cdf`` is a callable, a scipy distribution, or a 1-d :class:`IsotropicGaussianLaw`.
    """
    a = _as_1d(a)
    if a.size < 10:
        raise InsufficientSamplesError(f"ks_statistic needs n >= 10, got {a.size}")
    if isinstance(cdf, IsotropicGaussianLaw) or hasattr(cdf, "cdf"):
        cdf = _as_law(cdf).cdf
    res = stats.kstest(a, cdf, method="asymp")
    return KSResult(float(res.statistic), float(res.pvalue), a.size)


def _reduce(z: np.ndarray, reference: IsotropicGaussianLaw, direction):
    """Map k-dimensional projected samples to a line through the reference mean."""
    k = z.shape[1]
    if k == 1:
        return z[:, 0], IsotropicGaussianLaw(reference.mean, reference.variance)
    if direction is None:
        u = z.mean(axis=0) - reference.mean
        nrm = np.linalg.norm(u)
        u = u / nrm if nrm > 0 else np.eye(k)[0]
    else:
        u = np.asarray(direction, dtype=float)
        u = u / np.linalg.norm(u)
    s = (z - reference.mean) @ u
    return s, IsotropicGaussianLaw([0.0], reference.variance)


def projected_divergence(ensemble, eigenmap: AffineMap, reference: IsotropicGaussianLaw, kind="W2",
                         seed: int = 0, level: float = 0.99, direction=None) -> DistanceReport:
    """Distance between the law of ``T(X)`` and a Gaussian reference, from samples.

    Mappings can only decrease these divergences, so the result estimates a
    lower bound on the full-space distance and is flagged as such. For
    ``k1 > 1`` the projected samples are further reduced to one line (the
    empirical mean offset, or ``direction``), another contraction.

    W2: ``w2_1d`` against the reference quantiles at ``(i - 1/2)/n``.
    TV: :func:`tv_1d`. KL: moment-matched Gaussian plug-in.
    """
    kind = DistanceKind(kind)
    x = ensemble.samples if hasattr(ensemble, "samples") else np.atleast_2d(ensemble)
    z = eigenmap(x)
    if z.shape[1] != reference.dim:
        raise DimensionMismatchError(f"eigenmap has {z.shape[1]} outputs, reference has dim {reference.dim}")
    s, ref = _reduce(z, reference, direction)
    n = s.size
    law = stats.norm(loc=float(ref.mean[0]), scale=math.sqrt(ref.variance))
    if kind is DistanceKind.W2:
        s_sorted = np.sort(s)
        q = law.ppf((np.arange(n) + 0.5) / n)
        value = _w2_sorted(s_sorted, q)
        idx = _bootstrap_indices(n, seed)
        disc = np.array([_w2_sorted(np.sort(s[i]), s_sorted) for i in idx])
        return DistanceReport(kind, value, Estimator.PROJECTION, float(np.quantile(disc, level)), n, True)
    if kind is DistanceKind.TV:
        r = tv_1d(s, law, seed=seed, level=level)
        return DistanceReport(kind, r.value, Estimator.PROJECTION, r.ci_half_width, n, True)
    if kind is DistanceKind.KL:
        if n < 3:
            raise InsufficientSamplesError("KL plug-in needs n >= 3")
        fit = IsotropicGaussianLaw([s.mean()], s.var(ddof=1))
        value = gaussian_kl(fit, ref)
        idx = _bootstrap_indices(n, seed)
        # KL has no triangle inequality: use the bootstrap spread of the estimate itself
        disc = np.array([abs(gaussian_kl(IsotropicGaussianLaw([s[i].mean()], s[i].var(ddof=1)), ref) - value)
                         for i in idx])
        return DistanceReport(kind, value, Estimator.PROJECTION, float(np.quantile(disc, level)), n, True)
    raise ValueError(f"projected_divergence supports W2, TV and KL, not {kind.value}")
