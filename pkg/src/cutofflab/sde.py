"""Particle simulation of ``dX = -grad V(X) dt + sqrt(2) dB`` and stationary samplers.

Particles are advanced independently inside a compiled ``prange`` loop. All
noise is drawn from the counter-based generator in :mod:`cutofflab.rng`, so an
ensemble is a pure function of ``(model, x0, config)`` and does not depend on
the number of worker threads.

Dyson states stay in the ordered cone. A step whose output is out of order or
has a gap below ``min_gap`` is redone from the same state as ``2**k`` uniform
substeps, for ``k = 1, 2, ...`` up to ``MAX_HALVINGS``, each level with its own
fresh noise keys. Rejecting swaps (instead of re-sorting them) matters: near a
collision the explicit interaction kick ``beta h / gap`` can throw a particle
across the whole configuration.
"""

from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Sequence

import numba
import numpy as np
from numba import njit, prange
from scipy import stats
from scipy.linalg import eigvalsh_tridiagonal

from . import rng
from .errors import CollisionError, ConfigError, DomainError, NonFiniteError
from .model import ModelSpec, check_domain

__all__ = [
    "Scheme",
    "SimConfig",
    "Ensemble",
    "MeanEstimate",
    "simulate",
    "simulate_path",
    "sample_stationary",
    "estimate_mean",
    "default_start",
    "set_threads",
    "dyson_tridiagonal_sample",
]

MAX_HALVINGS = 20
_MAGIC = b"CLENSMB1"
_VERSION = 1
_HEADER = struct.Struct("<8sIQId")  # magic, version, n, d, time: 32 bytes


class Scheme(str, Enum):
    EULER_MARUYAMA = "EulerMaruyama"
    OU_SPLITTING = "OuSplitting"

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        key = str(value).replace("-", "").replace("_", "").lower()
        for s in cls:
            if s.value.lower() == key or s.name.replace("_", "").lower() == key:
                return s
        if key in ("em", "euler"):
            return cls.EULER_MARUYAMA
        if key in ("split", "splitting", "strang"):
            return cls.OU_SPLITTING
        raise ConfigError(f"unknown scheme {value!r}")


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    Parameters
    ----------
    dt : float
        Base step. The number of steps to reach ``t_end`` is
        ``ceil(t_end / dt)`` and the step is shrunk to land exactly on it.
    t_end : float
    n_particles : int
    seed : int
        Root seed in ``[0, 2**64)``.
    scheme : Scheme
    min_gap : float
        Dyson collision guard.
    burn_in : float
        Time discarded by the long-run stationary sampler.
    """

    dt: float = 1e-3
    t_end: float = 0.0
    n_particles: int = 1000
    seed: int = 0
    scheme: Scheme = Scheme.OU_SPLITTING
    min_gap: float = 1e-6
    burn_in: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not (np.isfinite(self.t_end) and self.t_end >= 0):
            raise ConfigError(f"t_end must be >= 0, got {self.t_end}")
        if self.t_end > 0 and self.dt > self.t_end * (1 + 1e-12):
            raise ConfigError(f"dt={self.dt} exceeds t_end={self.t_end}")
        if int(self.n_particles) != self.n_particles or self.n_particles < 1:
            raise ConfigError("n_particles must be a positive integer")
        object.__setattr__(self, "n_particles", int(self.n_particles))
        if int(self.seed) != self.seed or not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be an integer in [0, 2**64)")
        object.__setattr__(self, "seed", int(self.seed))
        if not (self.min_gap > 0):
            raise ConfigError("min_gap must be positive")
        if not (np.isfinite(self.burn_in) and self.burn_in >= 0):
            raise ConfigError("burn_in must be >= 0")

    @classmethod
    def for_model(cls, model: ModelSpec, **kw) -> "SimConfig":
        """Defaults scaled to the model: ``dt = 1e-3/rho``, ``burn_in = 10/rho``."""
        kw.setdefault("dt", 1e-3 / model.rho)
        kw.setdefault("burn_in", 10.0 / model.rho)
        return cls(**kw)

    def with_(self, **kw) -> "SimConfig":
        return replace(self, **kw)


@dataclass(frozen=True, eq=False)
class Ensemble:
    """An ``(n_particles, d)`` block of samples at a given time."""

    samples: np.ndarray
    time: float
    model_id: str = ""
    rng_provenance: tuple = field(default=(0, rng.RNG_RULE))

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64, order="C", copy=True)
        if x.ndim != 2:
            raise DomainError("samples must be a 2-d block")
        if not np.all(np.isfinite(x)):
            raise NonFiniteError("ensemble contains non-finite entries")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "time", float(self.time))

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def d(self) -> int:
        return self.samples.shape[1]

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, Ensemble):
            return NotImplemented
        return self.time == other.time and np.array_equal(self.samples, other.samples)

    # I/O ----------------------------------------------------------------------
    def to_bytes(self) -> bytes:
        head = _HEADER.pack(_MAGIC, _VERSION, self.n, self.d, self.time)
        return head + self.samples.astype("<f8").tobytes(order="C")

    @classmethod
    def from_bytes(cls, blob: bytes, model_id: str = "") -> "Ensemble":
        if len(blob) < _HEADER.size:
            raise ValueError("truncated ensemble header")
        magic, version, n, d, t = _HEADER.unpack_from(blob)
        if magic != _MAGIC or version != _VERSION:
            raise ValueError("not an ensemble block (bad magic or version)")
        body = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size)
        if body.size != n * d:
            raise ValueError(f"expected {n * d} values, found {body.size}")
        return cls(body.reshape(n, d), t, model_id)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path, model_id: str = "") -> "Ensemble":
        return cls.from_bytes(Path(path).read_bytes(), model_id)

    def to_csv(self, path=None) -> str:
        """One row per particle, columns ``x1..xd``; floats in round-trip ``repr``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{j + 1}" for j in range(self.d)])
        for row in self.samples:
            w.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, text_or_path, time: float = 0.0, model_id: str = "") -> "Ensemble":
        text = str(text_or_path)
        if "\n" not in text and Path(text).exists():
            text = Path(text).read_text()
        rows = list(csv.reader(io.StringIO(text)))
        return cls(np.array([[float(v) for v in r] for r in rows[1:]]), time, model_id)


# compiled kernels -------------------------------------------------------------

@njit(cache=True, inline="always")
def _interaction_grad(x, code, g, out):
    d = x.shape[0]
    if code == 1:
        s = 0.0
        for i in range(d):
            s += x[i]
        for i in range(d):
            out[i] = 2.0 * g * (d * x[i] - s)
    elif code == 2:
        for i in range(d):
            acc = 0.0
            for j in range(d):
                u = x[i] - x[j]
                acc += u * u * u
            out[i] = 4.0 * g * acc
    elif code == 3:
        for i in range(d):
            acc = 0.0
            for j in range(d):
                if j != i:
                    acc += 1.0 / (x[i] - x[j])
            out[i] = -g * acc
    else:
        for i in range(d):
            out[i] = 0.0


@njit(cache=True, inline="always")
def _one_step(x, y, h, scheme, code, rho, g, m, seed, p, step, level, sub, gbuf, z):
    """Advance ``x`` by ``h`` into ``y``. Returns False on a non-finite Dyson state."""
    d = x.shape[0]
    if scheme == 0:
        _interaction_grad(x, code, g, gbuf)
        rng.fill_normals(z, seed, rng.STREAM_SIM, p, step, level, 2 * sub)
        sq = math.sqrt(2.0 * h)
        for i in range(d):
            y[i] = x[i] - h * (rho * (x[i] - m[i]) + gbuf[i]) + sq * z[i]
    else:
        a = math.exp(-0.5 * rho * h)
        s = math.sqrt(-math.expm1(-rho * h) / rho)
        rng.fill_normals(z, seed, rng.STREAM_SIM, p, step, level, 2 * sub)
        for i in range(d):
            y[i] = m[i] + a * (x[i] - m[i]) + s * z[i]
        if code != 0:
            _interaction_grad(y, code, g, gbuf)
            for i in range(d):
                y[i] -= h * gbuf[i]
        rng.fill_normals(z, seed, rng.STREAM_SIM, p, step, level, 2 * sub + 1)
        for i in range(d):
            y[i] = m[i] + a * (y[i] - m[i]) + s * z[i]
    if code == 3:
        # NaN would slip through the gap test; other models are checked per segment
        for i in range(d):
            if not math.isfinite(y[i]):
                return False
    return True


@njit(cache=True, inline="always")
def _ordered_ok(y, min_gap):
    # a step that would swap two particles counts as a collision: re-sorting it
    # would hide an explicit-Euler kick of size beta*h/gap
    for i in range(y.shape[0] - 1):
        if y[i] - y[i + 1] < min_gap:
            return False
    return True


@njit(cache=True, inline="always")
def _advance_particle(x, h, scheme, code, rho, g, m, seed, p, step, min_gap, max_halvings, y, tmp, gbuf, z):
    """One base step with collision retries. Returns 0 ok, 1 collision, 2 non-finite."""
    dyson = code == 3
    ok = _one_step(x, y, h, scheme, code, rho, g, m, seed, p, step, 0, 0, gbuf, z)
    if ok and dyson:
        ok = _ordered_ok(y, min_gap)
    if ok:
        x[:] = y
        return 0
    for level in range(1, max_halvings + 1):
        nsub = 1 << level
        hs = h / nsub
        tmp[:] = x
        good = True
        for sub in range(nsub):
            if not _one_step(tmp, y, hs, scheme, code, rho, g, m, seed, p, step, level, sub, gbuf, z):
                good = False
                break
            if not _ordered_ok(y, min_gap):
                good = False
                break
            tmp[:] = y
        if good:
            x[:] = tmp
            return 0
    return 1


@njit(cache=True, parallel=True)
def _advance(X, step0, nsteps, h, scheme, code, rho, g, m, seed, min_gap, max_halvings, offset, status):
    n, d = X.shape
    for p in prange(n):
        x = X[p].copy()
        y = np.empty(d)
        tmp = np.empty(d)
        gbuf = np.empty(d)
        z = np.empty(d)
        for s in range(step0, step0 + nsteps):
            r = _advance_particle(x, h, scheme, code, rho, g, m, seed, offset + p, s, min_gap, max_halvings, y, tmp, gbuf, z)
            if r != 0:
                status[p] = r
                break
        for i in range(d):
            if not math.isfinite(x[i]):
                status[p] = 2
        X[p] = x


def set_threads(threads: int | None) -> int:
    """Set the numba worker count, clamped to what the runtime was started with."""
    top = numba.config.NUMBA_NUM_THREADS
    n = top if threads is None else max(1, min(int(threads), top))
    numba.set_num_threads(n)
    return n


def _initial_block(model: ModelSpec, x0, n: int) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 1:
        if x0.shape[0] != model.d:
            raise DomainError(f"x0 has length {x0.shape[0]}, expected {model.d}")
        check_domain(model, x0)
        return np.repeat(x0[None, :], n, axis=0)
    if x0.shape != (n, model.d):
        raise DomainError(f"x0 block must have shape {(n, model.d)}")
    check_domain(model, x0)
    return np.ascontiguousarray(x0, dtype=float).copy()


def _run(model: ModelSpec, X: np.ndarray, cfg: SimConfig, step0: int, nsteps: int, h: float) -> None:
    if nsteps <= 0:
        return
    pot = model.potential
    status = np.zeros(X.shape[0], dtype=np.int64)
    _advance(
        X, step0, nsteps, h,
        0 if cfg.scheme is Scheme.EULER_MARUYAMA else 1,
        pot.kernel_code, pot.rho, float(pot.coupling) if model.family.value == "pairwise" else 0.0,
        model.shift(), np.uint64(cfg.seed), cfg.min_gap, MAX_HALVINGS, 0, status,
    )
    if np.any(status == 1):
        bad = int(np.argmax(status == 1))
        raise CollisionError(f"particle {bad} still collides after {MAX_HALVINGS} step halvings")
    if np.any(status == 2):
        raise NonFiniteError(f"non-finite state; dt={h} is probably too large")


def _steps_for(span: float, dt: float) -> tuple[int, float]:
    if span <= 0:
        return 0, dt
    n = max(1, math.ceil(span / dt - 1e-9))
    return n, span / n


def simulate_path(model: ModelSpec, x0, cfg: SimConfig, record_times: Sequence[float], threads: int | None = None,
                  observe=None) -> list:
    """Run one ensemble and snapshot it at each of ``record_times`` (sorted on return).

    Segments between consecutive record times use their own rounded step; the
    global step counter keeps running, so noise is never reused. With
    ``observe``, the list holds ``observe(ensemble)`` instead of the ensembles.
    """
    times = sorted(float(t) for t in record_times)
    if any(t < 0 for t in times):
        raise ConfigError("record times must be >= 0")
    set_threads(threads)
    X = _initial_block(model, x0, cfg.n_particles)
    prov = (cfg.seed, rng.RNG_RULE)
    out, t_prev, step = [], 0.0, 0
    for t in times:
        n, h = _steps_for(t - t_prev, cfg.dt)
        _run(model, X, cfg, step, n, h)
        step += n
        t_prev = t
        snap = Ensemble(X, t, model.model_id, prov)
        out.append(snap if observe is None else observe(snap))
    return out


def simulate(model: ModelSpec, x0, cfg: SimConfig, threads: int | None = None) -> Ensemble:
    """Ensemble of ``cfg.n_particles`` trajectories from ``x0`` at time ``cfg.t_end``.

    ``x0`` is a single state (copied to every particle) or an ``(n, d)`` block.
    """
    return simulate_path(model, x0, cfg, [cfg.t_end], threads)[0]


# stationary sampling ----------------------------------------------------------

def default_start(model: ModelSpec) -> np.ndarray:
    """A state in the model's domain near the bulk of the invariant law."""
    m = model.shift()
    if model.is_dyson:
        d = model.d
        half = math.sqrt(max(2.0 * model.potential.coupling * d, 1.0) / model.rho)
        return m + np.linspace(half, -half, d) if d > 1 else m.copy()
    return m.copy()


def dyson_tridiagonal_sample(d: int, beta: float, rho: float, n: int, seed: int) -> np.ndarray:
    """Exact draws from ``exp(-rho/2 |x|^2) prod_{i<j} (x_i - x_j)^beta`` on the ordered cone.

    Eigenvalues of the Dumitriu-Edelman tridiagonal matrix with ``N(0, 1)``
    diagonal and ``chi_{k beta} / sqrt(2)`` off-diagonal (``k = d-1..1``),
    scaled by ``1/sqrt(rho)`` and sorted decreasingly.
    """
    g = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 0xD750, d])))
    diag = g.standard_normal((n, d))
    dfs = beta * np.arange(d - 1, 0, -1)
    off = np.sqrt(g.chisquare(dfs, size=(n, d - 1)) / 2.0) if d > 1 else np.zeros((n, 0))
    out = np.empty((n, d))
    for i in range(n):
        out[i] = eigvalsh_tridiagonal(diag[i], off[i])[::-1]
    return out / math.sqrt(rho)


def sample_stationary(model: ModelSpec, cfg: SimConfig, samples_per_chain: int = 1, threads: int | None = None) -> Ensemble:
    """Draws from the invariant law ``mu ~ exp(-V)``.

    OU and quadratic pairs: exact Gaussian draws. Dyson: exact tridiagonal
    construction (any ``beta > 0``). Other interactions: ``cfg.n_particles`` chains run from
    :func:`default_start` for ``cfg.burn_in``; each chain then contributes
    ``samples_per_chain`` states spaced ``dt * ceil(1 / (rho dt))`` apart.
    """
    d, rho, n = model.d, model.rho, cfg.n_particles
    prov = (cfg.seed, rng.RNG_RULE)
    if model.family.value == "ou":
        z = rng.normal_matrix(cfg.seed, rng.STREAM_INIT, n, d)
        return Ensemble(model.shift() + z / math.sqrt(rho), math.inf, model.model_id, prov)
    m = model.shift()
    if model.potential.kernel_code == 1:
        # quadratic pairs: mu = N(mean, H^{-1}) with H = rho I + 2 gamma (d I - 1 1^T);
        # H^{-1/2} scales the diagonal direction by 1/sqrt(rho), the rest by 1/sqrt(rho + 2 gamma d)
        z = rng.normal_matrix(cfg.seed, rng.STREAM_INIT, n, d)
        a = 1.0 / math.sqrt(rho + 2.0 * model.potential.coupling * d)
        zbar = z.mean(axis=1, keepdims=True)
        x = model.exact_mean() + a * z + (1.0 / math.sqrt(rho) - a) * zbar
        return Ensemble(x, math.inf, model.model_id, prov)
    if model.is_dyson and np.ptp(m) == 0.0:
        # a constant shift commutes with the interaction; others need simulation
        x = dyson_tridiagonal_sample(d, model.potential.coupling, rho, n, cfg.seed) + model.shift()
        return Ensemble(x, math.inf, model.model_id, prov)
    if cfg.burn_in <= 0:
        raise ConfigError("burn_in must be positive for interacting models")
    thin = cfg.dt * math.ceil(1.0 / (rho * cfg.dt) - 1e-9)
    times = [cfg.burn_in + k * thin for k in range(samples_per_chain)]
    snaps = simulate_path(model, default_start(model), cfg.with_(t_end=0.0), times, threads)
    x = np.concatenate([e.samples for e in snaps], axis=0)
    return Ensemble(x, math.inf, model.model_id, prov)


@dataclass(frozen=True, eq=False)
class MeanEstimate:
    mean: np.ndarray
    half_width: np.ndarray
    coord_sum: float
    sum_half_width: float
    n: int
    level: float

    def __iter__(self):
        yield self.mean
        yield self.half_width


def estimate_mean(model: ModelSpec, cfg: SimConfig, level: float = 0.99, threads: int | None = None) -> MeanEstimate:
    """Monte-Carlo mean of the invariant law with normal-approximation CIs.

    The coordinate sum gets its own CI (coordinates are correlated).
    """
    x = sample_stationary(model, cfg, threads=threads).samples
    n = x.shape[0]
    z = stats.norm.ppf(0.5 + level / 2)
    mean = x.mean(axis=0)
    hw = z * x.std(axis=0, ddof=1) / math.sqrt(n)
    s = x.sum(axis=1)
    return MeanEstimate(mean, hw, float(mean.sum()), float(z * s.std(ddof=1) / math.sqrt(n)), n, level)
