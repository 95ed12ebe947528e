"""Potentials, generator action and first-eigenspace data of rigid Langevin models.

Two families are supported:

* ``ou``: ``V(x) = rho/2 |x - m|^2``;
* ``pairwise``: ``V(x) = rho/2 |x - m|^2 + sum_{i<j} h(x_i - x_j)`` with
  ``h(u) = gamma u^2`` (quadratic), ``h(u) = gamma u^4`` (quartic) or
  ``h(u) = -beta log(u)`` on ``u > 0`` (Dyson). Dyson states live in the open
  ordered cone ``x_1 > x_2 > ... > x_d``.

For all of them the spectral gap equals ``rho`` and the first eigenfunctions are
affine, which is what the bounds module consumes through :class:`SpectralData`.
"""

from __future__ import annotations

import configparser
import hashlib
import itertools
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping

import numpy as np

from .errors import ConfigError, DomainError, EmptySetError, NonFiniteError

__all__ = [
    "Family",
    "PairKind",
    "PotentialSpec",
    "ModelSpec",
    "AffineMap",
    "SpectralData",
    "InitialSet",
    "Ball",
    "Cube",
    "Finite",
    "potential_value",
    "grad_potential",
    "hessian_quadratic_form",
    "generator_apply",
    "spectral_data",
    "ScaledIdentityMap",
    "sup_lambda",
    "check_domain",
]


class Family(str, Enum):
    OU = "ou"
    PAIRWISE = "pairwise"


class PairKind(str, Enum):
    QUADRATIC = "quadratic"
    QUARTIC = "quartic"
    DYSON = "dyson"


@dataclass(frozen=True)
class PotentialSpec:
    """Parameters of the potential ``V``.

    Parameters
    ----------
    family : Family
    rho : float
        Confinement strength, equal to the curvature lower bound and the gap.
    pair_kind : PairKind, optional
        Required for the pairwise family.
    coupling : float
        ``gamma`` for quadratic/quartic pairs, ``beta`` for Dyson.
    mean_shift : tuple of float, optional
        Center ``m`` of the quadratic well; ``None`` means the origin.
    """

    family: Family
    rho: float
    pair_kind: PairKind | None = None
    coupling: float = 0.0
    mean_shift: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.pair_kind is not None:
            object.__setattr__(self, "pair_kind", PairKind(self.pair_kind))
        if not (np.isfinite(self.rho) and self.rho > 0):
            raise ConfigError(f"rho must be positive, got {self.rho}")
        if self.family is Family.PAIRWISE and self.pair_kind is None:
            raise ConfigError("pairwise family needs a pair_kind")
        if self.family is Family.OU and self.pair_kind is not None:
            raise ConfigError("ou family takes no pair_kind")
        if not (np.isfinite(self.coupling) and self.coupling >= 0):
            raise ConfigError(f"coupling (gamma/beta) must be >= 0, got {self.coupling}")
        if self.mean_shift is not None:
            shift = tuple(float(v) for v in self.mean_shift)
            if not all(np.isfinite(shift)):
                raise ConfigError("mean_shift must be finite")
            object.__setattr__(self, "mean_shift", shift)

    @property
    def is_dyson(self) -> bool:
        return self.pair_kind is PairKind.DYSON

    def shift(self, d: int) -> np.ndarray:
        if self.mean_shift is None:
            return np.zeros(d)
        if len(self.mean_shift) != d:
            raise DomainError(f"mean_shift has length {len(self.mean_shift)}, expected {d}")
        return np.asarray(self.mean_shift, dtype=float)

    @property
    def kernel_code(self) -> int:
        """Integer tag used by the compiled simulation kernels."""
        if self.family is Family.OU:
            return 0
        return {PairKind.QUADRATIC: 1, PairKind.QUARTIC: 2, PairKind.DYSON: 3}[self.pair_kind]


@dataclass(frozen=True)
class ModelSpec:
    """A potential together with its dimension."""

    potential: PotentialSpec
    d: int

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ConfigError(f"dimension must be a positive integer, got {self.d}")
        object.__setattr__(self, "d", int(self.d))
        if self.potential.mean_shift is not None and len(self.potential.mean_shift) != self.d:
            raise ConfigError("mean_shift length does not match d")

    # convenience constructors -------------------------------------------------
    @classmethod
    def ou(cls, d: int, rho: float = 1.0, mean_shift=None) -> "ModelSpec":
        return cls(PotentialSpec(Family.OU, rho, mean_shift=_opt_tuple(mean_shift)), d)

    @classmethod
    def pairwise(cls, kind, d: int, rho: float = 1.0, coupling: float = 1.0, mean_shift=None) -> "ModelSpec":
        return cls(PotentialSpec(Family.PAIRWISE, rho, PairKind(kind), coupling, _opt_tuple(mean_shift)), d)

    @classmethod
    def dyson(cls, d: int, beta: float = 2.0, rho: float = 1.0, mean_shift=None) -> "ModelSpec":
        return cls.pairwise(PairKind.DYSON, d, rho, beta, mean_shift)

    @classmethod
    def quadratic_pair(cls, d: int, gamma: float = 1.0, rho: float = 1.0, mean_shift=None) -> "ModelSpec":
        return cls.pairwise(PairKind.QUADRATIC, d, rho, gamma, mean_shift)

    @classmethod
    def quartic_pair(cls, d: int, gamma: float = 1.0, rho: float = 1.0, mean_shift=None) -> "ModelSpec":
        return cls.pairwise(PairKind.QUARTIC, d, rho, gamma, mean_shift)

    # accessors ----------------------------------------------------------------
    @property
    def rho(self) -> float:
        return self.potential.rho

    @property
    def family(self) -> Family:
        return self.potential.family

    @property
    def is_dyson(self) -> bool:
        return self.potential.is_dyson

    def shift(self) -> np.ndarray:
        return self.potential.shift(self.d)

    def spectral(self) -> "SpectralData":
        return spectral_data(self.potential, self.d)

    @property
    def label(self) -> str:
        """Short name used by the CLI: ou, quadratic, quartic or dyson."""
        if self.family is Family.OU:
            return "ou"
        return self.potential.pair_kind.value

    def exact_mean(self) -> np.ndarray | None:
        """Mean of the invariant law when known in closed form, else ``None``."""
        m = self.shift()
        if self.family is Family.OU or self.d == 1:
            return m
        kind = self.potential.pair_kind
        if kind is PairKind.QUADRATIC:
            # Gaussian invariant law: the mean is the minimiser of V
            g, d = self.potential.coupling, self.d
            H = (self.rho + 2.0 * g * d) * np.eye(d) - 2.0 * g * np.ones((d, d))
            return np.linalg.solve(H, self.rho * m)
        if kind is PairKind.QUARTIC and not np.any(m):
            return np.zeros(self.d)  # V is even
        return None

    def to_config(self) -> dict[str, str]:
        cfg = {"family": self.label, "rho": repr(self.rho), "d": str(self.d)}
        if self.family is Family.PAIRWISE:
            cfg["beta" if self.is_dyson else "gamma"] = repr(self.potential.coupling)
        if self.potential.mean_shift is not None:
            cfg["mean_shift"] = ",".join(repr(v) for v in self.potential.mean_shift)
        return cfg

    def to_config_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.to_config().items())

    @classmethod
    def from_config(cls, table: Mapping[str, str]) -> "ModelSpec":
        """Build a model from a flat key/value table (family, rho, beta/gamma, d, mean_shift)."""
        table = {str(k).strip().lower(): str(v).strip() for k, v in table.items()}
        try:
            family = table.get("family", "ou").lower()
            rho = float(table.get("rho", "1"))
            d = int(table["d"])
        except KeyError as exc:
            raise ConfigError(f"missing config key {exc}") from None
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        shift = None
        if table.get("mean_shift"):
            try:
                vals = [float(v) for v in table["mean_shift"].split(",") if v.strip()]
            except ValueError as exc:
                raise ConfigError(f"bad mean_shift: {exc}") from None
            shift = vals * d if len(vals) == 1 else vals
        if family == "ou":
            return cls.ou(d, rho, shift)
        if family == "dyson":
            return cls.dyson(d, float(table.get("beta", "2")), rho, shift)
        if family in ("quadratic", "quartic"):
            return cls.pairwise(family, d, rho, float(table.get("gamma", "1")), shift)
        raise ConfigError(f"unknown family {family!r}")

    @classmethod
    def from_config_text(cls, text: str) -> "ModelSpec":
        parser = configparser.ConfigParser()
        try:
            parser.read_string("[model]\n" + text)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
        return cls.from_config(dict(parser["model"]))

    @property
    def model_id(self) -> str:
        blob = json.dumps(self.to_config(), sort_keys=True).encode()
        return f"{self.label}-d{self.d}-{hashlib.sha256(blob).hexdigest()[:12]}"


def _opt_tuple(v):
    if v is None:
        return None
    return tuple(float(a) for a in np.ravel(np.asarray(v, dtype=float)))


def _potential(spec) -> PotentialSpec:
    return spec.potential if isinstance(spec, ModelSpec) else spec


# ---------------------------------------------------------------------------
# potential, gradient, Hessian
# ---------------------------------------------------------------------------

def check_domain(spec, x) -> np.ndarray:
    """Validate a state (or a batch of states along the first axis)."""
    pot = _potential(spec)
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("state has non-finite entries")
    if pot.is_dyson and x.shape[-1] > 1:
        gaps = -np.diff(x, axis=-1)
        if not np.all(gaps > 0):
            raise DomainError("Dyson state must be strictly decreasing (x_1 > ... > x_d)")
    return x


def _pair_diffs(x: np.ndarray) -> np.ndarray:
    # u[..., i, j] = x_i - x_j
    return x[..., :, None] - x[..., None, :]


def potential_value(spec, x) -> np.ndarray | float:
    """``V(x)``; ``+inf`` outside the ordered cone for the Dyson family."""
    pot = _potential(spec)
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    y = x - pot.shift(d)
    val = 0.5 * pot.rho * np.sum(y * y, axis=-1)
    if pot.family is Family.PAIRWISE and d > 1:
        u = _pair_diffs(x)
        iu = np.triu_indices(d, 1)
        upper = u[..., iu[0], iu[1]]  # x_i - x_j for i < j
        g = pot.coupling
        if pot.pair_kind is PairKind.QUADRATIC:
            val = val + g * np.sum(upper**2, axis=-1)
        elif pot.pair_kind is PairKind.QUARTIC:
            val = val + g * np.sum(upper**4, axis=-1)
        else:
            inside = np.all(upper > 0, axis=-1)
            with np.errstate(divide="ignore", invalid="ignore"):
                logs = np.where(upper > 0, np.log(np.where(upper > 0, upper, 1.0)), 0.0)
            val = np.where(inside, val - g * np.sum(logs, axis=-1), np.inf)
    return val[()] if np.ndim(val) == 0 else val


def _interaction_grad(pot: PotentialSpec, x: np.ndarray) -> np.ndarray:
    u = _pair_diffs(x)
    g = pot.coupling
    if pot.pair_kind is PairKind.QUADRATIC:
        hp = 2.0 * g * u
    elif pot.pair_kind is PairKind.QUARTIC:
        hp = 4.0 * g * u**3
    else:
        d = x.shape[-1]
        eye = np.eye(d, dtype=bool)
        with np.errstate(divide="ignore"):
            hp = np.where(eye, 0.0, -g / np.where(eye, 1.0, u))
    return np.sum(hp, axis=-1)


def grad_potential(spec, x) -> np.ndarray:
    """Drift field ``grad V(x) = rho (x - m) + grad W(x)``.

    Works on a single state of shape ``(d,)`` or on a batch ``(n, d)``.
    """
    pot = _potential(spec)
    x = check_domain(pot, x)
    d = x.shape[-1]
    out = pot.rho * (x - pot.shift(d))
    if pot.family is Family.PAIRWISE and d > 1:
        out = out + _interaction_grad(pot, x)
    if not np.all(np.isfinite(out)):
        raise NonFiniteError("gradient overflow")
    return out


def hessian_quadratic_form(spec, x, v) -> float:
    """``<Hess V(x) v, v>`` from analytic second derivatives."""
    pot = _potential(spec)
    x = check_domain(pot, x)
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise DomainError("direction has non-finite entries")
    val = pot.rho * float(v @ v)
    d = x.shape[-1]
    if pot.family is Family.PAIRWISE and d > 1:
        iu = np.triu_indices(d, 1)
        u = x[iu[0]] - x[iu[1]]
        dv = v[iu[0]] - v[iu[1]]
        g = pot.coupling
        if pot.pair_kind is PairKind.QUADRATIC:
            hpp = np.full_like(u, 2.0 * g)
        elif pot.pair_kind is PairKind.QUARTIC:
            hpp = 12.0 * g * u**2
        else:
            hpp = g / u**2
        val += float(np.sum(hpp * dv * dv))
    if not np.isfinite(val):
        raise NonFiniteError("Hessian overflow")
    return val


def generator_apply(spec, f: Callable[[np.ndarray], float], x) -> float:
    """Finite-difference estimate of ``(Delta f - grad V . grad f)(x)``.

    First derivatives use central differences with step
    ``eps**(1/3) * (1 + |x|_inf)``, second derivatives use
    ``eps**(1/4) * (1 + |x|_inf)`` (round-off/truncation balance of each stencil).
    """
    pot = _potential(spec)
    x = check_domain(pot, x).astype(float)
    scale = 1.0 + float(np.max(np.abs(x)))
    eps = np.finfo(float).eps
    h1 = eps ** (1.0 / 3.0) * scale
    h2 = eps ** 0.25 * scale
    f0 = float(f(x))
    if not np.isfinite(f0):
        raise NonFiniteError("f is not finite at x")
    d = x.shape[0]
    grad = np.empty(d)
    lap = 0.0
    for i in range(d):
        e = np.zeros(d)
        e[i] = h1
        fp, fm = float(f(x + e)), float(f(x - e))
        e[i] = h2
        gp, gm = float(f(x + e)), float(f(x - e))
        if not np.all(np.isfinite([fp, fm, gp, gm])):
            raise NonFiniteError("f is not finite near x")
        grad[i] = (fp - fm) / (2.0 * h1)
        lap += (gp - 2.0 * f0 + gm) / (h2 * h2)
    return lap - float(grad_potential(pot, x) @ grad)


# ---------------------------------------------------------------------------
# spectral data
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AffineMap:
    """``T(x) = A x + b``; row ``i`` of ``A`` drives the eigenfunction ``f_i``."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(A.shape[0])
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def k(self) -> int:
        return self.A.shape[0]

    def __call__(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.A.T + self.b

    @property
    def dim(self) -> int:
        """Input dimension ``d``."""
        return self.A.shape[1]

    def row(self, i: int) -> np.ndarray:
        return self.A[i]

    def rmatvec(self, y) -> np.ndarray:
        """``A^T y``."""
        return self.A.T @ np.asarray(y, dtype=float)

    def head(self, k: int) -> "AffineMap":
        """Map made of the first ``k`` eigenfunctions."""
        return AffineMap(self.A[:k], self.b[:k])

    def top_direction(self) -> np.ndarray:
        """Unit vector along the first coefficient row."""
        a = self.row(0)
        return a / np.linalg.norm(a)


class ScaledIdentityMap(AffineMap):
    """``T(x) = s x + b`` without storing the ``d x d`` matrix (OU in high dimension)."""

    def __init__(self, scale: float, b):
        b = np.asarray(b, dtype=float).ravel().copy()
        b.setflags(write=False)
        object.__setattr__(self, "scale", float(scale))
        object.__setattr__(self, "b", b)

    @property
    def A(self) -> np.ndarray:
        A = self.scale * np.eye(self.b.size)
        A.setflags(write=False)
        return A

    @property
    def k(self) -> int:
        return self.b.size

    @property
    def dim(self) -> int:
        return self.b.size

    def __call__(self, x) -> np.ndarray:
        return self.scale * np.asarray(x, dtype=float) + self.b

    def row(self, i: int) -> np.ndarray:
        r = np.zeros(self.b.size)
        r[i] = self.scale
        return r

    def rmatvec(self, y) -> np.ndarray:
        return self.scale * np.asarray(y, dtype=float)

    def head(self, k: int) -> AffineMap:
        A = np.zeros((k, self.b.size))
        A[np.arange(k), np.arange(k)] = self.scale
        return AffineMap(A, self.b[:k])

    def __repr__(self):
        return f"ScaledIdentityMap(scale={self.scale!r}, d={self.b.size})"


@dataclass(frozen=True)
class SpectralData:
    lambda1: float
    k1: int
    eigenmap: AffineMap = field(compare=False)


def spectral_data(spec, d: int) -> SpectralData:
    """Gap, multiplicity and an orthonormal affine basis of the first eigenspace."""
    pot = _potential(spec)
    rho = pot.rho
    m = pot.shift(d)
    if pot.family is Family.OU:
        return SpectralData(rho, d, ScaledIdentityMap(np.sqrt(rho), -np.sqrt(rho) * m))
    coef = np.sqrt(rho / d)
    A = np.full((1, d), coef)
    return SpectralData(rho, 1, AffineMap(A, np.array([-coef * m.sum()])))


# ---------------------------------------------------------------------------
# initial sets
# ---------------------------------------------------------------------------

class InitialSet:
    """Base class for the sets of initial conditions ``S``."""

    def sup_sq_distance(self, point) -> float:
        """``sup_{x0 in S} |x0 - point|^2``."""
        raise NotImplementedError

    def witnesses(self, direction) -> np.ndarray:
        """Finite subset used when a supremum over ``S`` must be evaluated pointwise."""
        raise NotImplementedError

    def descriptor(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Ball(InitialSet):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not (np.isfinite(self.radius) and self.radius >= 0):
            raise EmptySetError("ball radius must be finite and >= 0")

    def sup_sq_distance(self, point) -> float:
        return float((np.linalg.norm(self.center - point) + self.radius) ** 2)

    def witnesses(self, direction) -> np.ndarray:
        u = np.asarray(direction, dtype=float)
        u = u / np.linalg.norm(u)
        return np.stack([self.center + self.radius * u, self.center])

    def descriptor(self) -> str:
        return f"ball(r={self.radius!r})"


@dataclass(frozen=True, eq=False)
class Cube(InitialSet):
    center: np.ndarray
    half_width: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not (np.isfinite(self.half_width) and self.half_width >= 0):
            raise EmptySetError("cube half width must be finite and >= 0")

    def sup_sq_distance(self, point) -> float:
        return float(np.sum((np.abs(self.center - point) + self.half_width) ** 2))

    def witnesses(self, direction) -> np.ndarray:
        s = np.sign(np.asarray(direction, dtype=float))
        s[s == 0] = 1.0
        return np.stack([self.center + self.half_width * s, self.center])

    def descriptor(self) -> str:
        return f"cube(c={self.half_width!r})"


@dataclass(frozen=True, eq=False)
class Finite(InitialSet):
    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.size == 0:
            raise EmptySetError("finite initial set is empty")
        object.__setattr__(self, "points", pts)

    def sup_sq_distance(self, point) -> float:
        return float(np.max(np.sum((self.points - point) ** 2, axis=1)))

    def witnesses(self, direction) -> np.ndarray:
        return self.points

    def descriptor(self) -> str:
        return f"finite(n={len(self.points)})"


def sup_lambda(data: SpectralData, initial_set: InitialSet) -> float:
    """``sup_{x0 in S} (k1 + |A x0 + b|^2)``.

    Balls use the exact image-of-a-ball argument (rows of ``A`` orthogonal with
    norm ``sqrt(lambda1)``); cubes take the best corner, computed in closed form
    for one-row and diagonal maps.
    """
    T = data.eigenmap
    if isinstance(initial_set, Finite):
        vals = np.sum(T(initial_set.points) ** 2, axis=1)
        return float(data.k1 + np.max(vals))
    if isinstance(initial_set, Ball):
        off = np.linalg.norm(T(initial_set.center))
        return float(data.k1 + (off + np.sqrt(data.lambda1) * initial_set.radius) ** 2)
    if isinstance(initial_set, Cube):
        c, w = initial_set.center, initial_set.half_width
        if isinstance(T, ScaledIdentityMap):
            return float(data.k1 + np.sum((np.abs(T(c)) + w * abs(T.scale)) ** 2))
        A = T.A
        if T.k == 1:
            best = abs(float(T(c)[0])) + w * float(np.sum(np.abs(A[0])))
            return float(data.k1 + best**2)
        if np.allclose(A, np.diag(np.diag(A))):
            diag = np.diag(A)
            return float(data.k1 + np.sum((np.abs(T(c)) + w * np.abs(diag)) ** 2))
        d = A.shape[1]
        if d > 20:
            raise NotImplementedError("cube supremum for a general eigenmap in d > 20")
        best = max(
            float(np.sum(T(c + w * np.asarray(s)) ** 2)) for s in itertools.product((-1.0, 1.0), repeat=d)
        )
        return float(data.k1 + best)
    raise EmptySetError(f"unsupported initial set {initial_set!r}")
