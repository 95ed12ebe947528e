"""Counter-based Gaussian noise.

Each normal draw is a pure function of ``(seed, stream, particle, step, level,
substep, coordinate)``. A key is built with chained SplitMix64 finalisers; each
coordinate then hashes ``(key, coordinate, attempt)`` and feeds the words to a
128-layer ziggurat (Doornik's ZIGNOR layout; ~99% of draws cost one hash).
Draws therefore never depend on how particles are split across threads, and
retried (halved) steps get fresh noise without disturbing any other step.

``normal_numba``/``fill_normals`` are used inside compiled loops;
``normal_block`` is a numpy twin used as a reference in tests.
"""

from __future__ import annotations

import math

import numba
import numpy as np
from numba import njit, prange

# the bundled TBB is too old for numba; prefer OpenMP, then the workqueue
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

__all__ = [
    "STREAM_SIM",
    "STREAM_DIRECTIONS",
    "STREAM_INIT",
    "STREAM_BOOTSTRAP",
    "RNG_RULE",
    "normal_numba",
    "fill_normals",
    "normal_matrix",
    "normal_block",
    "uniform_block",
]

STREAM_SIM = 1
STREAM_DIRECTIONS = 2
STREAM_INIT = 3
STREAM_BOOTSTRAP = 4
RNG_RULE = "splitmix64-key/ziggurat128/v1"

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_S32 = np.uint64(32)
_MASK7 = np.uint64(127)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


def _ziggurat_tables(c: int = 128, r: float = 3.442619855899, v: float = 9.91256303526217e-3):
    x = np.zeros(c + 1)
    f = math.exp(-0.5 * r * r)
    x[0] = v / f
    x[1] = r
    x[c] = 0.0
    for i in range(2, c):
        x[i] = math.sqrt(-2.0 * math.log(v / x[i - 1] + f))
        f = math.exp(-0.5 * x[i] * x[i])
    ratio = x[1:] / x[:-1]
    return x, ratio


_ZX, _ZR = _ziggurat_tables()
_ZTAIL = float(_ZX[1])


@njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True, inline="always")
def _key(seed, stream, particle, step, level, substep):
    h = _mix(np.uint64(seed) * _GOLDEN + np.uint64(stream))
    h = _mix(h + np.uint64(particle))
    h = _mix(h + np.uint64(step))
    h = _mix(h + ((np.uint64(level) << _S32) | np.uint64(substep)))
    return h


@njit(cache=True, inline="always")
def _unit(w):
    return (np.float64(w >> _S11) + 0.5) * _INV53  # open interval (0, 1)


@njit(cache=True, inline="always")
def _ziggurat(base):
    j = np.uint64(0)
    while True:
        w = _mix(base + j * _GOLDEN)
        j += np.uint64(1)
        i = np.int64(w & _MASK7)
        u = 2.0 * _unit(w) - 1.0
        if abs(u) < _ZR[i]:
            return u * _ZX[i]
        if i == 0:
            while True:
                a = _unit(_mix(base + j * _GOLDEN))
                b = _unit(_mix(base + (j + np.uint64(1)) * _GOLDEN))
                j += np.uint64(2)
                x = np.log(a) / _ZTAIL
                y = np.log(b)
                if -2.0 * y >= x * x:
                    return x - _ZTAIL if u < 0 else _ZTAIL - x
        x = u * _ZX[i]
        f0 = np.exp(-0.5 * (_ZX[i] * _ZX[i] - x * x))
        f1 = np.exp(-0.5 * (_ZX[i + 1] * _ZX[i + 1] - x * x))
        uw = _unit(_mix(base + j * _GOLDEN))
        j += np.uint64(1)
        if f1 + uw * (f0 - f1) < 1.0:
            return x


@njit(cache=True, inline="always")
def _coord_base(h, coord):
    # attempt j of coordinate c hashes (h xor c*M2) + j*golden
    return h ^ (np.uint64(coord) * _M2)


@njit(cache=True)
def normal_numba(seed, stream, particle, step, level, substep, coord):
    """One standard normal, keyed by the full counter tuple."""
    h = _key(seed, stream, particle, step, level, substep)
    return _ziggurat(_coord_base(h, coord))


@njit(cache=True)
def fill_normals(out, seed, stream, particle, step, level, substep):
    """Write the noise vector of one ``(particle, step, level, substep)`` into ``out``."""
    h = _key(seed, stream, particle, step, level, substep)
    for c in range(out.shape[0]):
        out[c] = _ziggurat(_coord_base(h, c))


@njit(cache=True, parallel=True)
def _block(out, seed, stream, step, level, substep, offset):
    for p in prange(out.shape[0]):
        fill_normals(out[p], seed, stream, offset + p, step, level, substep)


def normal_matrix(seed, stream, n, d, step=0, level=0, substep=0, particle_offset=0) -> np.ndarray:
    """Compiled ``(n, d)`` block; row ``i`` is particle ``particle_offset + i``."""
    out = np.empty((n, d))
    _block(out, np.uint64(seed), stream, step, level, substep, particle_offset)
    return out


# numpy twin -----------------------------------------------------------------

def _mix_np(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _unit_np(w):
    return ((np.asarray(w) >> _S11).astype(np.float64) + 0.5) * _INV53


def _zig_scalar(base) -> float:
    # reference path for the ~1% of draws that leave the rectangles
    def word(j):
        return _mix_np(base + np.uint64(j) * _GOLDEN)

    with np.errstate(over="ignore"):
        j = 0
        while True:
            w = word(j)
            j += 1
            i = int(w & _MASK7)
            u = 2.0 * float(_unit_np(w)) - 1.0
            if abs(u) < _ZR[i]:
                return u * _ZX[i]
            if i == 0:
                while True:
                    a, b = float(_unit_np(word(j))), float(_unit_np(word(j + 1)))
                    j += 2
                    x = math.log(a) / _ZTAIL
                    y = math.log(b)
                    if -2.0 * y >= x * x:
                        return x - _ZTAIL if u < 0 else _ZTAIL - x
            x = u * _ZX[i]
            f0 = math.exp(-0.5 * (_ZX[i] ** 2 - x * x))
            f1 = math.exp(-0.5 * (_ZX[i + 1] ** 2 - x * x))
            uw = float(_unit_np(word(j)))
            j += 1
            if f1 + uw * (f0 - f1) < 1.0:
                return x


def _bases(seed, stream, n, d, step, level, substep, particle_offset):
    with np.errstate(over="ignore"):
        p = np.arange(particle_offset, particle_offset + n, dtype=np.uint64)[:, None]
        c = np.arange(d, dtype=np.uint64)[None, :]
        h = _mix_np(np.uint64(seed) * _GOLDEN + np.uint64(stream))
        h = _mix_np(h + p)
        h = _mix_np(h + np.uint64(step))
        h = _mix_np(h + ((np.uint64(level) << _S32) | np.uint64(substep)))
        return h ^ (c * _M2)


def normal_block(seed, stream, n, d, step=0, level=0, substep=0, particle_offset=0) -> np.ndarray:
    """Numpy twin of :func:`normal_matrix`; bit-identical output."""
    base = _bases(seed, stream, n, d, step, level, substep, particle_offset)
    with np.errstate(over="ignore"):
        w = _mix_np(base)
    i = (w & _MASK7).astype(np.int64)
    u = 2.0 * _unit_np(w) - 1.0
    out = u * _ZX[i]
    slow = ~(np.abs(u) < _ZR[i])
    for idx in zip(*np.nonzero(slow)):
        out[idx] = _zig_scalar(base[idx])
    return out


def uniform_block(seed, stream, n, d, step=0) -> np.ndarray:
    """``(n, d)`` uniforms in ``(0, 1)`` from the same keyed hash."""
    base = _bases(seed, stream, n, d, step, 0, 0, 0)
    with np.errstate(over="ignore"):
        return _unit_np(_mix_np(base ^ _M1))
