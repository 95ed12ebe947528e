import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from cutofflab import rng


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), stream=st.integers(1, 4), step=st.integers(0, 10**9),
       level=st.integers(0, 5), sub=st.integers(0, 3), off=st.integers(0, 10**6))
def test_compiled_and_numpy_paths_agree(seed, stream, step, level, sub, off):
    a = rng.normal_matrix(seed, stream, 7, 5, step, level, sub, off)
    b = rng.normal_block(seed, stream, 7, 5, step, level, sub, off)
    assert np.array_equal(a, b)
    assert rng.normal_numba(np.uint64(seed), stream, off + 3, step, level, sub, 2) == a[3, 2]


def test_counter_keys_are_independent_of_layout():
    big = rng.normal_matrix(11, rng.STREAM_SIM, 50, 4, step=7)
    part = rng.normal_matrix(11, rng.STREAM_SIM, 10, 4, step=7, particle_offset=20)
    assert np.array_equal(big[20:30], part)
    other = rng.normal_matrix(11, rng.STREAM_INIT, 50, 4, step=7)
    assert not np.array_equal(big, other)


def test_normal_distribution():
    z = rng.normal_matrix(3, rng.STREAM_SIM, 200000, 1)[:, 0]
    assert abs(z.mean()) < 5 / math.sqrt(z.size)
    assert abs(z.var() - 1) < 5 * math.sqrt(2 / z.size)
    assert abs(stats.skew(z)) < 0.02
    assert abs(stats.kurtosis(z)) < 0.04
    assert stats.kstest(z, "norm").pvalue > 1e-3
    # the ziggurat tail beyond r = 3.4426 must be populated with the right mass
    tail = np.mean(np.abs(z) > 3.5)
    assert tail == pytest.approx(2 * stats.norm.sf(3.5), rel=0.25)


def test_coordinates_uncorrelated():
    z = rng.normal_matrix(5, rng.STREAM_SIM, 50000, 6)
    c = np.corrcoef(z.T)
    assert np.max(np.abs(c - np.eye(6))) < 0.03


def test_uniform_block():
    u = rng.uniform_block(9, rng.STREAM_BOOTSTRAP, 1000, 50)
    assert np.all((u > 0) & (u < 1))
    assert stats.kstest(u.ravel(), "uniform").pvalue > 1e-3
    assert np.array_equal(u, rng.uniform_block(9, rng.STREAM_BOOTSTRAP, 1000, 50))
