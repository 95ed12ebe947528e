"""Independent reference values frozen into the test-suite.

Run ``python tests/oracles/generate.py`` to regenerate; nothing here imports
the package under test except for the inputs' conventions.

* TV: the set {dnu/dmu > 1} of two isotropic Gaussians is a ball or a ball's
  complement, so TV = |P_nu(A) - P_mu(A)| with noncentral chi-square cdfs.
* KL / W2: general full-covariance Gaussian formulas (logdet, sqrtm).
* chi^2 and Fisher: products / sums of 1-d quadratures over coordinates.
"""

import math

import numpy as np
from scipy import integrate, linalg, stats


def tv_ncx2(m1, v1, m2, v2):
    m1, m2 = np.asarray(m1, float), np.asarray(m2, float)
    k = m1.size
    a = 1 / (2 * v2) - 1 / (2 * v1)
    b = m1 / v1 - m2 / v2
    e = -k / 2 * math.log(v1 / v2) - m1 @ m1 / (2 * v1) + m2 @ m2 / (2 * v2)
    # L(x) = a|x|^2 + b.x + e > 0
    c = -b / (2 * a)
    R = (b @ b / (4 * a) - e) / a  # |x - c|^2 compared with R
    def p_in(m, v):
        if R <= 0:
            return 0.0
        return stats.ncx2.cdf(R / v, k, float((m - c) @ (m - c)) / v)
    p1, p2 = p_in(m1, v1), p_in(m2, v2)
    # a > 0 (v1 > v2): A is the complement of the ball, else the ball
    return abs(p1 - p2)


def kl_full(m1, S1, m2, S2):
    k = len(m1)
    S2i = np.linalg.inv(S2)
    dm = np.asarray(m2) - np.asarray(m1)
    return 0.5 * (np.trace(S2i @ S1) + dm @ S2i @ dm - k + np.linalg.slogdet(S2)[1] - np.linalg.slogdet(S1)[1])


def w2_bures(m1, S1, m2, S2):
    r = linalg.sqrtm(S2)
    cross = linalg.sqrtm(r @ S1 @ r)
    dm = np.asarray(m1) - np.asarray(m2)
    return math.sqrt(float(dm @ dm + np.trace(S1 + S2 - 2 * np.real(cross))))


def chi2_quad(m1, v1, m2, v2):
    prod = 1.0
    for a, b in zip(m1, m2):
        f = lambda x: math.exp(2 * stats.norm.logpdf(x, a, math.sqrt(v1)) - stats.norm.logpdf(x, b, math.sqrt(v2)))
        val, _ = integrate.quad(f, a - 40, a + 40, limit=400, epsabs=0, epsrel=1e-12, points=[a, b])
        prod *= val
    return prod - 1.0


def fisher_quad(m1, v1, m2, v2):
    tot = 0.0
    for a, b in zip(m1, m2):
        f = lambda x: stats.norm.pdf(x, a, math.sqrt(v1)) * (-(x - a) / v1 + (x - b) / v2) ** 2
        val, _ = integrate.quad(f, a - 40 * math.sqrt(v1), a + 40 * math.sqrt(v1), epsabs=0, epsrel=1e-13)
        tot += val
    return tot


CASES = {
    "d3": ([0.3, -1.2, 2.0], 0.7, [0.0, 0.5, 1.0], 1.3),
    "d1": ([1.5], 2.5, [0.0], 1.0),
    "d5_same_mean": ([0.0] * 5, 0.6, [0.0] * 5, 1.0),
}

if __name__ == "__main__":
    np.set_printoptions(precision=17)
    for name, (m1, v1, m2, v2) in CASES.items():
        k = len(m1)
        I = np.eye(k)
        print(name, "tv", repr(tv_ncx2(m1, v1, m2, v2)))
        print(name, "kl", repr(float(kl_full(m1, v1 * I, m2, v2 * I))))
        print(name, "w2", repr(w2_bures(m1, v1 * I, m2, v2 * I)))
        print(name, "chi2", repr(chi2_quad(m1, v1, m2, v2)))
        print(name, "fisher", repr(fisher_quad(m1, v1, m2, v2)))
    # cutoff cells: OU rho=1, x0 = sqrt(d) e1, t = (1 +- 0.2) log(d)/2
    # (the Boost ncx2 series stops converging around d = 1e6)
    for d in (100, 1_000, 10_000):
        for eps in (-0.2, 0.2):
            t = (1 + eps) * math.log(d) / 2
            m1 = np.zeros(d)
            m1[0] = math.exp(-t) * math.sqrt(d)
            v1 = -math.expm1(-2 * t)
            print("cutoff", d, eps, "tv", repr(tv_ncx2(m1, v1, np.zeros(d), 1.0)))
