#
# Licensed under the BSD license.  See full license in LICENSE file.
#

"""Expectations of quadratic-form ratios over a uniform direction.

The optimal control removes, in expectation, the fraction

    m_i = E[ p_i b_i^2 / sum_k p_k b_k^2 ]

of the weighted energy in coordinate i (B uniform on S_d). These values
drive the weight recursion and the stationary weight solver. Only d = 2 has
a closed form, 1 / (sqrt(p_2 / p_1) + 1); in general we use

    m_i = int_0^inf p_i (1 + 2 t p_i)^(-3/2) prod_{k != i} (1 + 2 t p_k)^(-1/2) dt

which follows from writing B as a normalized standard Gaussian Z (the ratio
is scale free) and 1/S = int_0^inf exp(-t S) dt. The integral is taken over
s in [0, 1) with t = s / (1 - s), breaking the interval where each factor
changes scale. Monte Carlo estimates are the cross-check.

The m_i always sum to one (trace of the expected projection).

Third party dependencies:

numpy: for array arithmetic
    http://www.numpy.org/

scipy: adaptive quadrature
    https://scipy.org/
"""

import collections
import logging
import math

import numpy as np
from scipy import integrate

import core
import sphere


QUADRATURE = 'quadrature'
MONTE_CARLO = 'monte_carlo'

QUADRATURE_EPSABS = 1e-13
QUADRATURE_EPSREL = 1e-12
QUADRATURE_LIMIT = 2000
DEFAULT_MC_SAMPLES = 10 ** 6
MC_CHUNK = 10 ** 5


class RatioExpectationReport(collections.namedtuple(
        'RatioExpectationReport',
        ['values', 'method', 'n_samples', 'std_errors'])):
    """All d expectations plus how they were obtained.

    n_samples and std_errors are None for quadrature.
    """
    __slots__ = ()

    @property
    def total(self):
        return float(np.sum(self.values))


def _as_weights(p):
    if isinstance(p, core.WeightMatrix):
        return p
    return core.WeightMatrix(p)


def closed_form_two_d(alpha):
    """E[p_1 b_1^2 / (p_1 b_1^2 + p_2 b_2^2)] for d = 2, alpha = p_2 / p_1."""
    return 1.0 / (math.sqrt(alpha) + 1.0)


def _breakpoints(weights):
    # Each factor (1 + 2 t p_k) changes regime near t = 1 / (2 p_k).
    scales = 0.5 / weights
    points = np.unique(scales / (1.0 + scales))
    return [float(point) for point in points if 0.0 < point < 1.0]


def ratio_expectation(p, i):
    """E[p_i b_i^2 / sum_k p_k b_k^2] by quadrature.

    :param p: positive weights
    :type p: core.WeightMatrix

    :param i: zero-based coordinate index
    :type i: int

    :return: the expectation, in (0, 1) for d >= 2
    :rtype: float
    """
    weights = _as_weights(p).normalized().as_array()
    if not 0 <= i < len(weights):
        raise core.DimensionMismatch('coordinate %d out of range for d=%d'
                                     % (i, len(weights)))
    if len(weights) == 1:
        return 1.0

    p_i = float(weights[i])
    others = [float(value) for k, value in enumerate(weights) if k != i]

    def integrand(s):
        t = s / (1.0 - s)
        value = p_i * (1.0 + 2.0 * t * p_i) ** -1.5
        for p_k in others:
            value /= math.sqrt(1.0 + 2.0 * t * p_k)
        return value / ((1.0 - s) * (1.0 - s))

    value, error = integrate.quad(integrand, 0.0, 1.0,
                                  points=_breakpoints(weights),
                                  epsabs=QUADRATURE_EPSABS,
                                  epsrel=QUADRATURE_EPSREL,
                                  limit=QUADRATURE_LIMIT)
    logging.debug('ratio_expectation p=%s i=%d -> %.17g (err %.3g)',
                  weights, i, value, error)
    return value


def _quadrature_all(weights):
    def integrand(s):
        t = s / (1.0 - s)
        factors = 1.0 + 2.0 * t * weights
        common = 1.0 / np.sqrt(np.prod(factors))
        return weights / factors * common / ((1.0 - s) * (1.0 - s))

    values, error = integrate.quad_vec(integrand, 0.0, 1.0,
                                       points=_breakpoints(weights),
                                       epsabs=QUADRATURE_EPSABS,
                                       epsrel=QUADRATURE_EPSREL,
                                       limit=QUADRATURE_LIMIT,
                                       norm='max')
    return np.asarray(values, dtype='float64')


def ratio_expectation_mc(p, n_samples=DEFAULT_MC_SAMPLES, rng=None):
    """Monte Carlo estimate of every m_i with standard errors.

    :param p: positive weights
    :type p: core.WeightMatrix

    :param n_samples: number of Gaussian draws
    :type n_samples: int

    :param rng: random stream (defaults to seed 0, stream 0)
    :type rng: sphere.SeededRng

    :rtype: RatioExpectationReport
    """
    weights = _as_weights(p).normalized().as_array()
    rng = rng or sphere.SeededRng(0)
    d = len(weights)
    total = np.zeros(d)
    total_sq = np.zeros(d)
    remaining = n_samples
    while remaining > 0:
        chunk = min(MC_CHUNK, remaining)
        z = rng.standard_normal((chunk, d))
        energy = weights * z * z
        ratios = energy / energy.sum(axis=1)[:, np.newaxis]
        total += ratios.sum(axis=0)
        total_sq += (ratios * ratios).sum(axis=0)
        remaining -= chunk

    mean = total / n_samples
    variance = np.maximum(total_sq / n_samples - mean * mean, 0.0)
    std_errors = np.sqrt(variance / max(n_samples - 1, 1))
    return RatioExpectationReport(mean, MONTE_CARLO, n_samples, std_errors)


def ratio_expectation_all(p, method=QUADRATURE, n_samples=DEFAULT_MC_SAMPLES,
                          rng=None):
    """Every m_i at once.

    :param p: positive weights
    :type p: core.WeightMatrix

    :param method: QUADRATURE (default) or MONTE_CARLO
    :type method: str

    :rtype: RatioExpectationReport
    """
    weights = _as_weights(p)
    if method == MONTE_CARLO:
        return ratio_expectation_mc(weights, n_samples, rng)
    if method != QUADRATURE:
        raise ValueError('unknown expectation method %r' % method)

    normalized = weights.normalized().as_array()
    if len(normalized) == 1:
        values = np.ones(1)
    else:
        values = _quadrature_all(normalized)
    return RatioExpectationReport(values, QUADRATURE, None, None)


def expected_m_matrix(w, method=QUADRATURE, n_samples=DEFAULT_MC_SAMPLES,
                      rng=None):
    """Diagonal of E[M] with M = W B B^T / (B^T W B).

    The off-diagonal entries vanish (each is an odd function of one
    coordinate of B), so only the diagonal is returned.

    :rtype: numpy.ndarray
    """
    return np.array(ratio_expectation_all(w, method, n_samples, rng).values)


def offdiagonal_expectation_mc(w, i, j, n_samples=DEFAULT_MC_SAMPLES,
                               rng=None):
    """Monte Carlo estimate of E[M_ij], i != j, with its standard error.

    :return: (mean, standard error)
    :rtype: tuple
    """
    weights = _as_weights(w).normalized().as_array()
    if i == j:
        raise ValueError('offdiagonal_expectation_mc needs i != j')
    rng = rng or sphere.SeededRng(0)
    d = len(weights)
    total = 0.0
    total_sq = 0.0
    remaining = n_samples
    while remaining > 0:
        chunk = min(MC_CHUNK, remaining)
        z = rng.standard_normal((chunk, d))
        denominator = (weights * z * z).sum(axis=1)
        entries = weights[i] * z[:, i] * z[:, j] / denominator
        total += entries.sum()
        total_sq += (entries * entries).sum()
        remaining -= chunk

    mean = total / n_samples
    variance = max(total_sq / n_samples - mean * mean, 0.0)
    return mean, math.sqrt(variance / max(n_samples - 1, 1))
