#
# Licensed under the BSD license.  See full license in LICENSE file.
#

"""The weight recursion behind the optimal controller.

Going backwards from a terminal weight P = W[N], the cost-to-go weights of
the greedy controller obey

    W[n] = A^T (W[n+1] - q E[M[n]] W[n+1]) A,    M = W B B^T / (B^T W B)

which, W being diagonal, is w_i <- lambda_i^2 w_i (1 - q m_i(w)). q is the
probability that a control survives (q = 1: controls always applied; the
dropped-control variant drops each control with probability 1 - q; q is
always the survival probability here).

A stationary P (W[n] = r P for some r) exists exactly when every target
fraction

    v_i = 1 - (d - q) lambda_i^-2 / sum_j lambda_j^-2

is positive; then r = (d - q) / sum_j lambda_j^-2 and P is found by
solving m_i(P) = v_i / q.

Third party dependencies:

numpy: for array arithmetic
    http://www.numpy.org/

scipy: bisection fallback of the stationary weight solver
    https://scipy.org/
"""

import collections
import logging

import numpy as np
from scipy import optimize

import core
import expectation


DEFAULT_TOLERANCE = 1e-9
DEFAULT_MAX_SWEEPS = 10 ** 4
DEFAULT_DAMPING = 0.5
TARGET_SUM_TOLERANCE = 1e-9
STALL_SWEEPS = 25
STALL_IMPROVEMENT = 1e-3
BRACKET_EXPANSIONS = 8


class NoConvergence(core.RandomActuationError, ArithmeticError):
    def __init__(self, iterations, residual):
        super(NoConvergence, self).__init__(
            'weight fixed point not reached after %d sweeps '
            '(residual %.3g)' % (iterations, residual))
        self.iterations = iterations
        self.residual = residual


class InvalidTargets(core.RandomActuationError, ValueError):
    pass


class TargetFractions(collections.namedtuple('TargetFractions', ['v', 'q'])):
    """Stationary fractions v_i for a spectrum and survival probability q.

    sum(v) equals q; the fixed-point solver works on v / q, which sums to
    one.
    """
    __slots__ = ()

    @property
    def all_positive(self):
        return bool(np.all(np.asarray(self.v) > 0.0))

    @property
    def nonpositive(self):
        """Zero-based indices with v_i <= 0."""
        return [i for i, value in enumerate(self.v) if value <= 0.0]

    @property
    def expectations(self):
        return np.asarray(self.v, dtype='float64') / self.q


class RiccatiTrace(collections.namedtuple('RiccatiTrace',
                                          ['log_weights', 'q'])):
    """Weights W[N], W[N-1], ..., W[N-n_steps], stored as logarithms.

    Row 0 is the terminal weight P. Long horizons overflow in linear scale,
    so only the log form is kept.
    """
    __slots__ = ()

    def __len__(self):
        return self.log_weights.shape[0]

    @property
    def weights_by_step(self):
        return [core.WeightMatrix(np.exp(row)) for row in self.log_weights]

    @property
    def ratios(self):
        """w_{n,i} / w_{n+1,i}, one row per backward step."""
        return np.exp(np.diff(self.log_weights, axis=0))


class DecayEstimate(collections.namedtuple('DecayEstimate',
                                           ['rate', 'max_deviation',
                                            'final_ratios'])):
    __slots__ = ()


def target_fractions(spec, q=1.0):
    """v_i = 1 - (d - q) lambda_i^-2 / sum_j lambda_j^-2.

    :param spec: gain spectrum
    :type spec: core.GainSpectrum

    :param q: survival probability of the control, in (0, 1]
    :type q: float

    :rtype: TargetFractions
    """
    if not 0.0 < q <= 1.0:
        raise ValueError('survival probability q must be in (0, 1], got %r'
                         % q)
    inverse = spec.inverse_squared()
    v = 1.0 - (spec.dim - q) * inverse / inverse.sum()
    return TargetFractions(tuple(float(value) for value in v), float(q))


def stationary_rate(spec, q=1.0):
    """(d - q) / sum_i lambda_i^-2, the per-step factor of stationary weights."""
    return (spec.dim - q) / float(spec.inverse_squared().sum())


def _targets(v):
    if isinstance(v, TargetFractions):
        targets = v.expectations
    else:
        targets = np.asarray(v, dtype='float64')
    if np.any(targets <= 0.0):
        raise InvalidTargets('targets must all be positive: %s' % targets)
    if abs(targets.sum() - 1.0) > TARGET_SUM_TOLERANCE:
        raise InvalidTargets('targets must sum to 1, got %.17g'
                             % targets.sum())
    return targets


def _quadrature_values(weights):
    return expectation.ratio_expectation_all(core.WeightMatrix(weights)).values


def _bracket(gap, center):
    """Widen [center - 1, center + 1] until gap changes sign.

    :return: (low, high), or (None, None) when no sign change turns up
    """
    low, high = center - 1.0, center + 1.0
    for _ in range(BRACKET_EXPANSIONS):
        if gap(low) <= 0.0:
            break
        low -= 2.0 * (high - low)
    else:
        return None, None
    for _ in range(BRACKET_EXPANSIONS):
        if gap(high) >= 0.0:
            return low, high
        high += 2.0 * (high - low)
    return None, None


def _bisection_sweeps(log_p, targets, tol, sweeps_left, expectation_fn):
    """Gauss-Seidel over coordinates 2..d, each solved by bisection.

    m_i increases strictly with p_i and decreases with every other p_j, so
    each one-dimensional root is bracketed and unique.
    """
    residual = np.inf
    for sweep in range(sweeps_left):
        for i in range(1, len(log_p)):
            def gap(value, i=i):
                trial = log_p.copy()
                trial[i] = value
                return expectation_fn(np.exp(trial))[i] - targets[i]

            low, high = _bracket(gap, log_p[i])
            if low is None:
                residual = np.abs(targets - expectation_fn(np.exp(log_p))).max()
                logging.warning('Cannot bracket coordinate %d of the weight '
                                'fixed point', i)
                return log_p, residual, sweep + 1
            log_p[i] = optimize.bisect(gap, low, high, xtol=1e-14)

        residual = np.abs(targets - expectation_fn(np.exp(log_p))).max()
        if residual <= tol:
            return log_p, residual, sweep + 1
    return log_p, residual, sweeps_left


def solve_weight_fixed_point(v, tol=DEFAULT_TOLERANCE,
                             max_sweeps=DEFAULT_MAX_SWEEPS,
                             damping=DEFAULT_DAMPING, expectation_fn=None):
    """Find weights p (p_1 = 1) with m_i(p) = v_i for every i.

    Damped multiplicative sweeps p_i <- p_i (v_i / m_i(p))^damping; if the
    residual stops improving, coordinate-wise bisection takes over.

    :param v: target expectations summing to 1, or a TargetFractions
              (then v / q is used)
    :type v: TargetFractions | list

    :param tol: max-norm tolerance on v - m(p)
    :type tol: float

    :param max_sweeps: iteration budget
    :type max_sweeps: int

    :param damping: exponent of the multiplicative update
    :type damping: float

    :param expectation_fn: maps a weight array to the array m(p); defaults to
                           quadrature
    :type expectation_fn: callable

    :return: the stationary weights, normalized so p_1 = 1
    :rtype: core.WeightMatrix

    :raises: :InvalidTargets: if some v_i <= 0 or sum(v) != 1
    :raises: :NoConvergence: if the budget runs out
    """
    targets = _targets(v)
    expectation_fn = expectation_fn or _quadrature_values
    d = len(targets)
    if d == 1:
        return core.WeightMatrix([1.0])

    log_p = np.zeros(d)
    log_targets = np.log(targets)
    best = np.inf
    stalled = 0
    for sweep in range(max_sweeps):
        m = expectation_fn(np.exp(log_p))
        residual = np.abs(targets - m).max()
        if residual <= tol:
            logging.debug('Weight fixed point after %d sweeps, residual '
                          '%.3g', sweep, residual)
            return core.WeightMatrix(np.exp(log_p))

        if residual < best * (1.0 - STALL_IMPROVEMENT):
            best = residual
            stalled = 0
        else:
            stalled += 1
        if stalled >= STALL_SWEEPS:
            logging.info('Multiplicative iteration stalled at residual %.3g '
                         'after %d sweeps, switching to bisection',
                         residual, sweep)
            log_p, residual, used = _bisection_sweeps(
                log_p, targets, tol, max_sweeps - sweep, expectation_fn)
            if residual <= tol:
                return core.WeightMatrix(np.exp(log_p - log_p[0]))
            raise NoConvergence(sweep + used, residual)

        log_p += damping * (log_targets - np.log(m))
        log_p -= log_p[0]

    m = expectation_fn(np.exp(log_p))
    raise NoConvergence(max_sweeps, np.abs(targets - m).max())


def riccati_step(w_next, spec, q=1.0):
    """One backward step w_i = lambda_i^2 w_next_i (1 - q m_i(w_next)).

    :param w_next: W[n+1]
    :type w_next: core.WeightMatrix

    :param spec: gain spectrum
    :type spec: core.GainSpectrum

    :param q: survival probability of the control
    :type q: float

    :return: W[n]
    :rtype: core.WeightMatrix
    """
    core.check_dimensions(spec.dim, w_next.dim, 'weight matrix')
    if spec.dim == 1 and q == 1.0:
        raise ValueError('a scalar system is cancelled in one step; the '
                         'weights vanish')
    m = expectation.ratio_expectation_all(w_next).values
    return core.WeightMatrix(spec.squared() * w_next.as_array() *
                             (1.0 - q * m))


def riccati_sequence(p, spec, n_steps, q=1.0):
    """Iterate riccati_step backwards n_steps times from W[N] = p.

    :param p: terminal weights
    :type p: core.WeightMatrix

    :param n_steps: number of backward steps, >= 1
    :type n_steps: int

    :rtype: RiccatiTrace
    """
    core.check_dimensions(spec.dim, p.dim, 'weight matrix')
    if n_steps < 1:
        raise ValueError('riccati_sequence needs n_steps >= 1')
    if spec.dim == 1 and q == 1.0:
        raise ValueError('a scalar system is cancelled in one step; the '
                         'weights vanish')

    log_gain = 2.0 * np.log(np.abs(spec.as_array()))
    log_weights = np.empty((n_steps + 1, spec.dim))
    log_weights[0] = np.log(p.as_array())
    for step in range(n_steps):
        current = log_weights[step]
        m = _quadrature_values(np.exp(current - current.max()))
        log_weights[step + 1] = log_gain + current + np.log1p(-q * m)
    return RiccatiTrace(log_weights, float(q))


def measured_decay_rate(trace):
    """Geometric mean of all per-step ratios and the worst deviation from it.

    :param trace: a trace with at least one step
    :type trace: RiccatiTrace

    :rtype: DecayEstimate
    """
    if len(trace) < 2:
        raise ValueError('need a trace of length >= 2')
    ratios = trace.ratios
    rate = float(np.exp(np.log(ratios).mean()))
    deviation = float(np.abs(ratios - rate).max())
    return DecayEstimate(rate, deviation, ratios[-1].copy())
