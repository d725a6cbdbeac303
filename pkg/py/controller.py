#
# Licensed under the BSD license.  See full license in LICENSE file.
#

"""Control laws.

greedy_control is the one-step optimal control for a weight matrix W:

    u* = - B^T W A X / (B^T W B)

With stationary weights (stationary_controller) it is optimal at every
step. For spectra mixing stable and unstable eigenvalues the mixed strategy
runs the greedy law on the embedded unstable subsystem (the coordinates with
|lambda| > 1, projector T) and rescales it by 1 / ||T B||, dropping the
control whenever that factor reaches the threshold h. h is chosen so that
controls survive with probability q.

Third party dependencies:

numpy: for array arithmetic
    http://www.numpy.org/

scipy: bisection on the incomplete beta function
    https://scipy.org/
"""

import collections
import logging
import math

import numpy as np
from scipy import optimize

import core
import sphere
import stability
import weights


Q_FLOOR = 0.01
Q_CEILING = 0.99


class NotCase1a(core.RandomActuationError, ValueError):
    """Stationary weights need every |lambda_i| > 1 and every v_i > 0.

    stable holds the zero-based coordinates with |lambda_i| <= 1 after the
    unit-circle perturbation; fractions is None when those were found first.
    """

    def __init__(self, fractions, stable=()):
        if stable:
            message = 'eigenvalues at coordinates %s have |lambda| <= 1' \
                % (list(stable),)
        else:
            message = 'target fractions %s are not all positive' \
                % (fractions.v,)
        super(NotCase1a, self).__init__(message)
        self.fractions = fractions
        self.stable = tuple(stable)


class NotCase2(core.RandomActuationError, ValueError):
    pass


class NotStabilizable(core.RandomActuationError, ValueError):
    pass


class InvalidRange(core.RandomActuationError, ValueError):
    pass


class MixedStrategyParams(collections.namedtuple(
        'MixedStrategyParams',
        ['m', 'q', 'h', 'p_sub', 'r_prime', 'coordinates'])):
    """Parameters of the Case 2 strategy.

    m: unstable subspace dimension
    q: probability that the control survives
    h: drop threshold, control dropped when 1 / ||T b|| >= h
    p_sub: stationary weights of the m-dimensional subsystem for this q
    r_prime: (m - q) / sum of the unstable lambda^-2, the subsystem rate
    coordinates: zero-based coordinates kept by T, p_sub[k] weighs
                 coordinates[k]; the first m when not given
    """
    __slots__ = ()

    def __new__(cls, m, q, h, p_sub, r_prime, coordinates=None):
        if coordinates is None:
            coordinates = range(int(m))
        return super(MixedStrategyParams, cls).__new__(
            cls, m, q, h, p_sub, r_prime,
            tuple(int(i) for i in coordinates))


def greedy_control(w_next, spec, x, b):
    """The scalar u minimizing (A x + b u)^T W (A x + b u).

    :param w_next: weights W[n+1]
    :type w_next: core.WeightMatrix

    :param spec: gain spectrum
    :type spec: core.GainSpectrum

    :param x: state X[n]
    :type x: core.StateVector

    :param b: actuation direction
    :type b: core.ActuationDirection

    :return: u*
    :rtype: float
    """
    core.check_dimensions(spec.dim, w_next.dim, 'weight matrix')
    core.check_dimensions(spec.dim, x.dim, 'state')
    core.check_dimensions(spec.dim, b.dim, 'actuation direction')

    w = w_next.as_array()
    direction = b.as_array()
    drift = spec.as_array() * x.as_array()
    return -float(np.dot(direction * w, drift) /
                  np.dot(w, direction * direction))


def stationary_controller(spec, tol=weights.DEFAULT_TOLERANCE,
                          epsilon=stability.DEFAULT_EPSILON):
    """Stationary weights P* of an all-unstable spectrum with every v_i > 0.

    :param spec: gain spectrum
    :type spec: core.GainSpectrum

    :param epsilon: unit-circle tolerance, |lambda| = 1 counts as unstable
    :type epsilon: float

    :return: P*, normalized so p_1 = 1
    :rtype: core.WeightMatrix

    :raises: :NotCase1a: if some |lambda_i| <= 1 or some target fraction
             is <= 0
    """
    unstable = stability.unstable_coordinates(spec, epsilon)
    if len(unstable) < spec.dim:
        raise NotCase1a(None, [i for i in range(spec.dim)
                               if i not in unstable])
    fractions = weights.target_fractions(spec, 1.0)
    if not fractions.all_positive:
        raise NotCase1a(fractions)
    return weights.solve_weight_fixed_point(fractions, tol)


def drop_threshold(d, m, q):
    """h such that P(||T B|| <= 1 / h) = 1 - q for B uniform on S_d.

    ||T B||^2 is Beta(m/2, (d - m)/2); its (1 - q) quantile is found by
    bisection on the incomplete beta function.

    :param d: ambient dimension
    :type d: int

    :param m: coordinates kept by T, 1 <= m < d
    :type m: int

    :param q: survival probability in (0, 1)
    :type q: float

    :rtype: float
    """
    if not 1 <= m < d:
        raise InvalidRange('need 1 <= m < d, got m=%d, d=%d' % (m, d))
    if not 0.0 < q < 1.0:
        raise InvalidRange('survival probability must be in (0, 1), got %r'
                           % q)

    quantile = optimize.bisect(
        lambda x: sphere.projected_norm_sq_cdf(d, m, x) - (1.0 - q),
        0.0, 1.0, xtol=1e-15, rtol=1e-15, maxiter=200)
    return 1.0 / math.sqrt(quantile)


def _survival_for(m, inverse_sum, r):
    """q from the rule r' = (1 + r) / 2, clamped where that keeps r' < 1."""
    q = m - 0.5 * (1.0 + r) * inverse_sum
    q = max(q, Q_FLOOR)
    if q > Q_CEILING and (m - Q_CEILING) / inverse_sum < 1.0:
        q = Q_CEILING
    return q


def build_mixed_strategy(spec, tol=weights.DEFAULT_TOLERANCE,
                         epsilon=stability.DEFAULT_EPSILON):
    """Choose q, h and the subsystem weights for a stabilizable Case 2 spectrum.

    The unstable eigenvalues may sit anywhere in spec; their coordinates
    are carried in the result. An eigenvalue on the unit circle counts as
    unstable, as in classify.

    :rtype: MixedStrategyParams

    :raises: :NotCase2: unless the spectrum mixes stable and unstable parts
    :raises: :NotStabilizable: if r >= 1
    """
    verdict = stability.classify(spec, epsilon)
    if verdict.case != stability.CASE_2:
        raise NotCase2('spectrum %s is %s, not case_2'
                       % (spec.lambdas, verdict.case))
    if not verdict.r < 1.0:
        raise NotStabilizable('spectrum %s has r = %.17g >= 1'
                              % (spec.lambdas, verdict.r))

    m = verdict.m
    subsystem = verdict.subsystem
    coordinates = stability.unstable_coordinates(spec, epsilon)
    core.check_dimensions(m, len(coordinates), 'unstable coordinates')
    inverse_sum = float(subsystem.inverse_squared().sum())
    q = _survival_for(m, inverse_sum, verdict.r)
    r_prime = (m - q) / inverse_sum
    if not r_prime < 1.0:
        raise core.InvariantViolation('r\' = %.17g >= 1 for q = %.17g'
                                      % (r_prime, q))

    h = drop_threshold(spec.dim, m, q)
    p_sub = weights.solve_weight_fixed_point(
        weights.target_fractions(subsystem, q), tol)
    logging.info('Mixed strategy for %s: coordinates=%s q=%.6f h=%.6f '
                 'r\'=%.6f', spec.lambdas, list(coordinates), q, h, r_prime)
    return MixedStrategyParams(m, q, h, p_sub, r_prime, coordinates)


def mixed_control(params, w_next_sub, spec, x, b):
    """The Case 2 control: lifted subsystem greedy control, or a drop.

    :param params: strategy parameters
    :type params: MixedStrategyParams

    :param w_next_sub: subsystem weights (dimension m)
    :type w_next_sub: core.WeightMatrix

    :param spec: full gain spectrum
    :type spec: core.GainSpectrum

    :param x: full state
    :type x: core.StateVector

    :param b: full actuation direction
    :type b: core.ActuationDirection

    :return: u, zero when the control is dropped
    :rtype: float
    """
    core.check_dimensions(spec.dim, x.dim, 'state')
    core.check_dimensions(spec.dim, b.dim, 'actuation direction')
    core.check_dimensions(params.m, w_next_sub.dim, 'subsystem weights')

    kept = list(params.coordinates)
    if max(kept) >= spec.dim:
        raise core.DimensionMismatch('coordinates %s outside dimension %d'
                                     % (kept, spec.dim))
    head = b.as_array()[kept]
    gain = float(np.linalg.norm(head))
    if gain * params.h <= 1.0:
        return 0.0

    sub_direction = core.ActuationDirection(head / gain)
    sub_state = core.StateVector(x.as_array()[kept])
    u_sub = greedy_control(w_next_sub, spec.select(kept), sub_state,
                           sub_direction)
    return u_sub / gain
