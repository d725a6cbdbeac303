#
# Licensed under the BSD license.  See full license in LICENSE file.
#

"""Domain types shared by every module.

A system under study is X[n+1] = A X[n] + B[n] u[n] where A is symmetric
(and so, by rotation invariance of B[n], diagonal without loss of
generality) and B[n] is a fresh uniformly random unit vector each step.
This module holds the value types for that setup, the reduction of a
symmetric gain matrix to its spectrum and the weighted-norm helpers.

All types are immutable.

Third party dependencies:

numpy: for eigendecomposition and array arithmetic
    http://www.numpy.org/
"""

import collections
import logging

import numpy as np


SYMMETRY_TOLERANCE = 1e-10
SINGULAR_TOLERANCE = 1e-12
UNIT_NORM_TOLERANCE = 1e-12


class RandomActuationError(Exception):
    """Base class for every error raised by this package."""


class NotSymmetric(RandomActuationError, ValueError):
    pass


class Singular(RandomActuationError, ArithmeticError):
    pass


class DimensionMismatch(RandomActuationError, ValueError):
    pass


class NonPositiveWeight(RandomActuationError, ValueError):
    pass


class InvariantViolation(RandomActuationError, RuntimeError):
    """A property the theory guarantees did not hold numerically."""


def check_dimensions(expected, actual, what='vector'):
    """Raise DimensionMismatch unless two dimensions agree.

    :param expected: dimension required
    :type expected: int

    :param actual: dimension supplied
    :type actual: int

    :param what: name used in the error message
    :type what: str
    """
    if expected != actual:
        raise DimensionMismatch('%s has dimension %d, expected %d'
                                % (what, actual, expected))


class GainSpectrum(collections.namedtuple('GainSpectrum', ['lambdas'])):
    """Eigenvalues of the diagonal(ized) gain matrix A.

    The order given is kept, so coordinate i of a state always belongs to
    lambda_i; reduce_symmetric_gain returns the descending-magnitude order.
    Entries with |lambda| = 1 are allowed here, the stability module deals
    with them.
    """
    __slots__ = ()

    def __new__(cls, lambdas):
        values = tuple(float(value) for value in lambdas)
        if not all(np.isfinite(values)):
            raise ValueError('gain spectrum must be finite: %r' % (values,))
        if any(value == 0.0 for value in values):
            raise Singular('gain spectrum has a zero eigenvalue: %r'
                           % (values,))
        return super(GainSpectrum, cls).__new__(cls, values)

    @classmethod
    def from_values(cls, *values):
        return cls(values)

    @property
    def dim(self):
        return len(self.lambdas)

    def as_array(self):
        return np.array(self.lambdas, dtype='float64')

    def squared(self):
        """lambda_i^2, the only form any threshold formula uses."""
        return self.as_array() ** 2

    def inverse_squared(self):
        return 1.0 / self.squared()

    def select(self, coordinates):
        """The entries at the given zero-based coordinates, in that order."""
        return GainSpectrum([self.lambdas[i] for i in coordinates])

    def negated(self):
        return GainSpectrum([-value for value in self.lambdas])


class WeightMatrix(collections.namedtuple('WeightMatrix', ['weights'])):
    """Diagonal positive definite weights w_1..w_d of the norm X^T W X."""
    __slots__ = ()

    def __new__(cls, weights):
        values = tuple(float(value) for value in weights)
        if not values:
            raise DimensionMismatch('weight matrix needs at least one entry')
        if not all(value > 0.0 and np.isfinite(value) for value in values):
            raise NonPositiveWeight('weights must be finite and > 0: %r'
                                    % (values,))
        return super(WeightMatrix, cls).__new__(cls, values)

    @classmethod
    def identity(cls, dim):
        return cls([1.0] * dim)

    @property
    def dim(self):
        return len(self.weights)

    def as_array(self):
        return np.array(self.weights, dtype='float64')

    def scaled(self, factor):
        return WeightMatrix(self.as_array() * factor)

    def normalized(self):
        """Copy scaled so that the largest weight is exactly 1."""
        values = self.as_array()
        return WeightMatrix(values / values.max())


class StateVector(collections.namedtuple('StateVector', ['x'])):
    __slots__ = ()

    def __new__(cls, x):
        values = tuple(float(value) for value in x)
        if not all(np.isfinite(values)):
            raise ValueError('state must be finite: %r' % (values,))
        return super(StateVector, cls).__new__(cls, values)

    @property
    def dim(self):
        return len(self.x)

    def as_array(self):
        return np.array(self.x, dtype='float64')


class ActuationDirection(collections.namedtuple('ActuationDirection', ['b'])):
    """A unit vector on the d-dimensional hypersphere."""
    __slots__ = ()

    def __new__(cls, b, tolerance=UNIT_NORM_TOLERANCE):
        values = tuple(float(value) for value in b)
        norm = np.sqrt(sum(value * value for value in values))
        if not values or abs(norm - 1.0) > tolerance:
            raise ValueError('actuation direction must have unit norm, '
                             'got %r' % norm)
        return super(ActuationDirection, cls).__new__(cls, values)

    @property
    def dim(self):
        return len(self.b)

    def as_array(self):
        return np.array(self.b, dtype='float64')


ZERO = 'zero'
GREEDY = 'greedy'
MIXED = 'mixed'


class ControlPolicy(collections.namedtuple('ControlPolicy',
                                           ['kind', 'weights', 'mixed'])):
    """How the scalar control u[n] is chosen.

    zero: u = 0. greedy: minimize the next-step weighted norm for a fixed
    WeightMatrix. mixed: the Case 2 strategy, carrying a
    controller.MixedStrategyParams (q, h, m, the unstable coordinates and
    the subsystem weights).
    """
    __slots__ = ()

    @classmethod
    def zero(cls):
        return cls(ZERO, None, None)

    @classmethod
    def greedy(cls, weights):
        if not isinstance(weights, WeightMatrix):
            weights = WeightMatrix(weights)
        return cls(GREEDY, weights, None)

    @classmethod
    def from_mixed(cls, params):
        if not 0.0 < params.q < 1.0:
            raise ValueError('survival probability q must be in (0, 1)')
        if not params.h > 1.0:
            raise ValueError('drop threshold h must exceed 1')
        if params.m < 1:
            raise ValueError('unstable subspace must be non-empty')
        coordinates = params.coordinates
        if len(coordinates) != params.m or \
                len(set(coordinates)) != params.m or min(coordinates) < 0:
            raise ValueError('need %d distinct non-negative coordinates, got '
                             '%r' % (params.m, coordinates))
        return cls(MIXED, params.p_sub, params)


def reduce_symmetric_gain(a, symmetry_tolerance=SYMMETRY_TOLERANCE,
                          singular_tolerance=SINGULAR_TOLERANCE):
    """Reduce a symmetric gain matrix to its spectrum.

    :param a: symmetric d x d matrix
    :type a: array_like

    :param symmetry_tolerance: allowed relative asymmetry
    :type symmetry_tolerance: float

    :param singular_tolerance: smallest allowed |eigenvalue| relative to the
                               largest
    :type singular_tolerance: float

    :return: eigenvalues sorted by descending magnitude
    :rtype: GainSpectrum

    :raises: :NotSymmetric: if a is not symmetric within tolerance
    :raises: :Singular: if a has a (relatively) zero eigenvalue
    """
    matrix = np.atleast_2d(np.asarray(a, dtype='float64'))
    if matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatch('gain matrix must be square, got %r'
                                % (matrix.shape,))

    scale = max(np.abs(matrix).max(), np.finfo('float64').tiny)
    asymmetry = np.abs(matrix - matrix.T).max() / scale
    if asymmetry > symmetry_tolerance:
        raise NotSymmetric('gain matrix asymmetry %g exceeds %g'
                           % (asymmetry, symmetry_tolerance))

    eigenvalues = np.linalg.eigvalsh(0.5 * (matrix + matrix.T))
    magnitudes = np.abs(eigenvalues)
    if magnitudes.min() < singular_tolerance * magnitudes.max():
        raise Singular('gain matrix is singular: eigenvalues %s'
                       % eigenvalues)

    order = np.argsort(-magnitudes, kind='stable')
    logging.debug('Reduced %dx%d gain to spectrum %s', matrix.shape[0],
                  matrix.shape[1], eigenvalues[order])
    return GainSpectrum(eigenvalues[order])


def weighted_norm_sq(x, p):
    """Return sum_i p_i x_i^2.

    :param x: state
    :type x: StateVector

    :param p: weights
    :type p: WeightMatrix

    :return: the squared weighted norm
    :rtype: float
    """
    check_dimensions(p.dim, x.dim, 'state')
    values = x.as_array()
    return float(np.dot(p.as_array(), values * values))


def norm_equivalence_bounds(x, p):
    """Return (lower, upper) with lower <= weighted_norm_sq(x, p) <= upper.

    For a diagonal P the operator-norm constants reduce to the smallest and
    largest weight.
    """
    check_dimensions(p.dim, x.dim, 'state')
    weights = p.as_array()
    plain = float(np.dot(x.as_array(), x.as_array()))
    return weights.min() * plain, weights.max() * plain
