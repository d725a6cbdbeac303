#
# Licensed under the BSD license.  See full license in LICENSE file.
#

"""Uniform sampling on the unit hypersphere S_d.

Directions are drawn the usual way (i.i.d. standard normals, then
normalized). Also here: the polar-angle law used to grow a direction from
S_d to S_{d+1}, projection of a direction onto some of its coordinates, and
the surface area of S_d by the product-of-integrals formula.

Every random draw goes through a SeededRng so that a (seed, stream_id) pair
always reproduces the same sequence; simulation trial k uses stream k.

Third party dependencies:

numpy: random generation (PCG64), Gauss-Legendre nodes
    http://www.numpy.org/

scipy: tabulation, monotone interpolation, gamma and incomplete beta
    https://scipy.org/
"""

import functools
import logging
import math

import numpy as np
from numpy.polynomial import legendre
from scipy import integrate
from scipy import interpolate
from scipy import special

import core


THETA_TABLE_POINTS = 4096
AREA_QUADRATURE_NODES = 256
DEGENERATE_NORM = 1e-300

_THETA_MAX = np.nextafter(np.pi, 0.0)


class ZeroDimension(core.RandomActuationError, ValueError):
    pass


class ThetaOutOfRange(core.RandomActuationError, ValueError):
    pass


class DegenerateProjection(core.RandomActuationError, ArithmeticError):
    """The kept block of a direction is (numerically) zero."""


class SeededRng(object):
    """A reproducible random stream identified by (seed, stream_id).

    Streams with the same seed and different stream_id are independent;
    PCG64 output does not depend on the platform.
    """

    def __init__(self, seed, stream_id=0):
        """
        :param seed: master seed
        :type seed: int

        :param stream_id: index of the substream (the trial index in
                          ensembles)
        :type stream_id: int
        """
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        sequence = np.random.SeedSequence(self.seed,
                                          spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.PCG64(sequence))

    def __repr__(self):
        return 'SeededRng(seed=%d, stream_id=%d)' % (self.seed,
                                                      self.stream_id)

    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)

    def uniform(self, size=None):
        return self.generator.random(size)


def _check_dimension(d):
    if d < 1:
        raise ZeroDimension('hypersphere dimension must be >= 1, got %d' % d)


def row_norm_sq(rows):
    """Squared Euclidean norm of each row, summed coordinate by coordinate.

    The explicit left-to-right sum makes the result independent of how
    many rows are processed together.
    """
    total = rows[..., 0] * rows[..., 0]
    for k in range(1, rows.shape[-1]):
        total = total + rows[..., k] * rows[..., k]
    return total


def sample_uniform(d, rng):
    """Draw one direction uniformly from S_d.

    :param d: dimension of the ambient space
    :type d: int

    :param rng: random stream
    :type rng: SeededRng

    :return: a unit vector
    :rtype: core.ActuationDirection
    """
    _check_dimension(d)
    while True:
        z = rng.standard_normal(d)
        norm = math.sqrt(float(row_norm_sq(z[np.newaxis, :])[0]))
        if norm > 0.0:
            return core.ActuationDirection(z / norm)
        logging.debug('All-zero Gaussian draw in %r, resampling', rng)


def sample_uniform_batch(d, n, rng):
    """Draw n directions uniformly from S_d.

    :return: array of shape (n, d) with unit rows
    :rtype: numpy.ndarray
    """
    _check_dimension(d)
    z = rng.standard_normal((n, d))
    norm_sq = row_norm_sq(z)
    for row in np.flatnonzero(norm_sq == 0.0):
        while norm_sq[row] == 0.0:
            z[row] = rng.standard_normal(d)
            norm_sq[row] = row_norm_sq(z[row][np.newaxis, :])[0]
    return z / np.sqrt(norm_sq)[:, np.newaxis]


@functools.lru_cache(maxsize=64)
def _theta_inverse_cdf(d):
    """Inverse CDF of the density proportional to (sin theta)^(d-1)."""
    theta = np.linspace(0.0, np.pi, THETA_TABLE_POINTS)
    density = np.sin(theta) ** (d - 1)
    density[0] = 1.0 if d == 1 else 0.0
    density[-1] = density[0]
    cdf = integrate.cumulative_trapezoid(density, theta, initial=0.0)
    cdf /= cdf[-1]

    # High powers of sin underflow near the poles; keep a strictly
    # increasing abscissa for the interpolant.
    keep = np.concatenate(([True], np.diff(cdf) > 0.0))
    return interpolate.PchipInterpolator(cdf[keep], theta[keep])


def sample_theta(d, rng, size=None):
    """Draw a polar angle with density proportional to (sin theta)^(d-1).

    :param d: dimension of the sphere being expanded from
    :type d: int

    :param rng: random stream
    :type rng: SeededRng

    :param size: number of samples, or None for a scalar
    :type size: int | None

    :return: angle(s) in [0, pi)
    :rtype: float | numpy.ndarray
    """
    _check_dimension(d)
    u = rng.uniform(size)
    theta = np.clip(_theta_inverse_cdf(d)(u), 0.0, _THETA_MAX)
    if size is None:
        return float(theta)
    return theta


def expand(b, theta):
    """Lift a direction from S_d to S_{d+1}.

    :param b: unit vector in S_d
    :type b: core.ActuationDirection

    :param theta: polar angle in [0, pi)
    :type theta: float

    :return: (b_1 sin theta, ..., b_d sin theta, cos theta)
    :rtype: core.ActuationDirection
    """
    if not 0.0 <= theta < np.pi:
        raise ThetaOutOfRange('theta must lie in [0, pi), got %r' % theta)
    lifted = np.append(b.as_array() * math.sin(theta), math.cos(theta))
    return core.ActuationDirection(lifted)


def project(b, m, coordinates=None):
    """Keep m coordinates of a direction and renormalize.

    :param b: unit vector
    :type b: core.ActuationDirection

    :param m: number of coordinates kept, 1 <= m <= b.dim
    :type m: int

    :param coordinates: zero-based coordinates kept, in that order; the
                        first m when None
    :type coordinates: sequence | None

    :return: the normalized block
    :rtype: core.ActuationDirection

    :raises: :DegenerateProjection: if the kept block is (numerically)
             zero; callers resample
    """
    if not 1 <= m <= b.dim:
        raise core.DimensionMismatch('cannot keep %d of %d coordinates'
                                     % (m, b.dim))
    if coordinates is None:
        coordinates = range(m)
    core.check_dimensions(m, len(coordinates), 'coordinate list')
    head = b.as_array()[list(coordinates)]
    norm = np.linalg.norm(head)
    if norm < DEGENERATE_NORM:
        raise DegenerateProjection('kept coordinates %s vanish'
                                   % list(coordinates))
    return core.ActuationDirection(head / norm)


def projected_norm_sq_cdf(d, m, x):
    """CDF of ||T B||^2 for B uniform on S_d and T keeping m coordinates.

    ||T B||^2 follows Beta(m/2, (d-m)/2).
    """
    if not 1 <= m < d:
        raise ValueError('need 1 <= m < d, got m=%d, d=%d' % (m, d))
    return special.betainc(0.5 * m, 0.5 * (d - m), x)


@functools.lru_cache(maxsize=1)
def _area_nodes():
    nodes, weights = legendre.leggauss(AREA_QUADRATURE_NODES)
    return 0.5 * np.pi * (nodes + 1.0), 0.5 * np.pi * weights


def sphere_area(d):
    """Surface area of S_d as 2 pi times a product of sine-power integrals.

    :param d: ambient dimension, d >= 2
    :type d: int

    :return: the area (2 pi for the circle)
    :rtype: float
    """
    if d < 2:
        raise ValueError('sphere_area needs d >= 2, got %d' % d)
    phi, weights = _area_nodes()
    area = 2.0 * np.pi
    for k in range(1, d - 1):
        area *= float(np.dot(weights, np.sin(phi) ** (d - k - 1)))
    return area


def sphere_area_closed_form(d):
    """2 pi^(d/2) / Gamma(d/2), the cross-check for sphere_area."""
    return 2.0 * np.pi ** (0.5 * d) / special.gamma(0.5 * d)
