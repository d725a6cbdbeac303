#
# Licensed under the BSD license.  See full license in LICENSE file.
#

"""Decide second-moment stabilizability from the gain spectrum alone.

With m eigenvalues of magnitude above one, the threshold is

    r = (m - 1) / sum_{|lambda_i| > 1} lambda_i^-2        (r = 0 if m <= 1)

r < 1 is sufficient and r <= 1 necessary. In two dimensions r <= 1 is
necessary and sufficient, so a d = 2 spectrum sitting exactly on r = 1 is
stabilizable, while for d > 2 the exact threshold is left open and reported
as inconclusive.

Cases:
    all_stable  every |lambda_i| < 1, zero control suffices
    case_1a     every |lambda_i| > 1 and every target fraction v_i > 0
    case_1b     every |lambda_i| > 1 but some v_i <= 0 (this forces r > 1)
    case_2      stable and unstable eigenvalues mixed; decided on the
                embedded unstable subsystem

Eigenvalues within epsilon of the unit circle are pushed outward by
2 epsilon (a larger magnitude can never make a system easier to stabilize)
and the verdict is marked boundary sensitive.
"""

import collections
import logging
import math

import numpy as np

import core
import weights


DEFAULT_EPSILON = 1e-9

ALL_STABLE = 'all_stable'
CASE_1A = 'case_1a'
CASE_1B = 'case_1b'
CASE_2 = 'case_2'

STABILIZABLE = 'stabilizable'
UNSTABILIZABLE = 'unstabilizable'
INCONCLUSIVE = 'inconclusive_at_threshold'


class StabilityVerdict(collections.namedtuple(
        'StabilityVerdict',
        ['r', 'm', 'case', 'decision', 'subsystem', 'boundary_sensitive'])):
    """Threshold, case and decision for one spectrum.

    subsystem is the unstable part of the (perturbed) spectrum in the order
    given; boundary_sensitive says an eigenvalue sat on the unit circle.
    """
    __slots__ = ()

    @property
    def stabilizable(self):
        return self.decision == STABILIZABLE


def _perturb(spec, epsilon):
    """Push eigenvalues with ||lambda| - 1| <= epsilon outward by 2 epsilon."""
    values = spec.as_array()
    near = np.abs(np.abs(values) - 1.0) <= epsilon
    if not near.any():
        return spec, False
    logging.info('Eigenvalues %s within %g of the unit circle, perturbing '
                 'outward', values[near], epsilon)
    values = np.where(near, np.sign(values) * (np.abs(values) + 2.0 * epsilon),
                      values)
    return core.GainSpectrum(values), True


def subsystem_spectrum(spec):
    """The eigenvalues with |lambda| > 1, in the order given.

    :rtype: core.GainSpectrum
    """
    return core.GainSpectrum([value for value in spec.lambdas
                              if abs(value) > 1.0])


def unstable_coordinates(spec, epsilon=DEFAULT_EPSILON):
    """Zero-based coordinates of the unstable eigenvalues after perturbation.

    These are the coordinates the projector T keeps, in the order given;
    spec.select of them matches classify(spec).subsystem up to the
    perturbation.

    :rtype: tuple
    """
    perturbed, _ = _perturb(spec, epsilon)
    return tuple(i for i, value in enumerate(perturbed.lambdas)
                 if abs(value) > 1.0)


def _threshold_unstable(unstable):
    if unstable.dim <= 1:
        return 0.0
    return (unstable.dim - 1) / float(unstable.inverse_squared().sum())


def threshold_r(spec, epsilon=DEFAULT_EPSILON):
    """(m - 1) / sum of lambda^-2 over the unstable eigenvalues.

    :param spec: gain spectrum
    :type spec: core.GainSpectrum

    :param epsilon: unit-circle tolerance
    :type epsilon: float

    :return: r, zero when at most one eigenvalue is unstable
    :rtype: float
    """
    perturbed, _ = _perturb(spec, epsilon)
    return _threshold_unstable(subsystem_spectrum(perturbed))


def threshold_2d(l1, l2):
    """(1/l1^2 + 1/l2^2)^-1 over both eigenvalues of a 2D system.

    Stable eigenvalues are included here. This never disagrees with
    threshold_r about r < 1: with one stable eigenvalue both are below one,
    and with two unstable ones they coincide.
    """
    if l1 == 0.0 or l2 == 0.0:
        raise core.Singular('eigenvalues must be nonzero')
    return 1.0 / (1.0 / (l1 * l1) + 1.0 / (l2 * l2))


def classify(spec, epsilon=DEFAULT_EPSILON):
    """Run the full case analysis for a spectrum.

    :param spec: gain spectrum
    :type spec: core.GainSpectrum

    :param epsilon: unit-circle and threshold tolerance
    :type epsilon: float

    :rtype: StabilityVerdict

    :raises: :InvariantViolation: if a case_1b spectrum has r <= 1
    """
    perturbed, sensitive = _perturb(spec, epsilon)
    unstable = subsystem_spectrum(perturbed)
    m = unstable.dim

    if m == 0:
        return StabilityVerdict(0.0, 0, ALL_STABLE, STABILIZABLE, unstable,
                                sensitive)

    r = _threshold_unstable(unstable)
    if m < spec.dim:
        case = CASE_2
    elif weights.target_fractions(unstable, 1.0).all_positive:
        case = CASE_1A
    else:
        case = CASE_1B
        if not r > 1.0:
            raise core.InvariantViolation(
                'case_1b spectrum %s has r = %.17g <= 1' % (spec.lambdas, r))

    if abs(r - 1.0) <= epsilon:
        decision = STABILIZABLE if spec.dim == 2 else INCONCLUSIVE
    elif r < 1.0:
        decision = STABILIZABLE
    else:
        decision = UNSTABILIZABLE

    logging.debug('classify %s -> r=%.17g m=%d %s %s', spec.lambdas, r, m,
                  case, decision)
    return StabilityVerdict(r, m, case, decision, unstable, sensitive)


def boundary_lambda2_two_d(l1):
    """lambda_2 on the r = 1 curve of a 2D system, for lambda_1 = l1 > 0.

    Cells with lambda_2 below the returned value are stabilizable; inf when
    l1 <= 1 (at most one unstable eigenvalue).
    """
    if l1 <= 1.0:
        return math.inf
    return math.sqrt(l1 * l1 / (l1 * l1 - 1.0))


def boundary_lambda2_four_d_paired(l1):
    """lambda_2 on the r = 1 curve of the spectrum (l1, l1, lambda_2, lambda_2).

    sqrt(2) when l1 <= 1, sqrt(2 l1^2 / (3 l1^2 - 2)) for 1 < l1 <= sqrt(2),
    and 0 beyond sqrt(2), where nothing is stabilizable.
    """
    if l1 <= 1.0:
        return math.sqrt(2.0)
    if l1 * l1 > 2.0:
        return 0.0
    return math.sqrt(2.0 * l1 * l1 / (3.0 * l1 * l1 - 2.0))


def erasure_threshold(spec, drop_probability):
    """drop_probability times the product of the unstable lambda^2.

    The classical criterion for controls erased with a given probability
    (stabilizable iff <= 1); only the product of the eigenvalues matters
    there, unlike r. Reported for comparison.
    """
    if not 0.0 <= drop_probability <= 1.0:
        raise ValueError('drop probability must be in [0, 1]')
    unstable = subsystem_spectrum(spec)
    return drop_probability * float(np.prod(unstable.squared()))
