#
# Licensed under the BSD license.  See full license in LICENSE file.
#

"""Self-verification checks run by the verify command.

Each check is a function taking a VerifyContext and returning a
CheckResult. To install a check, instantiate a Check with its name and
function (see the bottom of this file); run_checks runs every installed
check in installation order.

The checks compare quadrature against closed forms and exact identities, or
Monte Carlo estimates against tolerance bands of four standard errors, so
their outcome does not hinge on the seed. Checks that evaluate m(p) take the
evaluator from the context, which lets a deliberately wrong evaluator be
shown to fail.
"""

import collections
import logging
import math
import time

import numpy as np

import controller
import core
import expectation
import sphere
import stability
import weights


SIGMAS = 4.0


def quadrature_expectation(p):
    """m(p) for a weight array, by quadrature."""
    return expectation.ratio_expectation_all(core.WeightMatrix(p)).values


class VerifyContext(collections.namedtuple(
        'VerifyContext', ['seed', 'samples', 'expectation_fn'])):
    """Inputs shared by every check.

    expectation_fn maps a weight array to the array of m_i.
    """
    __slots__ = ()

    def __new__(cls, seed=0, samples=10 ** 5, expectation_fn=None):
        return super(VerifyContext, cls).__new__(
            cls, int(seed), int(samples),
            expectation_fn or quadrature_expectation)

    def rng(self, stream_id):
        return sphere.SeededRng(self.seed, stream_id)


class CheckResult(collections.namedtuple('CheckResult',
                                         ['name', 'passed', 'detail'])):
    __slots__ = ()


class Check(object):
    """A named verification check.

    The class keeps track of all checks instantiated, so to install a new
    check simply instantiate a new instance of it.
    """
    checks = collections.OrderedDict()

    def __init__(self, name, func):
        self.name = name.lower()
        if self.name in Check.checks:
            logging.warning('%s check is defined more than once, using last '
                            'definition', self.name)
        self.func = func
        Check.checks[self.name] = self

    def run(self, context):
        """Run this check, turning any library error into a failure.

        :param context: shared inputs
        :type context: VerifyContext

        :rtype: CheckResult
        """
        start = time.time()
        try:
            passed, detail = self.func(context)
        except core.RandomActuationError as error:
            passed, detail = False, 'raised %s: %s' % (type(error).__name__,
                                                       error)
        logging.info('Check %s %s in %.2fs', self.name,
                     'passed' if passed else 'FAILED', time.time() - start)
        return CheckResult(self.name, bool(passed), detail)


def run_checks(context=None, names=None):
    """Run the named checks (all of them by default) in installation order.

    :param context: shared inputs, defaults to VerifyContext()
    :type context: VerifyContext

    :param names: subset of check names
    :type names: list

    :return: one result per check
    :rtype: list

    :raises: :ValueError: for an unknown check name
    """
    context = context or VerifyContext()
    if names is None:
        names = list(Check.checks)
    unknown = [name for name in names if name not in Check.checks]
    if unknown:
        raise ValueError('unknown checks: %s' % ', '.join(unknown))
    return [Check.checks[name].run(context) for name in names]


def _within_band(values, target, std_errors):
    band = SIGMAS * np.maximum(std_errors, np.finfo('float64').eps)
    return bool(np.all(np.abs(np.asarray(values) - target) <= band))


def check_threshold_examples(context):
    r_stable = stability.threshold_r(core.GainSpectrum([1.1, 2.4]))
    r_unstable = stability.threshold_r(core.GainSpectrum([0.5, 0.5, 1.5,
                                                          1.5]))
    expected = 1.0 / (1.1 ** -2 + 2.4 ** -2)
    passed = abs(r_stable - expected) <= 1e-9 and r_unstable == 1.125
    return passed, 'r(1.1, 2.4) = %.12f, r(0.5, 0.5, 1.5, 1.5) = %.12f' % (
        r_stable, r_unstable)


def check_trace_identity(context):
    """sum_i m_i(p) = 1 for random weights in d = 2..6."""
    rng = context.rng(0)
    worst = 0.0
    for d in range(2, 7):
        for _ in range(4):
            p = np.exp(rng.uniform(d) * 6.0 - 3.0)
            total = float(np.sum(context.expectation_fn(p)))
            worst = max(worst, abs(total - 1.0))
    return worst <= 1e-10, 'max |sum m_i - 1| = %.3g' % worst


def check_two_d_closed_form(context):
    """m_1 = 1 / (sqrt(alpha) + 1) for p = (1, alpha)."""
    worst = 0.0
    for alpha in np.logspace(-4.0, 4.0, 50):
        value = context.expectation_fn(np.array([1.0, alpha]))[0]
        worst = max(worst, abs(value - expectation.closed_form_two_d(alpha)))
    return worst <= 1e-8, 'max deviation from closed form = %.3g' % worst


def _one_step_ratios(spec, p, q, expectation_fn):
    return spec.squared() * (1.0 - q * expectation_fn(p))


def _random_case_1a(rng, d, q):
    while True:
        spec = core.GainSpectrum(1.05 + 2.0 * rng.uniform(d))
        fractions = weights.target_fractions(spec, q)
        if fractions.all_positive:
            return spec, fractions


def check_geometric_weights(context):
    """Stationary and explicit 2D weights scale by a constant factor.

    One backward step suffices: m(p) is scale free, so a step that scales
    every weight by the same factor repeats forever.
    """
    rng = context.rng(1)
    worst = 0.0
    for _ in range(5):
        l1, l2 = 1.05 + 2.0 * rng.uniform(2)
        spec = core.GainSpectrum([l1, l2])
        p = np.array([l1 ** 4, l2 ** 4])
        expected = l1 * l1 * l2 * l2 / (l1 * l1 + l2 * l2)
        ratios = _one_step_ratios(spec, p, 1.0, context.expectation_fn)
        worst = max(worst, float(np.abs(ratios / expected - 1.0).max()))
    explicit_ok = worst <= 1e-10

    worst_stationary = 0.0
    for d, q in ((3, 1.0), (3, 0.7), (2, 0.3)):
        spec, fractions = _random_case_1a(rng, d, q)
        # Solved with quadrature; the evaluator under test only scores it.
        p = weights.solve_weight_fixed_point(fractions, tol=1e-11)
        ratios = _one_step_ratios(spec, p.as_array(), q,
                                  context.expectation_fn)
        rate = weights.stationary_rate(spec, q)
        worst_stationary = max(worst_stationary,
                               float(np.abs(ratios / rate - 1.0).max()))
    return (explicit_ok and worst_stationary <= 1e-7,
            'explicit 2D deviation %.3g, stationary deviation %.3g'
            % (worst, worst_stationary))


def check_sphere_moments(context):
    """Coordinate moments of uniform directions and the lifting angle."""
    failures = []
    for d in (3, 5):
        b = sphere.sample_uniform_batch(d, context.samples, context.rng(d))
        n = float(context.samples)
        for name, values, target in (
                ('b_i^2', b * b, 1.0 / d),
                ('b_i^4', b ** 4, 3.0 / (d * (d + 2.0))),
                ('b_1 b_2', (b[:, 0] * b[:, 1])[:, np.newaxis], 0.0)):
            means = values.mean(axis=0)
            errors = values.std(axis=0) / math.sqrt(n)
            if not _within_band(means, target, errors):
                failures.append('%s in d=%d' % (name, d))

        theta = sphere.sample_theta(d, context.rng(100 + d), context.samples)
        lifted = np.cos(theta) ** 2
        if not _within_band(lifted.mean(), 1.0 / (d + 1.0),
                            lifted.std() / math.sqrt(n)):
            failures.append('cos^2 theta in d=%d' % d)

    for d in range(2, 11):
        closed = sphere.sphere_area_closed_form(d)
        if abs(sphere.sphere_area(d) - closed) > 1e-8 * closed:
            failures.append('area of S_%d' % d)

    if failures:
        return False, 'outside %g sigma: %s' % (SIGMAS, ', '.join(failures))
    return True, 'moments within %g sigma, areas within 1e-8' % SIGMAS


def check_drop_calibration(context):
    """Controls survive the drop threshold with probability q."""
    failures = []
    for stream, (d, m, q) in enumerate(((3, 1, 0.5), (4, 2, 0.9),
                                        (5, 2, 0.3))):
        h = controller.drop_threshold(d, m, q)
        exact = sphere.projected_norm_sq_cdf(d, m, 1.0 / (h * h))
        if abs(exact - (1.0 - q)) > 1e-10:
            failures.append('quantile for d=%d m=%d' % (d, m))

        b = sphere.sample_uniform_batch(d, context.samples,
                                        context.rng(200 + stream))
        gain = np.sqrt(sphere.row_norm_sq(b[:, :m]))
        survived = float(np.mean(gain * h > 1.0))
        error = math.sqrt(q * (1.0 - q) / context.samples)
        if abs(survived - q) > SIGMAS * error:
            failures.append('survival %.4f vs %.4f for d=%d m=%d'
                            % (survived, q, d, m))
    if failures:
        return False, '; '.join(failures)
    return True, 'survival frequencies within %g sigma of q' % SIGMAS


Check('threshold_examples', check_threshold_examples)
Check('trace_identity', check_trace_identity)
Check('two_d_closed_form', check_two_d_closed_form)
Check('geometric_weights', check_geometric_weights)
Check('sphere_moments', check_sphere_moments)
Check('drop_calibration', check_drop_calibration)
