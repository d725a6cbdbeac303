import numpy as np
import pytest

import controller
import core
import expectation
import sphere
import stability
import weights


def _cost(w, lam, x, b, u):
    value = lam * x + b * u
    return float(np.dot(w, value * value))


def test_greedy_control_minimizes_next_step_norm(np_rng):
    rng = sphere.SeededRng(3)
    for _ in range(1000):
        d = int(np_rng.integers(1, 6))
        lam = np_rng.uniform(0.2, 3.0, d) * np_rng.choice([-1.0, 1.0], d)
        w = np_rng.uniform(0.1, 10.0, d)
        x = np_rng.standard_normal(d)
        b = sphere.sample_uniform(d, rng)
        u = controller.greedy_control(core.WeightMatrix(w),
                                      core.GainSpectrum(lam),
                                      core.StateVector(x), b)
        best = _cost(w, lam, x, b.as_array(), u)
        for delta in (1e-3, 1.0, 100.0):
            assert best <= _cost(w, lam, x, b.as_array(), u + delta)
            assert best <= _cost(w, lam, x, b.as_array(), u - delta)


def test_greedy_control_closed_form():
    u = controller.greedy_control(core.WeightMatrix([1.0, 1.0]),
                                  core.GainSpectrum([2.0, 3.0]),
                                  core.StateVector([1.0, 1.0]),
                                  core.ActuationDirection([1.0, 0.0]))
    assert u == -2.0


def test_greedy_control_checks_dimensions():
    with pytest.raises(core.DimensionMismatch):
        controller.greedy_control(core.WeightMatrix([1.0]),
                                  core.GainSpectrum([2.0, 3.0]),
                                  core.StateVector([1.0, 1.0]),
                                  core.ActuationDirection([1.0, 0.0]))


def test_stationary_controller(case_1a_spectrum):
    p = controller.stationary_controller(case_1a_spectrum, tol=1e-11)
    fractions = weights.target_fractions(case_1a_spectrum)
    assert expectation.ratio_expectation_all(p).values == pytest.approx(
        fractions.v, abs=1e-10)


def test_stationary_controller_rejects_case_1b():
    with pytest.raises(controller.NotCase1a) as info:
        controller.stationary_controller(core.GainSpectrum([1.05, 2.0, 2.0]))
    assert info.value.fractions.nonpositive == [0]


def test_drop_threshold_closed_forms():
    # ||T B||^2 is Beta(1/2, 1) for d = 3, m = 1 and uniform for d = 4, m = 2
    assert controller.drop_threshold(3, 1, 0.5) == pytest.approx(2.0,
                                                                 rel=1e-12)
    assert controller.drop_threshold(4, 2, 0.75) == pytest.approx(2.0,
                                                                  rel=1e-12)


@pytest.mark.parametrize('d,m,q', [(3, 1, 0.2), (4, 2, 0.9), (6, 3, 0.5)])
def test_drop_threshold_calibration(d, m, q):
    h = controller.drop_threshold(d, m, q)
    assert h > 1.0
    assert sphere.projected_norm_sq_cdf(d, m, 1.0 / (h * h)) == \
        pytest.approx(1.0 - q, abs=1e-10)


def test_drop_threshold_ranges():
    with pytest.raises(controller.InvalidRange):
        controller.drop_threshold(3, 3, 0.5)
    with pytest.raises(controller.InvalidRange):
        controller.drop_threshold(3, 1, 1.0)


def test_build_mixed_strategy(case_2_spectrum):
    params = controller.build_mixed_strategy(case_2_spectrum, tol=1e-11)
    r = stability.threshold_r(case_2_spectrum)
    inverse_sum = 1.2 ** -2 + 1.5 ** -2
    assert params.m == 2
    assert params.q == pytest.approx(2.0 - 0.5 * (1.0 + r) * inverse_sum,
                                     abs=1e-12)
    assert params.q == pytest.approx(0.9306, abs=1e-4)
    assert params.r_prime == pytest.approx(0.5 * (1.0 + r), abs=1e-12)
    assert params.h > 1.0
    assert sphere.projected_norm_sq_cdf(4, 2, params.h ** -2) == \
        pytest.approx(1.0 - params.q, abs=1e-10)

    subsystem = case_2_spectrum.select([0, 1])
    targets = weights.target_fractions(subsystem, params.q).expectations
    assert expectation.ratio_expectation_all(params.p_sub).values == \
        pytest.approx(targets, abs=1e-10)


def test_survival_ceiling_only_when_it_keeps_r_prime_below_one():
    params = controller.build_mixed_strategy(core.GainSpectrum([1.1, 2.4,
                                                                0.5]))
    assert params.q > controller.Q_CEILING
    assert params.r_prime < 1.0


def test_build_mixed_strategy_unstable_part_anywhere(case_2_spectrum):
    shuffled = core.GainSpectrum([0.5, 1.2, 1.5, 0.5])
    params = controller.build_mixed_strategy(shuffled, tol=1e-11)
    leading = controller.build_mixed_strategy(case_2_spectrum, tol=1e-11)
    assert params.m == 2
    assert params.coordinates == (1, 2)
    assert leading.coordinates == (0, 1)
    assert params.q == pytest.approx(leading.q, abs=1e-15)
    assert params.h == pytest.approx(leading.h, abs=1e-12)
    assert params.r_prime == pytest.approx(leading.r_prime, abs=1e-15)
    assert params.p_sub.weights == pytest.approx(leading.p_sub.weights,
                                                 abs=1e-10)

    targets = weights.target_fractions(shuffled.select(params.coordinates),
                                       params.q).expectations
    assert expectation.ratio_expectation_all(params.p_sub).values == \
        pytest.approx(targets, abs=1e-10)

    stable_last = controller.build_mixed_strategy(
        core.GainSpectrum([0.5, 0.9, 2.0]))
    assert stable_last.coordinates == (2,)


def test_build_mixed_strategy_on_unit_circle():
    params = controller.build_mixed_strategy(core.GainSpectrum([1.0, 0.5]))
    assert params.m == 1
    assert params.coordinates == (0,)
    assert 0.0 < params.q < 1.0
    assert params.r_prime < 1.0
    assert params.p_sub.weights == (1.0,)

    negative = controller.build_mixed_strategy(core.GainSpectrum([0.5, -1.0]))
    assert negative.coordinates == (1,)


def test_build_mixed_strategy_rejections():
    with pytest.raises(controller.NotCase2):
        controller.build_mixed_strategy(core.GainSpectrum([1.2, 1.5]))
    with pytest.raises(controller.NotCase2):
        controller.build_mixed_strategy(core.GainSpectrum([0.5, 0.9]))
    with pytest.raises(controller.NotStabilizable):
        controller.build_mixed_strategy(core.GainSpectrum([1.3, 2.4, 0.5,
                                                           0.5]))


def test_mixed_control_drops_and_lifts(case_2_spectrum):
    params = controller.build_mixed_strategy(case_2_spectrum)
    x = core.StateVector([1.0, -2.0, 0.5, 0.5])

    dropped = controller.mixed_control(
        params, params.p_sub, case_2_spectrum, x,
        core.ActuationDirection([0.0, 0.0, 0.6, 0.8]))
    assert dropped == 0.0

    direction = core.ActuationDirection([0.6, 0.8, 0.0, 0.0])
    u = controller.mixed_control(params, params.p_sub, case_2_spectrum, x,
                                 direction)
    expected = controller.greedy_control(
        params.p_sub, case_2_spectrum.select([0, 1]),
        core.StateVector([1.0, -2.0]), core.ActuationDirection([0.6, 0.8]))
    assert u == pytest.approx(expected, rel=1e-14)

    with pytest.raises(core.DimensionMismatch):
        controller.mixed_control(params, core.WeightMatrix([1.0]),
                                 case_2_spectrum, x, direction)


def test_mixed_control_reads_the_unstable_coordinates():
    spec = core.GainSpectrum([0.5, 1.2, 1.5, 0.5])
    params = controller.build_mixed_strategy(spec)
    x = core.StateVector([3.0, 1.0, -2.0, 4.0])

    dropped = controller.mixed_control(
        params, params.p_sub, spec, x,
        core.ActuationDirection([0.6, 0.0, 0.0, 0.8]))
    assert dropped == 0.0

    u = controller.mixed_control(params, params.p_sub, spec, x,
                                 core.ActuationDirection([0.0, 0.6, 0.8,
                                                          0.0]))
    expected = controller.greedy_control(
        params.p_sub, core.GainSpectrum([1.2, 1.5]),
        core.StateVector([1.0, -2.0]), core.ActuationDirection([0.6, 0.8]))
    assert u == pytest.approx(expected, rel=1e-14)

    with pytest.raises(core.DimensionMismatch):
        controller.mixed_control(params, params.p_sub,
                                 core.GainSpectrum([0.5, 1.2]),
                                 core.StateVector([1.0, 1.0]),
                                 core.ActuationDirection([0.6, 0.8]))


@pytest.mark.parametrize('lambdas,stable', [
    ((0.5, 2.0), (0,)),
    ((2.0, 1.5, -0.9), (2,)),
    ((0.3, 0.4), (0, 1)),
])
def test_stationary_controller_rejects_stable_eigenvalues(lambdas, stable):
    with pytest.raises(controller.NotCase1a) as info:
        controller.stationary_controller(core.GainSpectrum(lambdas))
    assert info.value.stable == stable
    assert info.value.fractions is None
    assert 'lambda' in str(info.value)


def test_stationary_controller_on_unit_circle():
    p = controller.stationary_controller(core.GainSpectrum([1.0, 1.0]))
    assert p.weights == pytest.approx((1.0, 1.0), abs=1e-9)
