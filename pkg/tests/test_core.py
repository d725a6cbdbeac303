import math

import numpy as np
import pytest

import controller
import core


def test_reduce_diagonal_sorts_by_magnitude():
    spec = core.reduce_symmetric_gain([[0.5, 0.0], [0.0, -2.0]])
    assert spec.lambdas == (-2.0, 0.5)


def test_reduce_rotated_matrix_recovers_eigenvalues():
    angle = 0.3
    rotation = np.array([[math.cos(angle), -math.sin(angle)],
                         [math.sin(angle), math.cos(angle)]])
    a = rotation.dot(np.diag([1.5, -0.4])).dot(rotation.T)
    spec = core.reduce_symmetric_gain(a)
    assert spec.lambdas == pytest.approx((1.5, -0.4), abs=1e-12)


def test_reduce_rejects_asymmetric():
    with pytest.raises(core.NotSymmetric):
        core.reduce_symmetric_gain([[1.0, 0.5], [0.0, 1.0]])


def test_reduce_rejects_singular():
    with pytest.raises(core.Singular):
        core.reduce_symmetric_gain([[1.0, 0.0], [0.0, 0.0]])


def test_reduce_rejects_non_square():
    with pytest.raises(core.DimensionMismatch):
        core.reduce_symmetric_gain([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def test_spectrum_keeps_given_order():
    spec = core.GainSpectrum.from_values(0.5, -2.0, 1.5)
    assert spec.lambdas == (0.5, -2.0, 1.5)
    assert spec.select([2, 0]).lambdas == (1.5, 0.5)
    assert spec.select([1]).lambdas == (-2.0,)


def test_spectrum_rejects_zero_and_nan():
    with pytest.raises(core.Singular):
        core.GainSpectrum([1.0, 0.0])
    with pytest.raises(ValueError):
        core.GainSpectrum([1.0, float('nan')])


def test_spectrum_helpers():
    spec = core.GainSpectrum([2.0, -0.5])
    assert spec.squared().tolist() == [4.0, 0.25]
    assert spec.inverse_squared().tolist() == [0.25, 4.0]
    assert spec.select([0]).lambdas == (2.0,)
    assert spec.negated().lambdas == (-2.0, 0.5)


def test_weight_matrix_validation_and_scaling():
    with pytest.raises(core.NonPositiveWeight):
        core.WeightMatrix([1.0, 0.0])
    with pytest.raises(core.NonPositiveWeight):
        core.WeightMatrix([1.0, -3.0])
    w = core.WeightMatrix([2.0, 8.0])
    assert w.normalized().weights == (0.25, 1.0)
    assert w.scaled(0.5).weights == (1.0, 4.0)
    assert core.WeightMatrix.identity(3).weights == (1.0, 1.0, 1.0)


def test_actuation_direction_must_be_unit():
    core.ActuationDirection([0.6, 0.8])
    with pytest.raises(ValueError):
        core.ActuationDirection([1.0, 1.0])


def test_weighted_norm_and_bounds():
    x = core.StateVector([1.0, 2.0])
    p = core.WeightMatrix([3.0, 4.0])
    assert core.weighted_norm_sq(x, p) == 19.0
    lower, upper = core.norm_equivalence_bounds(x, p)
    assert lower == 15.0
    assert upper == 20.0
    assert lower <= core.weighted_norm_sq(x, p) <= upper


def test_check_dimensions():
    core.check_dimensions(2, 2)
    with pytest.raises(core.DimensionMismatch):
        core.check_dimensions(2, 3, 'state')


def test_control_policy_constructors():
    assert core.ControlPolicy.zero().kind == core.ZERO
    greedy = core.ControlPolicy.greedy([1.0, 2.0])
    assert greedy.kind == core.GREEDY
    assert greedy.weights == core.WeightMatrix([1.0, 2.0])

    params = controller.MixedStrategyParams(
        1, 0.5, 2.0, core.WeightMatrix([1.0]), 0.5)
    mixed = core.ControlPolicy.from_mixed(params)
    assert mixed.kind == core.MIXED
    assert mixed.mixed is params
    assert params.coordinates == (0,)
    with pytest.raises(ValueError):
        core.ControlPolicy.from_mixed(params._replace(q=1.0))
    with pytest.raises(ValueError):
        core.ControlPolicy.from_mixed(params._replace(h=1.0))


def test_mixed_policy_coordinates_are_checked():
    params = controller.MixedStrategyParams(
        2, 0.5, 2.0, core.WeightMatrix([1.0, 1.0]), 0.5, [3, 1])
    assert params.coordinates == (3, 1)
    assert core.ControlPolicy.from_mixed(params).mixed.coordinates == (3, 1)
    for bad in ((1,), (1, 1), (-1, 2), (0, 1, 2)):
        with pytest.raises(ValueError):
            core.ControlPolicy.from_mixed(params._replace(coordinates=bad))


def test_errors_share_a_base_class():
    for error in (core.NotSymmetric, core.Singular, core.DimensionMismatch,
                  core.NonPositiveWeight, core.InvariantViolation):
        assert issubclass(error, core.RandomActuationError)
