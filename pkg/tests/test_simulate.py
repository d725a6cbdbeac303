import math

import numpy as np
import pytest

import controller
import core
import simulate


def _config(spec, policy, horizon=20, trials=16, seed=0, **kwargs):
    return simulate.SimulationConfig(spec, np.ones(spec.dim), horizon, trials,
                                     seed, policy, **kwargs)


def test_step():
    x = simulate.step(core.StateVector([1.0, 2.0]), 3.0,
                      core.ActuationDirection([0.6, 0.8]),
                      core.GainSpectrum([2.0, 0.5]))
    assert x.x == pytest.approx((3.8, 3.4))


def test_config_validation():
    spec = core.GainSpectrum([2.0, 0.5])
    zero = core.ControlPolicy.zero()
    with pytest.raises(ValueError):
        _config(spec, zero, horizon=0)
    with pytest.raises(ValueError):
        _config(spec, zero, trials=0)
    with pytest.raises(core.DimensionMismatch):
        _config(spec, core.ControlPolicy.greedy([1.0, 1.0, 1.0]))
    with pytest.raises(core.DimensionMismatch):
        simulate.SimulationConfig(spec, [1.0], 5, 1, 0, zero)
    with pytest.raises(core.DimensionMismatch):
        _config(spec, zero, record_weighted=core.WeightMatrix.identity(3))


def test_zero_control_closed_form():
    config = _config(core.GainSpectrum([0.5, 0.9]), core.ControlPolicy.zero(),
                     horizon=100, trials=1)
    stats = simulate.run_ensemble(config)
    steps = np.arange(101)
    assert np.allclose(stats.mean_sq_norm, 0.25 ** steps + 0.81 ** steps,
                       rtol=1e-12, atol=0.0)
    assert stats.mean_weighted is None
    assert stats.verdict == simulate.BOUNDED
    assert stats.drop_fraction is None
    assert stats.diverged_trials == 0


def test_results_do_not_depend_on_batch_size(case_2_spectrum):
    policy = core.ControlPolicy.from_mixed(
        controller.build_mixed_strategy(case_2_spectrum))
    whole = simulate.run_ensemble(_config(case_2_spectrum, policy, trials=21))
    pieces = simulate.run_ensemble(_config(case_2_spectrum, policy, trials=21,
                                           batch_size=4))
    assert np.array_equal(whole.mean_sq_norm, pieces.mean_sq_norm)
    assert np.array_equal(whole.mean_weighted, pieces.mean_weighted)
    assert np.array_equal(whole.mean_coordinate_sq, pieces.mean_coordinate_sq)
    assert whole.drop_fraction == pieces.drop_fraction


def test_same_seed_same_output_other_seed_differs():
    spec = core.GainSpectrum([1.2, 1.5])
    policy = core.ControlPolicy.greedy(controller.stationary_controller(spec))
    first = simulate.run_ensemble(_config(spec, policy, seed=4))
    again = simulate.run_ensemble(_config(spec, policy, seed=4))
    other = simulate.run_ensemble(_config(spec, policy, seed=5))
    assert np.array_equal(first.mean_weighted, again.mean_weighted)
    assert not np.array_equal(first.mean_weighted, other.mean_weighted)


@pytest.mark.slow
def test_results_do_not_depend_on_workers():
    spec = core.GainSpectrum([1.2, 1.5])
    policy = core.ControlPolicy.greedy(controller.stationary_controller(spec))
    config = _config(spec, policy, trials=40, batch_size=8)
    assert np.array_equal(simulate.run_ensemble(config).mean_weighted,
                          simulate.run_ensemble(config, 3).mean_weighted)


def test_trajectories_match_ensemble_mean():
    spec = core.GainSpectrum([1.2, 1.5])
    policy = core.ControlPolicy.greedy([1.0, 2.0])
    config = _config(spec, policy, trials=5)
    records = [simulate.run_trajectory(config, k) for k in range(5)]
    mean = np.mean([record.sq_norms for record in records], axis=0)
    assert np.allclose(simulate.run_ensemble(config).mean_sq_norm, mean,
                       rtol=1e-12, atol=0.0)
    assert records[0].diverged_at is None
    assert records[0].coordinate_sq.shape == (21, 2)
    assert records[0].controls == 20


def test_identity_record_equals_plain_norm():
    spec = core.GainSpectrum([1.2, 0.7])
    config = _config(spec, core.ControlPolicy.greedy([1.0, 3.0]),
                     record_weighted=core.WeightMatrix.identity(2))
    stats = simulate.run_ensemble(config)
    assert np.array_equal(stats.mean_weighted, stats.mean_sq_norm)


def test_divergence_is_truncated():
    config = _config(core.GainSpectrum([1e10, 1e10]),
                     core.ControlPolicy.zero(), horizon=30, trials=3)
    record = simulate.run_trajectory(config, 0)
    assert record.diverged_at == 15
    assert np.all(np.isinf(record.sq_norms[15:]))
    assert np.all(np.isfinite(record.sq_norms[:15]))

    stats = simulate.run_ensemble(config)
    assert stats.diverged_trials == 3
    assert stats.verdict == simulate.GROWING
    assert np.isinf(stats.mean_sq_norm[-1])


def test_fit_growth():
    steps = np.arange(50)
    rate, error, verdict = simulate.fit_growth(0.5 ** steps)
    assert rate == pytest.approx(0.5, rel=1e-12)
    assert verdict == simulate.BOUNDED
    assert simulate.fit_growth(2.0 ** steps)[2] == simulate.GROWING
    assert simulate.fit_growth(np.ones(50))[2] == simulate.INDETERMINATE

    series = 2.0 ** steps
    series[40:] = np.inf
    assert simulate.fit_growth(series)[2] == simulate.GROWING
    assert simulate.fit_growth(np.zeros(50))[:2] == (0.0, 0.0)


def test_exact_expectation_identity():
    """E[X^T P X] grows exactly by r per step under greedy control with P*."""
    spec = core.GainSpectrum([1.3, 2.4])
    p = controller.stationary_controller(spec, tol=1e-11)
    r = 1.0 / (1.3 ** -2 + 2.4 ** -2)
    config = _config(spec, core.ControlPolicy.greedy(p), horizon=20,
                     trials=10 ** 4, seed=11)
    stats = simulate.run_ensemble(config)
    expected = r ** np.arange(21) * sum(p.weights)
    assert stats.mean_weighted[0] == pytest.approx(expected[0])
    assert np.all(np.abs(stats.mean_weighted[1:] - expected[1:]) <=
                  4.0 * stats.weighted_std_errors[1:])


def test_mixed_strategy_end_to_end(case_2_spectrum):
    params = controller.build_mixed_strategy(case_2_spectrum, tol=1e-11)
    policy = core.ControlPolicy.from_mixed(params)

    coupled = simulate.run_coupled(_config(case_2_spectrum, policy,
                                           horizon=300, trials=10), 2)
    assert coupled.max_error <= 1e-10 * max(1.0, coupled.max_norm)

    stats = simulate.run_ensemble(_config(case_2_spectrum, policy,
                                          horizon=2000, trials=100, seed=3))
    assert abs(stats.drop_fraction - (1.0 - params.q)) <= \
        4.0 * stats.drop_std_error
    assert stats.verdict == simulate.BOUNDED
    assert stats.diverged_trials == 0
    stable = stats.mean_coordinate_sq[:, 2:]
    assert np.all(np.isfinite(stable))
    assert stable[1000:].max() < 1e3


def test_subsystem_moment_decays_at_r_prime(case_2_spectrum):
    params = controller.build_mixed_strategy(case_2_spectrum, tol=1e-11)
    config = _config(case_2_spectrum, core.ControlPolicy.from_mixed(params),
                     horizon=20, trials=10 ** 4, seed=8)
    stats = simulate.run_ensemble(config)
    expected = params.r_prime ** np.arange(21) * sum(params.p_sub.weights)
    assert np.all(np.abs(stats.mean_weighted[1:] - expected[1:]) <=
                  4.0 * stats.weighted_std_errors[1:])


def test_coupling_rejects_greedy_and_bad_m(case_2_spectrum):
    greedy = core.ControlPolicy.greedy(core.WeightMatrix.identity(4))
    with pytest.raises(ValueError):
        simulate.run_coupled(_config(case_2_spectrum, greedy), 2)
    with pytest.raises(ValueError):
        simulate.run_coupled(_config(case_2_spectrum,
                                     core.ControlPolicy.zero()), 4)


def test_zero_policy_coupling_is_exact(case_2_spectrum):
    report = simulate.run_coupled(_config(case_2_spectrum,
                                          core.ControlPolicy.zero(),
                                          horizon=10, trials=2), 2)
    assert report.max_error == 0.0
    assert report.max_norm == pytest.approx(math.sqrt(1.5 ** 20 + 1.2 ** 20
                                                      + 2 * 0.5 ** 20))


def test_mixed_strategy_with_unstable_part_in_the_middle():
    spec = core.GainSpectrum([0.5, 1.2, 1.5, 0.5])
    params = controller.build_mixed_strategy(spec, tol=1e-11)
    policy = core.ControlPolicy.from_mixed(params)

    coupled = simulate.run_coupled(_config(spec, policy, horizon=300,
                                           trials=10), 2)
    assert coupled.max_error <= 1e-10 * max(1.0, coupled.max_norm)

    config = _config(spec, policy, horizon=20, trials=10 ** 4, seed=8)
    assert config.tracked_coordinates == (1, 2)
    stats = simulate.run_ensemble(config)
    expected = params.r_prime ** np.arange(21) * sum(params.p_sub.weights)
    assert np.all(np.abs(stats.mean_weighted[1:] - expected[1:]) <=
                  4.0 * stats.weighted_std_errors[1:])
    assert abs(stats.drop_fraction - (1.0 - params.q)) <= \
        4.0 * stats.drop_std_error


def test_mixed_strategy_on_unit_circle_stays_bounded():
    spec = core.GainSpectrum([1.0, 0.5])
    policy = core.ControlPolicy.from_mixed(
        controller.build_mixed_strategy(spec))
    stats = simulate.run_ensemble(_config(spec, policy, horizon=400,
                                          trials=50, seed=5))
    assert stats.diverged_trials == 0
    assert stats.verdict == simulate.BOUNDED


def test_tracked_coordinates(case_2_spectrum):
    zero = _config(case_2_spectrum, core.ControlPolicy.zero())
    assert zero.tracked_coordinates == (0, 1, 2, 3)
    partial = _config(case_2_spectrum, core.ControlPolicy.zero(),
                      record_weighted=core.WeightMatrix([1.0, 2.0]))
    assert partial.tracked_coordinates == (0, 1)


def test_mixed_coordinates_must_fit_the_state():
    params = controller.MixedStrategyParams(
        1, 0.5, 2.0, core.WeightMatrix([1.0]), 0.5, [2])
    with pytest.raises(core.DimensionMismatch):
        _config(core.GainSpectrum([2.0, 0.5]),
                core.ControlPolicy.from_mixed(params))
