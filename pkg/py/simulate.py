#
# Licensed under the BSD license.  See full license in LICENSE file.
#

"""Monte Carlo trajectories of X[n+1] = A X[n] + B[n] u[n].

Each step a fresh direction B[n] is drawn uniformly from S_d, the policy
picks u[n] knowing X[n] and B[n], and the state moves on. Trial k always
draws from substream k of the configured seed, so an ensemble reproduces
bit for bit whatever the batch size or the number of worker processes:
every per-trial quantity is computed with element-wise array operations and
coordinate sums are taken left to right, and trials are folded into the
running statistics in trial order.

Empirical stability is judged from a least-squares fit of log E[X^T P X]
(or log E[X^T X]) over the last half of the horizon. A trajectory whose
squared norm passes 1e300 is truncated and flagged as diverged.

Third party dependencies:

numpy: for array arithmetic
    http://www.numpy.org/

scipy: least-squares growth fit
    https://scipy.org/
"""

import collections
import logging
import math
import multiprocessing

import numpy as np
from scipy import stats

import controller
import core
import running_stats
import sphere


DIVERGENCE_CAP = 1e300
DEFAULT_BATCH_SIZE = 256
VERDICT_SIGMAS = 3.0

BOUNDED = 'bounded'
GROWING = 'growing'
INDETERMINATE = 'indeterminate'


class SimulationConfig(collections.namedtuple(
        'SimulationConfig',
        ['spec', 'x0', 'horizon', 'trials', 'seed', 'policy',
         'record_weighted', 'batch_size'])):
    """Everything that determines an ensemble.

    record_weighted: weights P of the tracked moment E[X^T P X]; it may
    have fewer entries than the state and then weighs the leading
    coordinates. None picks the policy's own weights (the stationary P for
    greedy, the subsystem weights on the unstable coordinates for mixed)
    and nothing for zero control.
    """
    __slots__ = ()

    def __new__(cls, spec, x0, horizon, trials, seed, policy,
                record_weighted=None, batch_size=DEFAULT_BATCH_SIZE):
        if not isinstance(x0, core.StateVector):
            x0 = core.StateVector(x0)
        core.check_dimensions(spec.dim, x0.dim, 'initial state')
        if horizon < 1:
            raise ValueError('horizon must be >= 1, got %d' % horizon)
        if trials < 1:
            raise ValueError('trials must be >= 1, got %d' % trials)
        if batch_size < 1:
            raise ValueError('batch_size must be >= 1, got %d' % batch_size)
        if policy.kind == core.GREEDY:
            core.check_dimensions(spec.dim, policy.weights.dim,
                                  'policy weights')
        if policy.kind == core.MIXED:
            if not 1 <= policy.mixed.m < spec.dim:
                raise ValueError('mixed policy needs 1 <= m < d')
            core.check_dimensions(policy.mixed.m, policy.weights.dim,
                                  'subsystem weights')
            if max(policy.mixed.coordinates) >= spec.dim:
                raise core.DimensionMismatch(
                    'mixed policy coordinates %s outside dimension %d'
                    % (list(policy.mixed.coordinates), spec.dim))
        if record_weighted is not None and record_weighted.dim > spec.dim:
            raise core.DimensionMismatch('record_weighted has more entries '
                                         'than the state')
        return super(SimulationConfig, cls).__new__(
            cls, spec, x0, int(horizon), int(trials), int(seed), policy,
            record_weighted, int(batch_size))

    @property
    def tracked_weights(self):
        if self.record_weighted is not None:
            return self.record_weighted
        return self.policy.weights

    @property
    def tracked_coordinates(self):
        """Coordinates weighed by tracked_weights, in weight order."""
        if self.record_weighted is not None:
            return tuple(range(self.record_weighted.dim))
        if self.policy.kind == core.MIXED:
            return self.policy.mixed.coordinates
        return tuple(range(self.spec.dim))


class TrajectoryRecord(collections.namedtuple(
        'TrajectoryRecord',
        ['sq_norms', 'weighted', 'coordinate_sq', 'drops', 'controls',
         'diverged_at'])):
    """One trial: per-step ||X||^2, X^T P X (or None), x_i^2, drop counts.

    diverged_at is the first step whose squared norm passed the cap (the
    record is inf from there on), or None.
    """
    __slots__ = ()


class EnsembleStats(collections.namedtuple(
        'EnsembleStats',
        ['mean_sq_norm', 'std_errors', 'mean_weighted',
         'weighted_std_errors', 'mean_coordinate_sq', 'growth_rate',
         'growth_std_error', 'verdict', 'raw_growth_rate', 'raw_verdict',
         'drop_fraction', 'drop_std_error', 'diverged_trials', 'trials'])):
    __slots__ = ()


class CouplingReport(collections.namedtuple('CouplingReport',
                                            ['max_error', 'max_norm'])):
    __slots__ = ()


def step(x, u, b, spec):
    """x'_i = lambda_i x_i + b_i u.

    :param x: current state
    :type x: core.StateVector

    :param u: scalar control
    :type u: float

    :param b: actuation direction
    :type b: core.ActuationDirection

    :param spec: gain spectrum
    :type spec: core.GainSpectrum

    :rtype: core.StateVector
    """
    core.check_dimensions(spec.dim, x.dim, 'state')
    core.check_dimensions(spec.dim, b.dim, 'actuation direction')
    return core.StateVector(spec.as_array() * x.as_array() + b.as_array() * u)


def _row_dot(left, right):
    total = left[:, 0] * right[:, 0]
    for k in range(1, left.shape[1]):
        total = total + left[:, k] * right[:, k]
    return total


def _greedy_rows(w, lam, x, b):
    bw = b * w
    return -_row_dot(bw, lam * x) / _row_dot(bw, b)


def _controls(policy, lam, x, b):
    """Controls for a batch of states; returns (u, dropped mask)."""
    count = x.shape[0]
    dropped = np.zeros(count, dtype=bool)
    if policy.kind == core.ZERO:
        return np.zeros(count), dropped
    if policy.kind == core.GREEDY:
        return _greedy_rows(policy.weights.as_array(), lam, x, b), dropped

    kept = list(policy.mixed.coordinates)
    head = b[:, kept]
    gain = np.sqrt(_row_dot(head, head))
    dropped = gain * policy.mixed.h <= 1.0
    safe_gain = np.where(dropped, 1.0, gain)
    u_sub = _greedy_rows(policy.weights.as_array(), lam[kept], x[:, kept],
                         head / safe_gain[:, np.newaxis])
    return np.where(dropped, 0.0, u_sub / safe_gain), dropped


def _trial_directions(config, trial_index):
    rng = sphere.SeededRng(config.seed, trial_index)
    return sphere.sample_uniform_batch(config.spec.dim, config.horizon, rng)


def _simulate_batch(config, trial_indices):
    """Run the given trials side by side.

    :return: (sq_norms, weighted or None, coordinate_sq, drops, controls,
             diverged_at) with one leading row per trial
    :rtype: tuple
    """
    trial_indices = list(trial_indices)
    count = len(trial_indices)
    d = config.spec.dim
    horizon = config.horizon
    lam = config.spec.as_array()
    directions = np.stack([_trial_directions(config, k)
                           for k in trial_indices])

    tracked = config.tracked_weights
    tracked_w = None if tracked is None else tracked.as_array()
    tracked_at = list(config.tracked_coordinates)

    x = np.tile(config.x0.as_array(), (count, 1))
    coordinate_sq = np.empty((count, horizon + 1, d))
    sq_norms = np.empty((count, horizon + 1))
    weighted = None if tracked_w is None else np.empty((count, horizon + 1))
    drops = np.zeros(count, dtype=int)
    controls = np.zeros(count, dtype=int)
    diverged_at = np.full(count, -1)
    alive = np.ones(count, dtype=bool)

    def record(n):
        squares = x * x
        coordinate_sq[:, n, :] = np.where(alive[:, np.newaxis], squares,
                                          np.inf)
        sq_norms[:, n] = np.where(alive, _row_dot(x, x), np.inf)
        if weighted is not None:
            k = len(tracked_w)
            weighted[:, n] = np.where(
                alive, _row_dot(squares[:, tracked_at],
                                np.broadcast_to(tracked_w, (count, k))),
                np.inf)

    record(0)
    with np.errstate(over='ignore', invalid='ignore'):
        for n in range(horizon):
            b = directions[:, n, :]
            u, dropped = _controls(config.policy, lam, x, b)
            drops += dropped & alive
            controls += alive
            x = lam * x + b * u[:, np.newaxis]

            size = _row_dot(x, x)
            newly = alive & ~(size <= DIVERGENCE_CAP)
            if newly.any():
                diverged_at[newly] = n + 1
                alive &= ~newly
                x[~alive] = 0.0
            record(n + 1)

    return sq_norms, weighted, coordinate_sq, drops, controls, diverged_at


def _to_record(batch, row):
    sq_norms, weighted, coordinate_sq, drops, controls, diverged_at = batch
    return TrajectoryRecord(
        sq_norms[row], None if weighted is None else weighted[row],
        coordinate_sq[row], int(drops[row]), int(controls[row]),
        None if diverged_at[row] < 0 else int(diverged_at[row]))


def run_trajectory(config, trial_index):
    """Simulate one trial of the ensemble.

    :param config: simulation setup
    :type config: SimulationConfig

    :param trial_index: which substream to draw directions from
    :type trial_index: int

    :rtype: TrajectoryRecord
    """
    record = _to_record(_simulate_batch(config, [trial_index]), 0)
    if record.diverged_at is not None:
        logging.debug('Trial %d diverged at step %d', trial_index,
                      record.diverged_at)
    return record


def fit_growth(series):
    """Fit a per-step geometric rate to the last half of a moment series.

    :param series: per-step moment estimates, inf after divergence
    :type series: numpy.ndarray

    :return: (rate, standard error of the rate, verdict)
    :rtype: tuple
    """
    series = np.asarray(series, dtype='float64')
    finite = np.isfinite(series)
    end = len(series) if finite.all() else int(np.argmin(finite))
    diverged = end < len(series)

    steps = np.arange(end // 2, end)
    values = series[steps]
    if len(steps) < 2:
        return math.nan, math.nan, GROWING if diverged else INDETERMINATE
    if np.any(values <= 0.0):
        # The state reached the origin exactly and stays there.
        return 0.0, 0.0, BOUNDED

    fit = stats.linregress(steps, np.log(values))
    rate = math.exp(fit.slope)
    error = rate * fit.stderr
    if diverged or rate > 1.0 + VERDICT_SIGMAS * error:
        verdict = GROWING
    elif rate < 1.0 - VERDICT_SIGMAS * error:
        verdict = BOUNDED
    else:
        verdict = INDETERMINATE
    return rate, error, verdict


def _batch_worker(arguments):
    config, trial_indices = arguments
    return _simulate_batch(config, trial_indices)


def run_ensemble(config, workers=1):
    """Average run_trajectory over all trials.

    :param config: simulation setup
    :type config: SimulationConfig

    :param workers: processes used for trial batches; results do not depend
                    on it
    :type workers: int

    :rtype: EnsembleStats
    """
    horizon = config.horizon
    d = config.spec.dim
    batches = [range(start, min(start + config.batch_size, config.trials))
               for start in range(0, config.trials, config.batch_size)]

    sq_stats = running_stats.Stats(horizon + 1)
    coordinate_stats = running_stats.Stats((horizon + 1, d))
    weighted_stats = None
    if config.tracked_weights is not None:
        weighted_stats = running_stats.Stats(horizon + 1)

    first_divergence = horizon + 1
    diverged_trials = 0
    total_drops = 0
    total_controls = 0

    jobs = [(config, batch) for batch in batches]
    if workers > 1 and len(jobs) > 1:
        with multiprocessing.Pool(processes=workers) as pool:
            results = list(pool.imap(_batch_worker, jobs))
    else:
        results = [_batch_worker(job) for job in jobs]

    for batch in results:
        sq_norms, weighted, coordinate_sq, drops, controls, diverged_at = batch
        for row in range(sq_norms.shape[0]):
            # Diverged entries are inf; they are masked out below.
            sq_stats.push(np.where(np.isfinite(sq_norms[row]),
                                   sq_norms[row], 0.0))
            coordinate_stats.push(np.where(np.isfinite(coordinate_sq[row]),
                                           coordinate_sq[row], 0.0))
            if weighted_stats is not None:
                weighted_stats.push(np.where(np.isfinite(weighted[row]),
                                             weighted[row], 0.0))
            if diverged_at[row] >= 0:
                diverged_trials += 1
                first_divergence = min(first_divergence, diverged_at[row])
        total_drops += int(drops.sum())
        total_controls += int(controls.sum())

    def masked(values):
        values = np.array(values, dtype='float64')
        values[first_divergence:] = np.inf
        return values

    mean_sq_norm = masked(sq_stats.mean())
    std_errors = masked(sq_stats.std_error())
    mean_coordinate_sq = masked(coordinate_stats.mean())
    mean_weighted = weighted_errors = None
    if weighted_stats is not None:
        mean_weighted = masked(weighted_stats.mean())
        weighted_errors = masked(weighted_stats.std_error())

    raw_rate, _, raw_verdict = fit_growth(mean_sq_norm)
    if mean_weighted is not None:
        rate, rate_error, verdict = fit_growth(mean_weighted)
    else:
        rate, rate_error, verdict = fit_growth(mean_sq_norm)

    drop_fraction = drop_error = None
    if config.policy.kind == core.MIXED and total_controls:
        drop_fraction = total_drops / float(total_controls)
        drop_error = math.sqrt(drop_fraction * (1.0 - drop_fraction) /
                               total_controls)

    if diverged_trials:
        logging.warning('%d of %d trials diverged, first at step %d',
                        diverged_trials, config.trials, first_divergence)
    logging.info('Ensemble of %d trials over %d steps: rate %.6g (%s)',
                 config.trials, horizon, rate, verdict)
    return EnsembleStats(mean_sq_norm, std_errors, mean_weighted,
                         weighted_errors, mean_coordinate_sq, rate,
                         rate_error, verdict, raw_rate, raw_verdict,
                         drop_fraction, drop_error, diverged_trials,
                         config.trials)


def run_coupled(config, m):
    """Run the full system and its embedded m-dimensional subsystem together.

    Both see the same directions. The subsystem gets T b / ||T b|| and runs
    the greedy law on its own state whenever the full system keeps its
    control, so T X[n] and X'[n] must agree at every step.

    :param config: simulation setup with a mixed or zero policy
    :type config: SimulationConfig

    :param m: subsystem dimension, 1 <= m < d; a zero policy couples the
              first m coordinates, a mixed one its own coordinates
    :type m: int

    :return: max over trials and steps of ||T X[n] - X'[n]|| and of ||X[n]||
    :rtype: CouplingReport
    """
    spec = config.spec
    if not 1 <= m < spec.dim:
        raise ValueError('need 1 <= m < d, got m=%d, d=%d' % (m, spec.dim))
    if config.policy.kind == core.GREEDY:
        raise ValueError('run_coupled needs a mixed or zero policy')
    if config.policy.kind == core.MIXED and config.policy.mixed.m != m:
        raise ValueError('policy acts on %d coordinates, not %d'
                         % (config.policy.mixed.m, m))

    mixed = config.policy.mixed
    kept = list(range(m) if mixed is None else mixed.coordinates)
    subsystem = spec.select(kept)
    max_error = 0.0
    max_norm = 0.0
    for trial in range(config.trials):
        x = config.x0
        x_sub = core.StateVector(config.x0.as_array()[kept])
        for row in _trial_directions(config, trial):
            b = core.ActuationDirection(row)
            u = 0.0
            if mixed is not None:
                u = controller.mixed_control(mixed, config.policy.weights,
                                             spec, x, b)
            x = step(x, u, b, spec)

            try:
                b_sub = sphere.project(b, m, kept)
            except sphere.DegenerateProjection:
                # always a drop, the subsystem moves uncontrolled
                x_sub = core.StateVector(subsystem.as_array() *
                                         x_sub.as_array())
            else:
                u_sub = 0.0
                gain = float(np.linalg.norm(row[kept]))
                if mixed is not None and gain * mixed.h > 1.0:
                    u_sub = controller.greedy_control(
                        config.policy.weights, subsystem, x_sub, b_sub)
                x_sub = step(x_sub, u_sub, b_sub, subsystem)

            error = np.linalg.norm(x.as_array()[kept] - x_sub.as_array())
            max_error = max(max_error, float(error))
            max_norm = max(max_norm, float(np.linalg.norm(x.as_array())))
    return CouplingReport(max_error, max_norm)
