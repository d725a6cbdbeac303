#!/usr/bin/env python
#
# Licensed under the BSD license.  See full license in LICENSE file.
#

"""Command line front end.

Subcommands:

    threshold LAMBDA...        decide stabilizability from the spectrum
    simulate RUN_FILE          Monte Carlo ensemble, CSV per step
    sweep                      phase diagram over (lambda1, lambda2), CSV
    solve-weights LAMBDA...    stationary weights of the greedy controller
    verify                     self-verification checks

Exit codes: threshold returns 0 (stabilizable), 1 (unstabilizable) or 2
(inconclusive); solve-weights returns 3 when some target fraction is not
positive; verify returns 1 when a check fails; malformed arguments give 64
and malformed run files 65.

CSV goes to standard output or --out; diagnostics go to standard error (or
the [logging] log_file). Reals are written with 17 significant digits, so
output is byte-identical for fixed seeds and flags.

Example:
    python py/random_actuation.py threshold 1.1 2.4
    python py/random_actuation.py sweep --template four_d_paired \\
        --lambda1 0.1 2 20 --lambda2 0.1 2 20 --simulate --workers 4
"""

import argparse
import collections
import contextlib
import csv
import logging
import multiprocessing
import sys

import numpy as np

import configuration_manager as cm
import controller
import core
import simulate
import stability
import verification
import weights


EXIT_OK = 0
EXIT_UNSTABILIZABLE = 1
EXIT_INCONCLUSIVE = 2
EXIT_CHECK_FAILED = 1
EXIT_NOT_CASE_1A = 3
EXIT_USAGE = 64
EXIT_CONFIG = 65
EXIT_SOFTWARE = 70

DECISION_EXIT = {stability.STABILIZABLE: EXIT_OK,
                 stability.UNSTABILIZABLE: EXIT_UNSTABILIZABLE,
                 stability.INCONCLUSIVE: EXIT_INCONCLUSIVE}

TWO_D = 'two_d'
FOUR_D_PAIRED = 'four_d_paired'

SIMULATE_COLUMNS = ['step', 'mean_sq_norm', 'std_err', 'mean_weighted',
                    'weighted_std_err']
SWEEP_COLUMNS = ['lambda1', 'lambda2', 'r', 'predicted', 'empirical_rate',
                 'empirical_verdict']

# logging levels
LEVELS = {'DEBUG': logging.DEBUG,
          'INFO': logging.INFO,
          'WARNING': logging.WARNING,
          'ERROR': logging.ERROR,
          'CRITICAL': logging.CRITICAL}


class UsageError(core.RandomActuationError, ValueError):
    pass


class ArgumentParser(argparse.ArgumentParser):
    """argparse with the usage exit code 64 instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, '%s: error: %s\n' % (self.prog, message))


class SweepSpec(collections.namedtuple(
        'SweepSpec', ['axis1', 'axis2', 'template', 'sim'])):
    """A phase diagram grid.

    axis1, axis2: (min, max, steps) for lambda1 and lambda2
    template: two_d or four_d_paired
    sim: dict of horizon, trials and seed, or None for predictions only
    """
    __slots__ = ()

    def __new__(cls, axis1, axis2, template=TWO_D, sim=None):
        axes = []
        for name, (low, high, steps) in (('lambda1', axis1),
                                         ('lambda2', axis2)):
            if not low > 0.0 or high < low:
                raise UsageError('%s range must satisfy 0 < min <= max'
                                 % name)
            if int(steps) != steps or steps < 2:
                raise UsageError('%s needs an integer number of steps >= 2'
                                 % name)
            axes.append((float(low), float(high), int(steps)))
        if template not in (TWO_D, FOUR_D_PAIRED):
            raise UsageError('unknown template %r' % template)
        return super(SweepSpec, cls).__new__(cls, axes[0], axes[1], template,
                                             sim)

    def grid(self):
        """(lambda1, lambda2) pairs, lambda1 outer, in output order."""
        first = np.linspace(*self.axis1)
        second = np.linspace(*self.axis2)
        return [(float(l1), float(l2)) for l1 in first for l2 in second]

    def spectrum(self, l1, l2):
        if self.template == FOUR_D_PAIRED:
            return core.GainSpectrum([l1, l1, l2, l2])
        return core.GainSpectrum([l1, l2])


def _fmt(value):
    if value is None:
        return ''
    if isinstance(value, (float, np.floating)):
        return '%.17g' % value
    return str(value)


@contextlib.contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, 'w', newline='') as out:
            yield out


def _write_comments(out, text):
    for line in text.splitlines():
        out.write(('# %s' % line).rstrip() + '\n')


def _spectrum(values):
    try:
        return core.GainSpectrum(values)
    except (core.Singular, ValueError) as error:
        raise UsageError('malformed eigenvalue list: %s' % error)


##############################
# Subcommands
##############################

def cmd_threshold(args):
    """Print the verdict for a spectrum; the exit code carries the decision."""
    spec = _spectrum(args.lambdas)
    if args.q is not None and not 0.0 < args.q <= 1.0:
        raise UsageError('--q must be in (0, 1], got %r' % args.q)
    epsilon = cm.tolerances()['epsilon']
    verdict = stability.classify(spec, epsilon)

    fields = [('r', verdict.r), ('m', verdict.m), ('case', verdict.case),
              ('decision', verdict.decision),
              ('subsystem', ','.join(_fmt(value) for value
                                     in verdict.subsystem.lambdas)),
              ('boundary_sensitive', str(verdict.boundary_sensitive).lower())]
    if args.q is not None and verdict.m > 0:
        fields.append(('dropped_control_rate',
                       weights.stationary_rate(verdict.subsystem, args.q)))
        fields.append(('erasure_threshold',
                       stability.erasure_threshold(spec, 1.0 - args.q)))
    print(' '.join('%s=%s' % (name, _fmt(value)) for name, value in fields))

    if verdict.m == 0:
        summary = 'every eigenvalue is stable; zero control suffices'
    else:
        summary = 'r = %.6f with %d unstable eigenvalue%s (%s)' % (
            verdict.r, verdict.m, '' if verdict.m == 1 else 's', verdict.case)
    print('%s: %s' % (verdict.decision.replace('_', ' ').capitalize(),
                      summary))
    return DECISION_EXIT[verdict.decision]


def cmd_simulate(args):
    """Run the ensemble a run file describes and write one row per step."""
    overrides = {'horizon': args.horizon, 'trials': args.trials,
                 'seed': args.seed}
    config = cm.load_run_config(args.run_file, overrides)
    effective = cm.dump_run_config(config)
    if args.dump_config:
        with _output(args.out) as out:
            out.write(effective)
        return EXIT_OK

    stats = simulate.run_ensemble(config, args.workers)
    summary = ('growth_rate = %s\nverdict = %s\nraw_growth_rate = %s\n'
               'raw_verdict = %s\ndiverged_trials = %d\n'
               % (_fmt(stats.growth_rate), stats.verdict,
                  _fmt(stats.raw_growth_rate), stats.raw_verdict,
                  stats.diverged_trials))
    if stats.drop_fraction is not None:
        summary += 'drop_fraction = %s\n' % _fmt(stats.drop_fraction)

    with _output(args.out) as out:
        _write_comments(out, effective)
        _write_comments(out, summary)
        writer = csv.writer(out, lineterminator='\n')
        writer.writerow(SIMULATE_COLUMNS)
        for n in range(config.horizon + 1):
            weighted = errors = None
            if stats.mean_weighted is not None:
                weighted = stats.mean_weighted[n]
                errors = stats.weighted_std_errors[n]
            writer.writerow([n, _fmt(stats.mean_sq_norm[n]),
                             _fmt(stats.std_errors[n]), _fmt(weighted),
                             _fmt(errors)])
    return EXIT_OK


def _cell_policy(verdict, spec, tol, epsilon):
    """The policy simulated in a sweep cell."""
    if verdict.case == stability.ALL_STABLE:
        return core.ControlPolicy.zero()
    if verdict.case == stability.CASE_1A:
        return core.ControlPolicy.greedy(
            controller.stationary_controller(spec, tol, epsilon))
    if verdict.case == stability.CASE_2 and verdict.r < 1.0:
        return core.ControlPolicy.from_mixed(
            controller.build_mixed_strategy(spec, tol, epsilon))
    return core.ControlPolicy.greedy(core.WeightMatrix.identity(spec.dim))


def _sweep_cell(job):
    """One grid row: (l1, l2, r, predicted, empirical rate, verdict)."""
    sweep_spec, l1, l2, epsilon, near_threshold, tol = job
    spec = sweep_spec.spectrum(l1, l2)
    verdict = stability.classify(spec, epsilon)
    row = [l1, l2, verdict.r, verdict.decision, None, None]
    if sweep_spec.sim is None:
        return row

    config = simulate.SimulationConfig(
        spec, np.ones(spec.dim), sweep_spec.sim['horizon'],
        sweep_spec.sim['trials'], sweep_spec.sim['seed'],
        _cell_policy(verdict, spec, tol, epsilon))
    stats = simulate.run_ensemble(config)
    row[4] = stats.growth_rate
    if abs(verdict.r - 1.0) < near_threshold:
        row[5] = simulate.INDETERMINATE
    else:
        row[5] = stats.verdict
    return row


def run_sweep(sweep_spec, workers=1):
    """Rows of the phase diagram in grid order.

    :param sweep_spec: the grid
    :type sweep_spec: SweepSpec

    :param workers: processes for grid cells; the rows do not depend on it
    :type workers: int

    :rtype: list
    """
    settings = cm.sweep()
    jobs = [(sweep_spec, l1, l2, cm.tolerances()['epsilon'],
             settings['near_threshold'], cm.solver()['tolerance'])
            for l1, l2 in sweep_spec.grid()]
    logging.info('Sweeping %d cells (%s)', len(jobs), sweep_spec.template)
    if workers > 1 and sweep_spec.sim is not None:
        with multiprocessing.Pool(processes=workers) as pool:
            return list(pool.imap(_sweep_cell, jobs))
    return [_sweep_cell(job) for job in jobs]


def cmd_sweep(args):
    """Write the phase diagram CSV."""
    settings = cm.sweep()
    sim = None
    if args.simulate or any(value is not None for value in
                            (args.horizon, args.trials, args.seed)):
        sim = {}
        for field in ('horizon', 'trials', 'seed'):
            value = getattr(args, field)
            sim[field] = settings[field] if value is None else value

    sweep_spec = SweepSpec(args.lambda1 or settings['lambda1'],
                           args.lambda2 or settings['lambda2'],
                           args.template or settings['template'], sim)
    rows = run_sweep(sweep_spec, args.workers)

    with _output(args.out) as out:
        echo = ['template = %s' % sweep_spec.template,
                'lambda1 = %s, %s, %d' % (_fmt(sweep_spec.axis1[0]),
                                          _fmt(sweep_spec.axis1[1]),
                                          sweep_spec.axis1[2]),
                'lambda2 = %s, %s, %d' % (_fmt(sweep_spec.axis2[0]),
                                          _fmt(sweep_spec.axis2[1]),
                                          sweep_spec.axis2[2])]
        if sim is not None:
            echo.extend('%s = %d' % (field, sim[field])
                        for field in ('horizon', 'trials', 'seed'))
        _write_comments(out, '\n'.join(echo))
        writer = csv.writer(out, lineterminator='\n')
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(value) for value in row])
    return EXIT_OK


def cmd_solve_weights(args):
    """Print the stationary weights P (p_1 = 1), the residual and the rate."""
    spec = _spectrum(args.lambdas)
    q = 1.0 if args.q is None else args.q
    unstable = stability.unstable_coordinates(spec,
                                              cm.tolerances()['epsilon'])
    if len(unstable) < spec.dim:
        raise controller.NotCase1a(None, [i for i in range(spec.dim)
                                          if i not in unstable])
    try:
        fractions = weights.target_fractions(spec, q)
    except ValueError as error:
        raise UsageError(str(error))
    if not fractions.all_positive:
        raise controller.NotCase1a(fractions)

    p = weights.solve_weight_fixed_point(fractions,
                                         cm.solver()['tolerance'],
                                         cm.solver()['max_sweeps'],
                                         cm.solver()['damping'])
    residual = float(np.abs(fractions.expectations -
                            verification.quadrature_expectation(
                                p.as_array())).max())
    print('p=%s' % ','.join(_fmt(value) for value in p.weights))
    print('residual=%s' % _fmt(residual))
    print('r=%s' % _fmt(weights.stationary_rate(spec, q)))
    return EXIT_OK


def cmd_verify(args):
    """Run every check; exit 0 only if all pass."""
    settings = cm.verify()
    context = verification.VerifyContext(
        settings['seed'] if args.seed is None else args.seed,
        settings['samples'])
    results = verification.run_checks(context)
    for result in results:
        print('%s %s: %s' % ('PASS' if result.passed else 'FAIL',
                             result.name, result.detail))
    failed = [result.name for result in results if not result.passed]
    if failed:
        logging.error('Failed checks: %s', ', '.join(failed))
        return EXIT_CHECK_FAILED
    return EXIT_OK


##############################
# Argument handling
##############################

def _axis(values):
    low, high, steps = values
    if steps != int(steps):
        raise UsageError('number of steps must be an integer, got %r' % steps)
    return low, high, int(steps)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--log', default=None,
                        help='Set the logging level. levels: INFO, DEBUG, '
                             'WARNING, ERROR, CRITICAL')

    parser = ArgumentParser(
        description='Second-moment stabilizability under random actuation '
                    'directions.')
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True

    threshold = commands.add_parser('threshold', parents=[common],
                                    help='classify a spectrum')
    threshold.add_argument('lambdas', nargs='+', type=float,
                           metavar='LAMBDA')
    threshold.add_argument('--q', type=float, default=None,
                           help='survival probability; also report the '
                                'dropped-control rate')
    threshold.set_defaults(func=cmd_threshold)

    sim = commands.add_parser('simulate', parents=[common],
                              help='run a Monte Carlo ensemble')
    sim.add_argument('run_file', help='run file with [spectrum], '
                                      '[simulation] and [policy] sections')
    sim.add_argument('--seed', type=int, default=None)
    sim.add_argument('--trials', type=int, default=None)
    sim.add_argument('--horizon', type=int, default=None)
    sim.add_argument('--out', default=None, help='CSV path (default stdout)')
    sim.add_argument('--workers', type=int,
                     default=cm.simulation()['workers'])
    sim.add_argument('--dump-config', action='store_true',
                     help='print the effective run file and exit')
    sim.set_defaults(func=cmd_simulate)

    sweep = commands.add_parser('sweep', parents=[common],
                                help='phase diagram over (lambda1, lambda2)')
    sweep.add_argument('--template', choices=[TWO_D, FOUR_D_PAIRED],
                       default=None)
    sweep.add_argument('--lambda1', nargs=3, type=float, default=None,
                       metavar=('MIN', 'MAX', 'STEPS'))
    sweep.add_argument('--lambda2', nargs=3, type=float, default=None,
                       metavar=('MIN', 'MAX', 'STEPS'))
    sweep.add_argument('--simulate', action='store_true',
                       help='fill the empirical columns')
    sweep.add_argument('--seed', type=int, default=None)
    sweep.add_argument('--trials', type=int, default=None)
    sweep.add_argument('--horizon', type=int, default=None)
    sweep.add_argument('--out', default=None, help='CSV path (default stdout)')
    sweep.add_argument('--workers', type=int,
                       default=cm.simulation()['workers'])
    sweep.set_defaults(func=cmd_sweep)

    solve = commands.add_parser('solve-weights', parents=[common],
                                help='stationary greedy weights')
    solve.add_argument('lambdas', nargs='+', type=float, metavar='LAMBDA')
    solve.add_argument('--q', type=float, default=None,
                       help='survival probability (default 1)')
    solve.set_defaults(func=cmd_solve_weights)

    check = commands.add_parser('verify', parents=[common],
                                help='run the self-verification checks')
    check.add_argument('--seed', type=int, default=None)
    check.set_defaults(func=cmd_verify)
    return parser


def configure_logging(level_name=None):
    settings = cm.log_settings()
    level = LEVELS.get((level_name or settings['level']).upper())
    if level is None:
        raise UsageError('unknown logging level %r' % level_name)
    logging.basicConfig(filename=settings['log_file'],
                        format='[%(asctime)s] %(levelname)s '
                               '{%(pathname)s:%(lineno)d} - %(message)s',
                        level=level)
    logging.getLogger().setLevel(level)


def main(argv=None):
    """Parse arguments, run the subcommand and return its exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        configure_logging(args.log)
        for axis in ('lambda1', 'lambda2'):
            if getattr(args, axis, None) is not None:
                setattr(args, axis, _axis(getattr(args, axis)))
        return args.func(args)
    except UsageError as error:
        logging.error('%s', error)
        return EXIT_USAGE
    except cm.ConfigError as error:
        logging.error('Invalid configuration: %s', error)
        return EXIT_CONFIG
    except controller.NotCase1a as error:
        if error.stable:
            offending = ', '.join('lambda[%d]=%s' % (i, _fmt(args.lambdas[i]))
                                  for i in error.stable)
        else:
            offending = ', '.join('v[%d]=%s' % (i, _fmt(error.fractions.v[i]))
                                  for i in error.fractions.nonpositive)
        logging.error('No stationary weights: %s', error)
        print('not case_1a: %s' % offending)
        return EXIT_NOT_CASE_1A
    except core.RandomActuationError:
        logging.exception('Something blew up')
        return EXIT_SOFTWARE


if __name__ == "__main__":
    sys.exit(main())
