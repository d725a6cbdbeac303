#
# Licensed under the BSD license.  See full license in LICENSE file.
#

"""Configuration management for the toolkit.

Configuration files are all located in the <homedir>/config directory.
Defaults come from config/defaults.cfg, then overrides from
config/overrides.cfg and finally from ~/.random_actuation.cfg. The home
directory is $RANDOM_ACTUATION_HOME, or the directory above py/ when unset.

This file also reads and writes the run files given to the simulate
command: flat key-value files with [spectrum], [simulation] and [policy]
sections.
"""

import configparser
import io
import logging
import os
import os.path

import controller
import core
import simulate


HOME_DIR = os.getenv("RANDOM_ACTUATION_HOME") or \
    os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIG_DIR = os.path.join(HOME_DIR, 'config')

# Load configuration file, loads defaults from config directory, and then
# overrides from the same directory cfg file, then from
# ~/.random_actuation.cfg
CONFIG = configparser.RawConfigParser(allow_no_value=True)
with open(os.path.join(CONFIG_DIR, 'defaults.cfg')) as defaults_fp:
    CONFIG.read_file(defaults_fp)
CONFIG.read([os.path.join(CONFIG_DIR, 'overrides.cfg'),
             os.path.expanduser('~/.random_actuation.cfg')])

AUTO = 'auto'
NONE = 'none'


class ConfigError(core.RandomActuationError, ValueError):
    """A configuration value is missing or malformed.

    section and field name the offending entry (either may be None for
    file-level problems such as a syntax error on some line).
    """

    def __init__(self, message, section=None, field=None):
        location = '.'.join(part for part in (section, field) if part)
        if location:
            message = '[%s] %s' % (location, message)
        super(ConfigError, self).__init__(message)
        self.section = section
        self.field = field


def _as_list(list_str, delimiter=','):
    """Return a list of items from a delimited string (after stripping
    whitespace).

    :param list_str: string to turn into a list
    :type list_str: str

    :param delimiter: split the string on this
    :type delimiter: str

    :return: string converted to a list
    :rtype: list
    """
    return [str.strip(item) for item in list_str.split(delimiter)
            if str.strip(item)]


def _as_floats(list_str, section=None, field=None):
    try:
        values = [float(item) for item in _as_list(list_str)]
    except ValueError as error:
        raise ConfigError('expected a comma separated list of numbers: %s'
                          % error, section, field)
    if not values:
        raise ConfigError('expected at least one number', section, field)
    return values


def _section(name):
    return {key: CONFIG.get(name, key) for key in CONFIG.options(name)}


# Retrieve numerical tolerances
_TOLERANCES = dict()


def tolerances():
    """Retrieve the numerical tolerances

    :return: _TOLERANCES
    :rtype: dict
    """
    global _TOLERANCES
    if len(_TOLERANCES) == 0:
        _TOLERANCES = {key: CONFIG.getfloat('tolerances', key)
                       for key in CONFIG.options('tolerances')}
    return _TOLERANCES


# Retrieve the stationary weight solver settings
_SOLVER = dict()


def solver():
    """Retrieve the fixed-point solver configuration

    :return: _SOLVER
    :rtype: dict
    """
    global _SOLVER
    if len(_SOLVER) == 0:
        _SOLVER['tolerance'] = CONFIG.getfloat('solver', 'tolerance')
        _SOLVER['max_sweeps'] = CONFIG.getint('solver', 'max_sweeps')
        _SOLVER['damping'] = CONFIG.getfloat('solver', 'damping')
    return _SOLVER


# Retrieve simulation defaults
_SIMULATION = dict()


def simulation():
    """Retrieve the simulation defaults

    :return: _SIMULATION
    :rtype: dict
    """
    global _SIMULATION
    if len(_SIMULATION) == 0:
        for key in ('horizon', 'trials', 'seed', 'batch_size', 'workers'):
            _SIMULATION[key] = CONFIG.getint('simulation', key)
    return _SIMULATION


# Retrieve phase diagram sweep defaults
_SWEEP = dict()


def sweep():
    """Retrieve the sweep configuration

    Axes are (min, max, steps) triples.

    :return: _SWEEP
    :rtype: dict
    """
    global _SWEEP
    if len(_SWEEP) == 0:
        _SWEEP = _section('sweep')
        for axis in ('lambda1', 'lambda2'):
            low, high, steps = _as_list(_SWEEP[axis])
            _SWEEP[axis] = (float(low), float(high), int(steps))
        for key in ('horizon', 'trials', 'seed'):
            _SWEEP[key] = CONFIG.getint('sweep', key)
        _SWEEP['near_threshold'] = CONFIG.getfloat('sweep', 'near_threshold')
    return _SWEEP


# Retrieve self-verification settings
_VERIFY = dict()


def verify():
    """Retrieve the verify command configuration

    :return: _VERIFY
    :rtype: dict
    """
    global _VERIFY
    if len(_VERIFY) == 0:
        _VERIFY['seed'] = CONFIG.getint('verify', 'seed')
        _VERIFY['samples'] = CONFIG.getint('verify', 'samples')
    return _VERIFY


def log_settings():
    """Retrieve logging level and optional log file

    :rtype: dict
    """
    settings = _section('logging')
    settings['log_file'] = settings.get('log_file') or None
    return settings


##############################
# Simulation run files
##############################

def _get(parser, section, field, default=None):
    if parser.has_option(section, field):
        value = parser.get(section, field)
        if value is not None and value.strip():
            return value.strip()
    if default is None:
        raise ConfigError('missing value', section, field)
    return default


def _get_int(parser, section, field, default):
    value = _get(parser, section, field, str(default))
    try:
        return int(value)
    except ValueError:
        raise ConfigError('expected an integer, got %r' % value, section,
                          field)


def _weights_or_auto(text, section, field):
    if text.lower() == AUTO:
        return AUTO
    if text.lower() == NONE:
        return None
    try:
        return core.WeightMatrix(_as_floats(text, section, field))
    except core.NonPositiveWeight as error:
        raise ConfigError(str(error), section, field)


def _coordinates(text, dim):
    """Zero-based coordinate list of a mixed policy."""
    try:
        values = [int(item) for item in _as_list(text)]
    except ValueError as error:
        raise ConfigError('expected a comma separated list of integers: %s'
                          % error, 'policy', 'coordinates')
    if not values or not all(0 <= value < dim for value in values):
        raise ConfigError('coordinates must lie in 0..%d, got %r'
                          % (dim - 1, values), 'policy', 'coordinates')
    return values


def _build_policy(parser, spec, tol):
    kind = _get(parser, 'policy', 'kind', core.ZERO).lower()
    if kind == core.ZERO:
        return core.ControlPolicy.zero()

    weights = _weights_or_auto(_get(parser, 'policy', 'weights', AUTO),
                               'policy', 'weights')
    if kind == core.GREEDY:
        if weights is AUTO:
            try:
                weights = controller.stationary_controller(spec, tol)
            except controller.NotCase1a as error:
                raise ConfigError('no stationary weights: %s' % error,
                                  'policy', 'weights')
        if weights is None or weights.dim != spec.dim:
            raise ConfigError('greedy policy needs %d weights' % spec.dim,
                              'policy', 'weights')
        return core.ControlPolicy.greedy(weights)

    if kind == core.MIXED:
        if weights is AUTO:
            try:
                params = controller.build_mixed_strategy(spec, tol)
            except core.RandomActuationError as error:
                raise ConfigError('cannot build mixed strategy: %s' % error,
                                  'policy', 'kind')
        else:
            fields = {}
            for field in ('m', 'q', 'h', 'r_prime'):
                text = _get(parser, 'policy', field)
                try:
                    fields[field] = float(text)
                except ValueError:
                    raise ConfigError('expected a number, got %r' % text,
                                      'policy', field)
            m = int(fields['m'])
            if weights is None or weights.dim != m:
                raise ConfigError('mixed policy needs m subsystem weights',
                                  'policy', 'weights')
            coordinates = _coordinates(
                _get(parser, 'policy', 'coordinates',
                     ','.join(str(i) for i in range(m))), spec.dim)
            params = controller.MixedStrategyParams(
                m, fields['q'], fields['h'], weights, fields['r_prime'],
                coordinates)
        try:
            return core.ControlPolicy.from_mixed(params)
        except ValueError as error:
            raise ConfigError(str(error), 'policy', 'kind')

    raise ConfigError('unknown policy %r (zero, greedy or mixed)' % kind,
                      'policy', 'kind')


def parse_run_config(text, overrides=None, source='<string>'):
    """Build a SimulationConfig from run-file text.

    :param text: run file contents
    :type text: str

    :param overrides: horizon / trials / seed values taking precedence over
                      the file (None entries are ignored)
    :type overrides: dict

    :param source: name used in diagnostics
    :type source: str

    :rtype: simulate.SimulationConfig

    :raises: :ConfigError: naming the offending section and field
    """
    parser = configparser.RawConfigParser(allow_no_value=True)
    try:
        parser.read_string(text, source)
    except configparser.Error as error:
        raise ConfigError('cannot parse %s: %s' % (source, error))

    if not parser.has_section('spectrum'):
        raise ConfigError('missing section', 'spectrum')
    try:
        spec = core.GainSpectrum(_as_floats(
            _get(parser, 'spectrum', 'lambdas'), 'spectrum', 'lambdas'))
    except core.Singular as error:
        raise ConfigError(str(error), 'spectrum', 'lambdas')
    x0 = _as_floats(_get(parser, 'spectrum', 'x0',
                         ','.join(['1'] * spec.dim)), 'spectrum', 'x0')
    if len(x0) != spec.dim:
        raise ConfigError('x0 has %d entries, spectrum has %d'
                          % (len(x0), spec.dim), 'spectrum', 'x0')

    defaults = simulation()
    values = {}
    for field in ('horizon', 'trials', 'seed', 'batch_size'):
        values[field] = _get_int(parser, 'simulation', field,
                                 defaults[field])
    for field, value in (overrides or {}).items():
        if value is not None:
            values[field] = int(value)

    tol = solver()['tolerance']
    policy = _build_policy(parser, spec, tol)
    record = _weights_or_auto(_get(parser, 'policy', 'record_weighted', AUTO),
                              'policy', 'record_weighted')

    try:
        return simulate.SimulationConfig(
            spec, x0, values['horizon'], values['trials'], values['seed'],
            policy, None if record is AUTO else record, values['batch_size'])
    except ValueError as error:
        raise ConfigError(str(error), 'simulation')


def load_run_config(path, overrides=None):
    """Read a run file from disk, see parse_run_config."""
    try:
        with open(path) as run_fp:
            text = run_fp.read()
    except (IOError, OSError) as error:
        raise ConfigError('cannot read run file: %s' % error)
    logging.debug('Loading run file %s', path)
    return parse_run_config(text, overrides, path)


def _format_floats(values):
    return ', '.join('%.17g' % value for value in values)


def dump_run_config(config):
    """Serialize the effective configuration as a run file.

    Loading the output reproduces the same SimulationConfig exactly.

    :param config: the configuration
    :type config: simulate.SimulationConfig

    :rtype: str
    """
    parser = configparser.RawConfigParser()
    parser.add_section('spectrum')
    parser.set('spectrum', 'lambdas', _format_floats(config.spec.lambdas))
    parser.set('spectrum', 'x0', _format_floats(config.x0.x))

    parser.add_section('simulation')
    for field in ('horizon', 'trials', 'seed', 'batch_size'):
        parser.set('simulation', field, str(getattr(config, field)))

    parser.add_section('policy')
    policy = config.policy
    parser.set('policy', 'kind', policy.kind)
    if policy.weights is not None:
        parser.set('policy', 'weights', _format_floats(policy.weights.weights))
    if policy.kind == core.MIXED:
        parser.set('policy', 'm', str(policy.mixed.m))
        parser.set('policy', 'coordinates',
                   ', '.join(str(i) for i in policy.mixed.coordinates))
        for field in ('q', 'h', 'r_prime'):
            parser.set('policy', field,
                       '%.17g' % getattr(policy.mixed, field))
    if config.record_weighted is not None:
        parser.set('policy', 'record_weighted',
                   _format_floats(config.record_weighted.weights))

    output = io.StringIO()
    parser.write(output)
    return output.getvalue()
