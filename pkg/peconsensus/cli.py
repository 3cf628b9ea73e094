"""Command-line front end: ``peconsensus simulate | sweep | verify``.

Exit codes are 0 on success, 2 for configuration or input errors, 3 when a
simulation fails and 4 when a verification check fails.
"""
import argparse
import configparser
import logging
import re
import sys
from collections import namedtuple
from dataclasses import dataclass, replace
from pathlib import Path

import matplotlib.pyplot as plt

from .dynamics import SCALINGS, Configuration, validate_hypotheses
from .exceptions import ConfigError
from .experiments import (SweepSpec, initial_state, mu_trajectories,
                          run_sweep)
from .integrator import read_trajectory_csv
from .kernels import KERNEL_KINDS, kernel_from_dict
from .observables import verify_trajectory
from .plotting import plot_sweep, plot_trajectory
from .schedules import SCHEDULE_FAMILIES
from .utils import print_reports, print_table

__all__ = ["RunConfig", "read_config", "cmd_simulate", "cmd_sweep",
           "cmd_verify", "main"]

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_SIMULATION, EXIT_CHECK = 0, 2, 3, 4


###############################################################################
# CONFIGURATION SCHEMA
###############################################################################


_Key = namedtuple('_Key', ['kind', 'default', 'check', 'hint'])


def _key(kind, default, check=None, hint=None):
    return _Key(kind, default, check, hint)


def _positive(v):
    return v > 0


def _in(choices):
    return lambda v: v in choices


_SCHEMA = {
    'model': {
        'n_agents': _key('int', 10, lambda v: v >= 2, 'at least 2'),
        'dim': _key('int', 1, lambda v: v >= 1, 'at least 1'),
        'scaling': _key('str', 'fixed', _in(SCALINGS),
                        'one of %s' % ', '.join(SCALINGS)),
        'seed': _key('int', 0, lambda v: v >= 0, 'nonnegative'),
    },
    'kernel': {
        'kind': _key('str', 'constant', _in(KERNEL_KINDS),
                     'one of %s' % ', '.join(KERNEL_KINDS)),
        'value': _key('float', 1., _positive, 'strictly positive'),
        'knots_r': _key('floats', ()),
        'knots_phi': _key('floats', ()),
        'a': _key('float', 1., _positive, 'strictly positive'),
        'b': _key('float', 1., lambda v: v >= 0, 'nonnegative'),
        'p': _key('float', 1., lambda v: v >= 0, 'nonnegative'),
        'lipschitz': _key('optfloat', None),
    },
    'schedule': {
        'family': _key('str', 'duty_cycle_random_phase',
                       _in(SCHEDULE_FAMILIES),
                       'one of %s' % ', '.join(SCHEDULE_FAMILIES)),
        'mu': _key('float', 0.3, _positive, 'strictly positive'),
        'window': _key('float', 1., _positive, 'strictly positive'),
        'shared': _key('bool', False),
        'symmetric': _key('bool', False),
        'levels': _key('floats', (0., 0.5, 1.),
                       lambda v: len(v) > 0 and all(0 <= x <= 1 for x in v),
                       'a non-empty list of values in [0, 1]'),
        'value': _key('optfloat', None, lambda v: v is None or 0 <= v <= 1,
                      'in [0, 1]'),
    },
    'integrator': {
        'dt': _key('float', 1e-3, _positive, 'strictly positive'),
        'record_every': _key('int', 1, lambda v: v >= 1, 'at least 1'),
        'max_time': _key('float', 10., _positive, 'strictly positive'),
        'stop_diameter': _key('float', 0., lambda v: v >= 0, 'nonnegative'),
    },
    'sweep': {
        'mu_values': _key('floats', (1., 0.6, 0.3, 0.1),
                          lambda v: len(v) > 0 and all(x > 0 for x in v),
                          'a non-empty list of positive values'),
        'n_trials': _key('int', 100, lambda v: v >= 1, 'at least 1'),
        'epsilon': _key('float', 1e-2, _positive, 'strictly positive'),
        'max_time': _key('optfloat', None,
                         lambda v: v is None or v > 0, 'strictly positive'),
        'n_jobs': _key('int', 1, lambda v: v != 0, 'non-zero'),
    },
    'output': {
        'dir': _key('str', 'output'),
    },
}

REQUIRED_SECTIONS = ('model', 'kernel', 'schedule')

_TRUE = ('true', 'yes', 'on', '1')
_FALSE = ('false', 'no', 'off', '0')


def _parse_value(kind, raw):
    raw = raw.strip()
    if kind == 'int':
        return int(raw)
    if kind == 'float':
        return float(raw)
    if kind == 'optfloat':
        return None if raw.lower() in ('', 'none') else float(raw)
    if kind == 'bool':
        if raw.lower() in _TRUE:
            return True
        if raw.lower() in _FALSE:
            return False
        raise ValueError('not a boolean')
    if kind == 'floats':
        return tuple(float(v) for v in raw.split(',')) if raw else ()
    return raw


def _format_value(kind, value):
    if value is None:
        return ''
    if kind == 'bool':
        return 'true' if value else 'false'
    if kind in ('float', 'optfloat'):
        return repr(float(value))
    if kind == 'floats':
        return ', '.join(repr(float(v)) for v in value)
    return str(value)


_HEADER = re.compile(r'^\s*\[(?P<name>[^\]]+)\]')


def _line_of(text, section, key=None):
    """Line number of a section header, or of a key within a section."""
    current = None
    for lineno, line in enumerate(text.splitlines(), 1):
        match = _HEADER.match(line)
        if match:
            current = match.group('name')
            if key is None and current == section:
                return lineno
            continue
        stripped = line.strip()
        if (key is None or current != section or not stripped
                or stripped[0] in '#;'):
            continue
        name = re.split(r'[=:]', stripped, maxsplit=1)[0].strip().lower()
        if name == key:
            return lineno
    return None


###############################################################################
# RUN CONFIGURATION
###############################################################################


@dataclass(frozen=True)
class RunConfig:
    """Typed content of a run configuration file.

    Each attribute holds the keys of the INI section of the same name. See
    ``docs/configuration.rst`` for the reference of every key.

    Examples
    --------
    >>> from peconsensus import RunConfig
    >>> cfg = RunConfig.from_ini('[model]\\nn_agents = 4\\n[kernel]\\n'
    ...                          '[schedule]\\nmu = 0.5\\n')
    >>> cfg.model['n_agents'], cfg.schedule['mu'], cfg.kernel['kind']
    (4, 0.5, 'constant')
    """

    model: dict
    kernel: dict
    schedule: dict
    integrator: dict
    sweep: dict
    output: dict

    @classmethod
    def default(cls):
        """Configuration with every key at its default."""
        return cls(**{s: {k: spec.default for k, spec in keys.items()}
                      for s, keys in _SCHEMA.items()})

    @classmethod
    def from_ini(cls, text, path=None):
        """Parse an INI document.

        Raises
        ------
        ConfigError
            On a syntax error, an unknown section or key, a missing
            required section or an invalid value. The error carries the
            line number when the culprit is in the file.
        """
        parser = configparser.ConfigParser(
            interpolation=None, inline_comment_prefixes=('#', ';'))
        try:
            parser.read_string(text, source=str(path or '<string>'))
        except configparser.Error as err:
            lineno = getattr(err, 'lineno', None)
            if lineno is None and getattr(err, 'errors', None):
                lineno = err.errors[0][0]
            raise ConfigError('Syntax error: %s' % err.message.splitlines()[0],
                              lineno, path) from err
        if parser.defaults():
            raise ConfigError('A [DEFAULT] section is not supported.',
                              _line_of(text, 'DEFAULT'), path)

        for section in parser.sections():
            if section not in _SCHEMA:
                raise ConfigError('Unknown section [%s]. Valid sections are: '
                                  '%s.' % (section, ', '.join(_SCHEMA)),
                                  _line_of(text, section), path)
        for section in REQUIRED_SECTIONS:
            if not parser.has_section(section):
                raise ConfigError('Missing required section [%s].' % section,
                                  None, path)

        values = {}
        for section, keys in _SCHEMA.items():
            values[section] = {k: spec.default for k, spec in keys.items()}
            if not parser.has_section(section):
                continue
            for key, raw in parser.items(section):
                lineno = _line_of(text, section, key)
                if key not in keys:
                    raise ConfigError('Unknown key %r in [%s]. Valid keys '
                                      'are: %s.' % (key, section,
                                                    ', '.join(keys)),
                                      lineno, path)
                spec = keys[key]
                try:
                    value = _parse_value(spec.kind, raw)
                except ValueError:
                    raise ConfigError('Invalid value %r for %s.%s (expected '
                                      '%s).' % (raw, section, key, spec.kind),
                                      lineno, path) from None
                if spec.check is not None and not spec.check(value):
                    raise ConfigError('%s.%s must be %s (got %r).'
                                      % (section, key, spec.hint, raw),
                                      lineno, path)
                values[section][key] = value

        cfg = cls(**values)
        cfg._check_consistency(text, path)
        return cfg

    def _check_consistency(self, text='', path=None):
        window = self.schedule['window']
        if self.schedule['mu'] > window:
            raise ConfigError('schedule.mu must be <= schedule.window.',
                              _line_of(text, 'schedule', 'mu'), path)
        if any(m > window for m in self.sweep['mu_values']):
            raise ConfigError('Every sweep.mu_values must be <= '
                              'schedule.window.',
                              _line_of(text, 'sweep', 'mu_values'), path)
        if len(set(self.sweep['mu_values'])) != len(self.sweep['mu_values']):
            raise ConfigError('sweep.mu_values must not contain duplicates.',
                              _line_of(text, 'sweep', 'mu_values'), path)
        try:
            self.make_kernel()
        except (ValueError, AssertionError) as err:
            raise ConfigError('Invalid [kernel]: %s' % err,
                              _line_of(text, 'kernel'), path) from None

    def to_ini(self):
        """Canonical INI form: every section and key, in reference order."""
        blocks = []
        for section, keys in _SCHEMA.items():
            current = getattr(self, section)
            lines = ['[%s]' % section]
            for key, spec in keys.items():
                lines.append(('%s = %s' % (key, _format_value(
                    spec.kind, current[key]))).rstrip())
            blocks.append('\n'.join(lines))
        return '\n\n'.join(blocks) + '\n'

    def with_overrides(self, seed=None, mu=None, trials=None, out=None):
        """Copy with the command-line overrides applied."""
        cfg = self
        if seed is not None:
            cfg = replace(cfg, model={**cfg.model, 'seed': int(seed)})
        if mu is not None:
            cfg = replace(cfg, schedule={**cfg.schedule, 'mu': float(mu)})
        if trials is not None:
            cfg = replace(cfg, sweep={**cfg.sweep, 'n_trials': int(trials)})
        if out is not None:
            cfg = replace(cfg, output={**cfg.output, 'dir': str(out)})
        return cfg

    def make_kernel(self):
        """:py:class:`peconsensus.InfluenceKernel` of the [kernel] section."""
        d = {k: v for k, v in self.kernel.items()
             if v is not None and v != ()}
        return kernel_from_dict(d)

    def sweep_spec(self, mu_values=None, n_trials=None):
        """:py:class:`peconsensus.SweepSpec` of this configuration.

        ``[model]``, ``[kernel]`` and ``[schedule]`` describe the model and
        ``[sweep]`` the Monte Carlo design. ``[integrator]`` provides the
        step and the recording stride.
        """
        sw, sc = self.sweep, self.schedule
        return SweepSpec(
            mu_values=tuple(sw['mu_values'] if mu_values is None
                            else mu_values),
            n_trials=sw['n_trials'] if n_trials is None else n_trials,
            N=self.model['n_agents'], d=self.model['dim'], T=sc['window'],
            epsilon=sw['epsilon'], kernel=self.make_kernel(),
            scaling=self.model['scaling'], schedule_family=sc['family'],
            shared_flag=sc['shared'], symmetric=sc['symmetric'],
            master_seed=self.model['seed'], max_time=sw['max_time'],
            levels=tuple(sc['levels']), value=sc['value'],
            dt=self.integrator['dt'],
            record_every=self.integrator['record_every'],
            n_jobs=sw['n_jobs'])


def read_config(path):
    """Read and validate a configuration file.

    Raises
    ------
    ConfigError
        If the file cannot be read or is invalid.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError('Cannot read configuration: %s' % err.strerror,
                          None, path) from None
    return RunConfig.from_ini(text, path)


###############################################################################
# COMMANDS
###############################################################################


def _output_dir(cfg):
    out = Path(cfg.output['dir'])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _save_svg(ax, path):
    fig = ax.get_figure()
    fig.tight_layout()
    fig.savefig(path, format='svg')
    plt.close(fig)


def cmd_simulate(cfg):
    """Run one simulation and write its artifacts.

    Writes ``trajectory.csv``, ``observables.csv``, ``trajectory.svg``
    (d=1 only) and ``config.ini`` in the output directory.

    Returns
    -------
    status : int
    """
    mu = cfg.schedule['mu']
    spec = cfg.sweep_spec(mu_values=(mu,), n_trials=1)
    bounds = validate_hypotheses(
        _configuration_for(spec), initial_state(spec, 0))
    settings = cfg.integrator
    traj = mu_trajectories(spec, (mu,), 0, max_time=settings['max_time'],
                           stop_diameter=settings['stop_diameter'])[mu]
    out = _output_dir(cfg)
    traj.to_csv(out / 'trajectory.csv')
    df = traj.to_dataframe().observables_table()
    df.to_csv(out / 'observables.csv', index=False)
    if traj.dim == 1:
        _save_svg(plot_trajectory(traj), out / 'trajectory.svg')
    (out / 'config.ini').write_text(cfg.to_ini())
    logger.info('Simulated %i samples up to t=%g (%s); K_max=%g. Output in '
                '%s', len(traj), traj.times[-1], traj.stop_reason,
                bounds.k_max, out)
    return EXIT_OK


def cmd_sweep(cfg):
    """Run the Monte Carlo sweep and write its artifacts.

    Writes ``sweep.csv``, ``sweep_fit.json``, ``sweep.svg`` and
    ``config.ini`` in the output directory, and prints the summary table.

    Returns
    -------
    status : int
    """
    spec = cfg.sweep_spec()
    result = run_sweep(spec)
    out = _output_dir(cfg)
    result.to_csv(out / 'sweep.csv')
    _save_svg(plot_sweep(result), out / 'sweep.svg')
    (out / 'config.ini').write_text(cfg.to_ini())
    print_table(result.table)
    if result.fit is not None:
        print('slope = %.4f, intercept = %.4f, r2 = %.4f' % result.fit)
    return EXIT_OK


def cmd_verify(cfg, trajectory):
    """Replay the trajectory checks on an exported trajectory.

    Prints the JSON check report. The first failing check is named on
    stderr.

    Returns
    -------
    status : int
        0 if every check passes, 4 otherwise.
    """
    spec = cfg.sweep_spec(n_trials=1)
    traj = read_trajectory_csv(trajectory)
    bounds = validate_hypotheses(_configuration_for(spec), traj.initial)
    reports = verify_trajectory(traj, bounds.k_max, spec.T)
    print_reports(reports)
    failed = [r for r in reports if not r.passed]
    if failed:
        first = failed[0]
        print('Check failed: %s (t=%r, margin=%r)'
              % (first.check, first.witness_time, first.margin),
              file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def _configuration_for(spec):
    return Configuration(spec.kernel, spec.scaling, spec.N, spec.d)


###############################################################################
# ENTRY POINT
###############################################################################


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', required=True, metavar='PATH',
                        help='INI configuration file.')
    common.add_argument('--out', metavar='DIR',
                        help='Output directory (overrides [output] dir).')
    common.add_argument('--seed', type=int,
                        help='Master seed (overrides [model] seed).')
    common.add_argument('--mu', type=float,
                        help='PE level of simulate (overrides [schedule] mu).')
    common.add_argument('--trials', type=int,
                        help='Trials per mu (overrides [sweep] n_trials).')
    common.add_argument('-v', '--verbose', action='count', default=0,
                        help='-v for INFO, -vv for DEBUG messages.')

    parser = argparse.ArgumentParser(
        prog='peconsensus',
        description='Consensus under persistently exciting weights.')
    sub = parser.add_subparsers(dest='command', required=True)
    sub.add_parser('simulate', parents=[common],
                   help='Run one simulation.')
    sub.add_parser('sweep', parents=[common],
                   help='Run the Monte Carlo sweep over mu.')
    verify = sub.add_parser('verify', parents=[common],
                            help='Check an exported trajectory.')
    verify.add_argument('trajectory', metavar='CSV',
                        help='Trajectory written by simulate.')
    return parser


def _setup_logging(verbosity):
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity,
                                                      logging.DEBUG)
    logging.basicConfig(
        level=level, stream=sys.stderr,
        format='%(asctime)s %(name)s %(levelname)s: %(message)s')
    logging.captureWarnings(True)


def main(argv=None):
    """Run the ``peconsensus`` command line and return its exit status."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_CONFIG if err.code else EXIT_OK
    _setup_logging(args.verbose)

    try:
        cfg = read_config(args.config).with_overrides(
            args.seed, args.mu, args.trials, args.out)
        cfg._check_consistency()
        if args.command == 'simulate':
            return cmd_simulate(cfg)
        if args.command == 'sweep':
            return cmd_sweep(cfg)
        return cmd_verify(cfg, args.trajectory)
    except (ValueError, AssertionError, OSError) as err:
        print('peconsensus: error: %s' % err, file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError) as err:
        print('peconsensus: simulation failed: %s' % err, file=sys.stderr)
        return EXIT_SIMULATION


if __name__ == '__main__':
    sys.exit(main())
