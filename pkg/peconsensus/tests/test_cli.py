import io
import json
import os.path as op
import tempfile
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

import pytest
import numpy as np
import pandas as pd

from unittest import TestCase
from peconsensus import (RunConfig, read_config, main, get_dataset_path,
                         list_dataset, read_trajectory_csv, SweepSpec,
                         constant_kernel, piecewise_linear_kernel)
from peconsensus.exceptions import ConfigError

golden = op.join(op.dirname(op.realpath(__file__)), 'data',
                 'golden_default.ini')
minimal = '[model]\nn_agents = 4\n[kernel]\n[schedule]\n'

small_sweep = """# small shared sweep
[model]
n_agents = 4
seed = 2

[kernel]
kind = constant

[schedule]
family = duty_cycle_random_phase
shared = true  # one schedule for all pairs

[integrator]
dt = 0.01

[sweep]
mu_values = 1.0, 0.5
n_trials = 2
epsilon = 0.1
"""


def _main(*argv):
    """Run the command line, return the status, stdout and stderr."""
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        status = main([str(a) for a in argv])
    return status, out.getvalue(), err.getvalue()


class TestConfigFile(TestCase):
    """Test the run configuration of cli.py."""

    def test_golden_default(self):
        """The canonical form of the defaults is stable."""
        with open(golden) as f:
            text = f.read()
        assert RunConfig.default().to_ini() == text
        assert RunConfig.from_ini(text) == RunConfig.default()

    def test_round_trip(self):
        """Serializing a parsed configuration is idempotent."""
        for name in list_dataset().index:
            cfg = read_config(get_dataset_path(name))
            text = cfg.to_ini()
            cfg2 = RunConfig.from_ini(text)
            assert cfg2 == cfg
            assert cfg2.to_ini() == text

    def test_defaults(self):
        """Missing keys take their default value."""
        cfg = RunConfig.from_ini(minimal)
        assert cfg.model == {'n_agents': 4, 'dim': 1, 'scaling': 'fixed',
                             'seed': 0}
        assert cfg.schedule['mu'] == 0.3
        assert cfg.sweep['max_time'] is None
        assert cfg.output['dir'] == 'output'
        assert cfg.make_kernel() == constant_kernel(1)
        cfg = RunConfig.from_ini('[model]\n[kernel]\nkind = piecewise_linear'
                                 '\nknots_r = 0, 1\nknots_phi = 1, 0.5 ; ok\n'
                                 '[schedule]\nshared = yes\n')
        assert cfg.kernel['knots_r'] == (0., 1.)
        assert cfg.schedule['shared'] is True
        assert cfg.make_kernel() == piecewise_linear_kernel([0, 1], [1, 0.5])

    def test_errors(self):
        """Invalid files raise ConfigError with a line number."""
        cases = [
            (minimal + 'foo = 1\n', 5),
            (minimal + '[plots]\nsize = 3\n', 5),
            ('[model]\nn_agents = ten\n[kernel]\n[schedule]\n', 2),
            ('[model]\nn_agents = 1\n[kernel]\n[schedule]\n', 2),
            ('[model]\nscaling = normalized\n[kernel]\n[schedule]\n', 2),
            ('[model]\n[kernel]\n[schedule]\nmu = 2\n', 4),
            ('[model]\n[kernel]\n[schedule]\nshared = maybe\n', 4),
            ('[model]\n[kernel]\n[schedule]\n[sweep]\nmu_values = 1, 1\n',
             5),
            ('[model]\n[kernel]\nkind = piecewise_linear\n[schedule]\n', 2),
            ('[model\nn_agents = 4\n', 1),
            ('[DEFAULT]\nseed = 1\n' + minimal, 1),
        ]
        for text, lineno in cases:
            with pytest.raises(ConfigError) as e:
                RunConfig.from_ini(text, path='run.ini')
            assert e.value.lineno == lineno, text
            assert str(e.value).startswith('run.ini:%i:' % lineno)
        # A missing section has no line number
        with pytest.raises(ConfigError) as e:
            RunConfig.from_ini('[model]\n[schedule]\n')
        assert e.value.lineno is None and 'kernel' in str(e.value)
        with pytest.raises(ConfigError):
            read_config('/nonexistent/run.ini')

    def test_sweep_spec(self):
        """Test RunConfig.sweep_spec and RunConfig.with_overrides."""
        cfg = RunConfig.from_ini(small_sweep)
        spec = cfg.sweep_spec()
        assert isinstance(spec, SweepSpec)
        assert spec.mu_values == (1., 0.5)
        assert (spec.N, spec.n_trials, spec.master_seed) == (4, 2, 2)
        assert spec.shared_flag and spec.step == 0.01
        assert cfg.sweep_spec(mu_values=(0.3,), n_trials=1).n_trials == 1
        cfg2 = cfg.with_overrides(seed=7, mu=0.5, trials=3, out='res')
        assert cfg2.model['seed'] == 7 and cfg2.schedule['mu'] == 0.5
        assert cfg2.sweep['n_trials'] == 3 and cfg2.output['dir'] == 'res'
        assert cfg.model['seed'] == 2
        with pytest.raises(ConfigError):
            cfg.with_overrides(mu=2.)._check_consistency()


class TestCommandLine(TestCase):
    """Test the command line of cli.py."""

    def test_simulate_and_verify(self):
        """Frozen weights: agents stay still and every check passes."""
        with tempfile.TemporaryDirectory() as tmp:
            config = get_dataset_path('frozen')
            status, _, _ = _main('simulate', '--config', config, '--out',
                                 tmp)
            assert status == 0
            for name in ['trajectory.csv', 'observables.csv',
                         'trajectory.svg', 'config.ini']:
                assert op.isfile(op.join(tmp, name)), name
            traj = read_trajectory_csv(op.join(tmp, 'trajectory.csv'))
            assert traj.n_agents == 5
            assert traj.times[-1] == pytest.approx(2)
            np.testing.assert_array_equal(traj.positions,
                                          np.broadcast_to(traj.positions[0],
                                                          traj.positions.shape))
            obs = pd.read_csv(op.join(tmp, 'observables.csv'))
            assert obs.columns.tolist() == ['t', 'diameter', 'gamma_max',
                                            'gamma_min']
            # The written configuration reproduces the run
            saved = read_config(op.join(tmp, 'config.ini'))
            assert saved.output['dir'] == tmp
            assert saved.schedule['value'] == 0

            csv = op.join(tmp, 'trajectory.csv')
            status, out, _ = _main('verify', '--config', config, csv)
            assert status == 0
            reports = json.loads(out)
            assert [r['check'] for r in reports][:2] == [
                'diameter_monotone', 'gamma_max_monotone']
            assert all(r['pass'] for r in reports)

            # Push one agent away from the others at the last sample
            df = pd.read_csv(csv)
            last = (df['t'] == df['t'].max()) & (df['agent'] == 0)
            df.loc[last, 'value'] = 10.
            df.to_csv(csv, index=False)
            status, _, err = _main('verify', '--config', config, csv)
            assert status == 4
            assert 'Check failed: diameter_monotone' in err

            # Empty trajectory file
            open(csv, 'w').close()
            status, _, err = _main('verify', '--config', config, csv)
            assert status == 2
            assert 'empty' in err

    def test_simulate_2d(self):
        """Rescaled weights in the plane."""
        with tempfile.TemporaryDirectory() as tmp:
            config = get_dataset_path('rescaled_2d')
            status, _, _ = _main('simulate', '--config', config, '--out',
                                 tmp, '--seed', 5)
            assert status == 0
            assert not op.exists(op.join(tmp, 'trajectory.svg'))
            traj = read_trajectory_csv(op.join(tmp, 'trajectory.csv'))
            assert (traj.n_agents, traj.dim) == (6, 2)
            assert read_config(op.join(tmp, 'config.ini')).model['seed'] == 5
            status, _, _ = _main('verify', '--config', config,
                                 op.join(tmp, 'trajectory.csv'))
            assert status == 0

    def test_sweep(self):
        """Small sweep writes the table, the fit and the plot."""
        with tempfile.TemporaryDirectory() as tmp:
            config = Path(tmp) / 'sweep.ini'
            config.write_text(small_sweep)
            status, out, _ = _main('sweep', '--config', config, '--out', tmp)
            assert status == 0
            for name in ['sweep.csv', 'sweep_fit.json', 'sweep.svg',
                         'config.ini']:
                assert (Path(tmp) / name).is_file(), name
            assert 'slope' in out
            table = pd.read_csv(Path(tmp) / 'sweep.csv')
            assert table['mu'].tolist() == [1., 0.5]
            assert (table['n_unconverged'] == 0).all()
            fit = json.loads((Path(tmp) / 'sweep_fit.json').read_text())
            assert fit['slope'] < 0
            # Single mu: no fit
            config.write_text(small_sweep.replace('1.0, 0.5', '1.0'))
            status, _, _ = _main('sweep', '--config', config, '--out', tmp)
            assert status == 0
            fit = json.loads((Path(tmp) / 'sweep_fit.json').read_text())
            assert fit['slope'] is None
            # Zero trials
            status, _, err = _main('sweep', '--config', config, '--out', tmp,
                                   '--trials', 0)
            assert status == 2
            assert 'n_trials' in err

    def test_usage_errors(self):
        """Missing files and arguments exit with status 2."""
        with tempfile.TemporaryDirectory() as tmp:
            config = Path(tmp) / 'run.ini'
            config.write_text('[model]\n[schedule]\n')
            status, _, err = _main('simulate', '--config', config)
            assert status == 2
            assert 'kernel' in err
            status, _, _ = _main('simulate', '--config', Path(tmp) / 'no.ini')
            assert status == 2
            config.write_text(minimal)
            status, _, err = _main('simulate', '--config', config, '--mu', 2,
                                   '--out', tmp)
            assert status == 2
        assert _main('simulate')[0] == 2
        assert _main('sweep', '--config')[0] == 2
        assert _main()[0] == 2
        assert _main('--help')[0] == 0

    @pytest.mark.slow
    def test_simulate_verify_random_configs(self):
        """Simulated trajectories pass verify over random configurations."""
        rng = np.random.default_rng(17)
        kernels = ['kind = constant\nvalue = 1.5\n',
                   'kind = rational_decay\na = 1\nb = 2\np = 0.5\n',
                   'kind = piecewise_linear\nknots_r = 0, 0.5, 1.5\n'
                   'knots_phi = 1, 0.6, 0.2\n']
        families = ['duty_cycle_random_phase', 'random_blackout',
                    'random_levels', 'constant']
        with tempfile.TemporaryDirectory() as tmp:
            config = Path(tmp) / 'run.ini'
            csv = Path(tmp) / 'trajectory.csv'
            for k in range(100):
                family = families[int(rng.integers(4))]
                # Mean level of 0, 0.5, 1 is 0.5
                mu_max = 0.4 if family == 'random_levels' else 1.
                mu = round(float(rng.uniform(0.1, mu_max)), 3)
                config.write_text(
                    '[model]\nn_agents = %i\ndim = %i\nscaling = %s\n'
                    'seed = %i\n[kernel]\n%s[schedule]\nfamily = %s\n'
                    'mu = %r\nshared = %s\nlevels = 0, 0.5, 1\n'
                    '[integrator]\ndt = 0.01\nmax_time = 3\n'
                    % (rng.integers(2, 7), rng.integers(1, 4),
                       ['fixed', 'rescaled'][int(rng.integers(2))],
                       rng.integers(1000), kernels[int(rng.integers(3))],
                       family, mu, ['false', 'true'][int(rng.integers(2))]))
                status, _, err = _main('simulate', '--config', config,
                                       '--out', tmp)
                assert status == 0, (k, err)
                status, _, err = _main('verify', '--config', config, csv)
                assert status == 0, (k, err)
