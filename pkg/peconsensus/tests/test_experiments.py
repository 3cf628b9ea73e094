import json
import tempfile
from dataclasses import replace
from pathlib import Path

import pytest
import numpy as np
import pandas as pd

from unittest import TestCase
from peconsensus import (SweepSpec, SweepResult, LogLogFit, State,
                         Configuration, IntegratorSettings, ScheduleEnsemble,
                         run_trial, run_sweep, loglog_fit, mu_trajectories,
                         averaged_comparison, initial_state, simulate,
                         make_constant, constant_kernel, rational_kernel,
                         diameter, effective_time)
from peconsensus.exceptions import DegenerateFit, EmptyAggregate

# Small shared-schedule sweep, fast enough for every run of the test suite
small = SweepSpec(mu_values=(1., 0.5, 0.25), n_trials=3, N=4, epsilon=0.05,
                  shared_flag=True, dt=0.01)


class TestExperiments(TestCase):
    """Test experiments.py."""

    def test_sweep_spec(self):
        """Test SweepSpec."""
        spec = SweepSpec()
        assert spec.mu_values == (1., 0.6, 0.3, 0.1)
        assert (spec.n_trials, spec.N, spec.d, spec.T) == (100, 10, 1, 1.)
        assert spec.kernel == constant_kernel(1)
        assert spec.step == 1e-3
        assert spec.max_time_for(0.1) == pytest.approx(4605.17, abs=0.01)
        assert spec.max_time_for(1.) == pytest.approx(460.517, abs=0.001)
        assert SweepSpec(max_time=50.).max_time_for(0.1) == 50
        # ln(sqrt(d) / epsilon) is floored at 1
        assert SweepSpec(epsilon=0.9).max_time_for(0.5) == 200
        assert SweepSpec(mu_values=[0.5]).mu_values == (0.5,)
        for kw in [{'mu_values': []}, {'mu_values': (0.3, 0.3)},
                   {'mu_values': (1.5,)}, {'mu_values': (0.,)},
                   {'n_trials': 0}, {'N': 1}, {'d': 0}, {'epsilon': 0},
                   {'max_time': -1.}, {'scaling': 'normalized'},
                   {'schedule_family': 'sinusoid'}]:
            with pytest.raises(ValueError):
                SweepSpec(**kw)

    def test_initial_state(self):
        """Initial positions only depend on the seed and the trial."""
        spec = SweepSpec(N=5, d=2)
        x = initial_state(spec, 3)
        assert isinstance(x, State) and x.positions.shape == (5, 2)
        assert (x.positions >= 0).all() and (x.positions <= 1).all()
        np.testing.assert_array_equal(
            x.positions, initial_state(replace(spec, mu_values=(0.2,)),
                                       3).positions)
        assert not np.array_equal(x.positions,
                                  initial_state(spec, 4).positions)
        assert not np.array_equal(
            x.positions, initial_state(replace(spec, master_seed=1),
                                       3).positions)
        # Shared by every mu of a sweep
        trajs = mu_trajectories(spec, [1., 0.5], trial_index=3, max_time=0.1)
        assert list(trajs) == [1., 0.5]
        for traj in trajs.values():
            np.testing.assert_array_equal(traj.positions[0], x.positions)

    def test_run_trial(self):
        """Test function run_trial."""
        spec = SweepSpec(N=10, dt=0.01)
        # mu = T: M = 1 and D(t) = D(0) exp(-t)
        d0 = diameter(initial_state(spec, 0))
        t = run_trial(spec, 1., 0)
        assert t == pytest.approx(np.log(d0 / spec.epsilon), rel=0.01)
        spec = SweepSpec(N=4, epsilon=0.1, dt=0.01)
        assert run_trial(spec, 0.5, 2) == run_trial(spec, 0.5, 2)
        assert run_trial(spec, 0.5, 2) != run_trial(spec, 0.5, 3)
        assert run_trial(replace(spec, epsilon=2.), 0.5, 0) == 0
        assert run_trial(replace(spec, max_time=0.05), 0.5, 0) is None
        with pytest.raises(AssertionError):
            run_trial(spec, 1.5, 0)

    def test_loglog_fit(self):
        """Test function loglog_fit."""
        mu = np.array([1., 0.6, 0.3, 0.1])
        fit = loglog_fit(mu, 4.6 / mu)
        assert isinstance(fit, LogLogFit)
        assert fit.slope == pytest.approx(-1)
        assert fit.intercept == pytest.approx(np.log(4.6))
        assert fit.r_squared == pytest.approx(1)
        # Two points always give a perfect fit
        assert loglog_fit([1., 0.5], [3., 5.]).r_squared == pytest.approx(1)
        fit = loglog_fit(mu, [4., 9., 13., 50.])
        assert 0.9 < fit.r_squared < 1
        # Constant times
        fit = loglog_fit(mu, [2., 2., 2., 2.])
        assert fit.slope == pytest.approx(0, abs=1e-12)
        assert fit.r_squared == 1
        with pytest.raises(DegenerateFit):
            loglog_fit([0.5, 0.5], [1., 2.])
        with pytest.raises(ValueError):
            loglog_fit([0.5], [1.])
        with pytest.raises(ValueError):
            loglog_fit([0.5, 1.], [0., 2.])
        with pytest.raises(ValueError):
            loglog_fit([0.5, -1.], [1., 2.])
        with pytest.raises(ValueError):
            loglog_fit([0.5, 1.], [np.inf, 2.])

    def test_run_sweep(self):
        """Test function run_sweep."""
        res = run_sweep(small)
        assert isinstance(res, SweepResult)
        table = res.table
        assert table.columns.tolist() == ['mu', 'mean_time', 'std', 'min',
                                          'max', 'n_unconverged']
        assert table['mu'].tolist() == [1., 0.5, 0.25]
        assert (table['n_unconverged'] == 0).all()
        assert (table['min'] <= table['mean_time']).all()
        assert (table['mean_time'] <= table['max']).all()
        assert np.all(np.diff(table['mean_time']) > 0)
        assert -1.2 < res.fit.slope < -0.8
        assert res.fit.r_squared > 0.95
        trials = res.trials
        assert trials.shape == (9, 4)
        assert trials['converged'].all()
        np.testing.assert_allclose(
            trials.groupby('mu', sort=False)['time'].mean(),
            table['mean_time'])
        # mu = T runs are exactly the exp(-t) decay
        d0 = [diameter(initial_state(small, k)) for k in range(3)]
        np.testing.assert_allclose(trials['time'][:3],
                                   np.log(np.array(d0) / small.epsilon),
                                   rtol=1e-3)

    def test_run_sweep_parallel(self):
        """Parallel jobs do not change the result."""
        res1 = run_sweep(replace(small, n_jobs=1))
        res2 = run_sweep(replace(small, n_jobs=2))
        pd.testing.assert_frame_equal(res1.table, res2.table)
        pd.testing.assert_frame_equal(res1.trials, res2.trials)
        assert res1.fit == res2.fit

    def test_run_sweep_edge_cases(self):
        """No convergence and a single mu."""
        with pytest.raises(EmptyAggregate):
            run_sweep(replace(small, mu_values=(1., 0.5), max_time=0.05))
        with pytest.warns(UserWarning):
            res = run_sweep(replace(small, mu_values=(1.,)))
        assert res.fit is None
        assert len(res.table) == 1
        with tempfile.TemporaryDirectory() as tmp:
            sidecar = res.to_csv(Path(tmp) / 'sweep.csv')
            assert sidecar.name == 'sweep_fit.json'
            assert json.loads(sidecar.read_text()) == {
                'slope': None, 'intercept': None, 'r_squared': None}

    def test_to_csv(self):
        """Test SweepResult.to_csv."""
        res = run_sweep(replace(small, mu_values=(1., 0.5), n_trials=2))
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'out.csv'
            sidecar = res.to_csv(path)
            assert sidecar == Path(tmp) / 'out_fit.json'
            table = pd.read_csv(path)
            assert table.columns.tolist() == res.table.columns.tolist()
            np.testing.assert_allclose(table['mean_time'],
                                       res.table['mean_time'])
            fit = json.loads(sidecar.read_text())
            assert fit['slope'] == pytest.approx(res.fit.slope)
            assert fit['r_squared'] == pytest.approx(res.fit.r_squared)

    def test_shared_reparametrization(self):
        """A shared schedule runs the M = 1 dynamics at effective time."""
        spec = SweepSpec(mu_values=(0.3,), N=5, kernel=rational_kernel(),
                         shared_flag=True, dt=0.01)
        traj = mu_trajectories(spec, max_time=3.)[0.3]
        s = effective_time(traj)
        assert s[-1] == pytest.approx(0.9, abs=1e-9)
        ref = simulate(traj.initial,
                       ScheduleEnsemble.uniform(5, make_constant(1., 2.)),
                       Configuration(spec.kernel),
                       IntegratorSettings(dt=1e-3, max_time=s[-1] + 0.01))
        for i in range(5):
            expected = np.interp(s, ref.times, ref.positions[:, i, 0])
            np.testing.assert_allclose(traj.positions[:, i, 0], expected,
                                       atol=1e-6)
        # Linear case: D(t) = D(0) exp(-int M)
        spec = replace(spec, kernel=constant_kernel(1))
        traj = mu_trajectories(spec, max_time=3.)[0.3]
        np.testing.assert_allclose(
            diameter(traj.positions),
            diameter(traj.positions[0]) * np.exp(-effective_time(traj)),
            rtol=1e-8)

    def test_mu_trajectories(self):
        """Without max_time, each run stops at the consensus threshold."""
        spec = replace(small, mu_values=(1., 0.5))
        trajs = mu_trajectories(spec)
        for mu, traj in trajs.items():
            assert traj.stop_reason == 'diameter_threshold'
            assert diameter(traj.positions[-1]) < spec.epsilon
            assert traj.weight_integrals is not None
        assert trajs[0.5].times[-1] > trajs[1.].times[-1]

    def test_averaged_comparison(self):
        """Test function averaged_comparison."""
        spec = replace(small, mu_values=(1., 0.5), n_trials=2,
                       shared_flag=False)
        comp = averaged_comparison(spec)
        assert comp.columns.tolist() == ['mu', 'mean_time_pe',
                                         'mean_time_avg', 'ratio']
        # mu = T: the PE weight is its own average
        assert comp['ratio'].iloc[0] == pytest.approx(1)
        assert (comp['ratio'] > 0).all()
        # Averaged weights M = mu / T slow the decay by 1 / mu
        np.testing.assert_allclose(comp['mean_time_avg'].iloc[1],
                                   2 * comp['mean_time_avg'].iloc[0],
                                   rtol=1e-3)

    @pytest.mark.slow
    def test_reference_sweeps(self):
        """Reference sweeps: monotone in mu and linear in log-log."""
        spec = SweepSpec(n_trials=100, dt=0.01, n_jobs=-1)
        for kernel in [constant_kernel(1), rational_kernel(1, 1, 1)]:
            res = run_sweep(replace(spec, kernel=kernel))
            assert (res.table['n_unconverged'] == 0).all()
            assert np.all(np.diff(res.table['mean_time']) > 0)
            assert res.fit.r_squared >= 0.98
            assert res.fit.slope < 0

    @pytest.mark.slow
    def test_shared_sweep_slope(self):
        """One shared duty cycle gives a slope of -1."""
        spec = SweepSpec(n_trials=100, dt=0.01, shared_flag=True,
                         n_jobs=-1)
        res = run_sweep(spec)
        assert res.fit.slope == pytest.approx(-1, abs=0.02)
        assert res.fit.r_squared >= 0.98
