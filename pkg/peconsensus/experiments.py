"""Monte Carlo sweeps of the convergence time against the PE level mu."""
import json
import logging
import warnings
from collections import namedtuple
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .config import options
from .dynamics import SCALINGS, Configuration, State
from .exceptions import DegenerateFit, EmptyAggregate, NonFiniteState
from .integrator import IntegratorSettings, simulate
from .kernels import InfluenceKernel, constant_kernel
from .observables import consensus_time
from .schedules import (SCHEDULE_FAMILIES, PEParameters, declared_pe,
                        make_ensemble)
from .utils import _postprocess_dataframe, _seed_sequence

__all__ = ["SweepSpec", "SweepResult", "LogLogFit", "run_trial", "run_sweep",
           "loglog_fit", "mu_trajectories", "averaged_comparison",
           "initial_state"]

logger = logging.getLogger(__name__)

LogLogFit = namedtuple('LogLogFit', ['slope', 'intercept', 'r_squared'])

# Stream tags of _seed_sequence
_POSITIONS, _SCHEDULES = 0, 1


###############################################################################
# TYPES
###############################################################################


@dataclass(frozen=True)
class SweepSpec:
    """Monte Carlo sweep over the PE level mu.

    The defaults reproduce the reference experiment: 10 agents on the real
    line, :math:`\\lambda_i = 1`, :math:`T = 1`, :math:`\\phi \\equiv 1`,
    duty-cycle weights with an independent random phase per pair, and a
    consensus threshold of :math:`10^{-2}`.

    Parameters
    ----------
    mu_values : tuple of float
        PE levels, each in ``(0, T]``, without duplicates.
    n_trials : int
        Number of initial configurations per mu (>= 1).
    N : int
        Number of agents.
    d : int
        Dimension. Initial positions are uniform on :math:`[0, 1]^d`.
    T : float
        PE window.
    epsilon : float
        Consensus threshold on the diameter.
    kernel : :py:class:`peconsensus.InfluenceKernel`
        Influence kernel.
    scaling : str
        ``'fixed'`` or ``'rescaled'``.
    schedule_family : str
        One of ``peconsensus.SCHEDULE_FAMILIES``.
    shared_flag : bool
        If True, all pairs share one schedule.
    symmetric : bool
        If True, :math:`M_{ij} = M_{ji}`.
    master_seed : int
        Seed of all random streams.
    max_time : float or None
        Simulation horizon. If None, each mu gets
        :math:`100 (T/\\mu) \\ln(\\sqrt{d}/\\varepsilon)`.
    levels : tuple of float
        Level grid of the ``'random_levels'`` family.
    value : float or None
        Weight of the ``'constant'`` family (default ``mu / T``).
    dt : float or None
        Integration step. Default is ``options['dt_fraction'] * T``.
    record_every : int
        Recording stride of the integrator.
    n_jobs : int or None
        Number of parallel jobs of :py:class:`joblib.Parallel`. -1 uses all
        CPUs. Default is
        ``options['n_jobs']``.
    """

    mu_values: tuple = (1., 0.6, 0.3, 0.1)
    n_trials: int = 100
    N: int = 10
    d: int = 1
    T: float = 1.
    epsilon: float = 1e-2
    kernel: InfluenceKernel = field(default_factory=constant_kernel)
    scaling: str = 'fixed'
    schedule_family: str = 'duty_cycle_random_phase'
    shared_flag: bool = False
    symmetric: bool = False
    master_seed: int = 0
    max_time: float = None
    levels: tuple = (0., 0.5, 1.)
    value: float = None
    dt: float = None
    record_every: int = 1
    n_jobs: int = None

    def __post_init__(self):
        mu = tuple(float(m) for m in np.atleast_1d(self.mu_values))
        object.__setattr__(self, 'mu_values', mu)
        object.__setattr__(self, 'levels',
                           tuple(float(v) for v in self.levels))
        if not mu:
            raise ValueError('mu_values must not be empty.')
        if len(set(mu)) != len(mu):
            raise ValueError('mu_values must not contain duplicates.')
        if not all(0 < m <= self.T for m in mu):
            raise ValueError('Every mu must lie in (0, T=%r] (got %s).'
                             % (self.T, list(mu)))
        if int(self.n_trials) < 1:
            raise ValueError('n_trials must be at least 1 (got %r).'
                             % self.n_trials)
        if int(self.N) < 2:
            raise ValueError('N must be at least 2.')
        if int(self.d) < 1:
            raise ValueError('d must be at least 1.')
        if not self.epsilon > 0:
            raise ValueError('epsilon must be strictly positive.')
        if self.max_time is not None and not self.max_time > 0:
            raise ValueError('max_time must be strictly positive.')
        if self.scaling not in SCALINGS:
            raise ValueError('scaling must be one of %s.'
                             % ', '.join(SCALINGS))
        if self.schedule_family not in SCHEDULE_FAMILIES:
            raise ValueError('schedule_family must be one of %s.'
                             % ', '.join(SCHEDULE_FAMILIES))
        assert isinstance(self.kernel, InfluenceKernel), \
            'kernel must be an InfluenceKernel.'

    def max_time_for(self, mu):
        """Simulation horizon used for ``mu``."""
        if self.max_time is not None:
            return float(self.max_time)
        log_ratio = max(np.log(np.sqrt(self.d) / self.epsilon), 1.)
        return float(100 * (self.T / mu) * log_ratio)

    @property
    def step(self):
        """Integration step."""
        if self.dt is not None:
            return float(self.dt)
        return float(options['dt_fraction'] * self.T)


@dataclass(frozen=True)
class SweepResult:
    """Outcome of :py:func:`run_sweep`.

    Parameters
    ----------
    table : :py:class:`pandas.DataFrame`
        One row per mu with columns ``mu, mean_time, std, min, max,
        n_unconverged``.
    fit : :py:class:`LogLogFit` or None
        Least-squares line of log(mean_time) against log(mu), None with a
        single mu.
    trials : :py:class:`pandas.DataFrame`
        One row per trial with columns ``mu, trial, time, converged``.
    """

    table: pd.DataFrame
    fit: LogLogFit
    trials: pd.DataFrame

    def to_csv(self, path):
        """Write the summary table and its ``<stem>_fit.json`` sidecar.

        Returns
        -------
        sidecar : :py:class:`pathlib.Path`
            Path of the JSON file.
        """
        path = Path(path)
        self.table.to_csv(path, index=False)
        sidecar = path.with_name(path.stem + '_fit.json')
        fit = (self.fit._asdict() if self.fit is not None else
               dict.fromkeys(LogLogFit._fields))
        sidecar.write_text(json.dumps({k: (None if v is None else float(v))
                                       for k, v in fit.items()}, indent=2))
        return sidecar


###############################################################################
# TRIALS
###############################################################################


def initial_state(spec, trial_index=0):
    """Initial configuration of a trial, uniform on :math:`[0, 1]^d`.

    Seeded by ``(spec.master_seed, trial_index)`` only, so every mu of a
    sweep starts trial ``trial_index`` from the same positions.
    """
    ss = _seed_sequence(spec.master_seed, _POSITIONS, trial_index)
    rng = np.random.default_rng(ss)
    return State(rng.uniform(0, 1, size=(spec.N, spec.d)))


def _simulate_trial(spec, mu, trial_index, max_time, stop_diameter,
                    record_weights=False):
    params = PEParameters(mu, spec.T)
    initial = initial_state(spec, trial_index)
    ensemble = make_ensemble(
        spec.N, spec.schedule_family, params, max_time,
        seed=_seed_sequence(spec.master_seed, _SCHEDULES, mu, trial_index),
        shared=spec.shared_flag, symmetric=spec.symmetric,
        levels=spec.levels, value=spec.value)
    config = Configuration(spec.kernel, spec.scaling, spec.N, spec.d,
                           declared_pe(spec.schedule_family, params,
                                       spec.value))
    settings = IntegratorSettings(spec.step, spec.record_every, max_time,
                                  stop_diameter, record_weights)
    try:
        return simulate(initial, ensemble, config, settings)
    except NonFiniteState as err:
        raise NonFiniteState('Trial %i at mu=%r: %s' % (trial_index, mu, err),
                             time=err.time) from err


def run_trial(spec, mu, trial_index):
    """Convergence time of one trial.

    Parameters
    ----------
    spec : :py:class:`SweepSpec`
        Sweep specification.
    mu : float
        PE level, in ``(0, T]``.
    trial_index : int
        Index of the initial configuration.

    Returns
    -------
    time : float or None
        First time the diameter drops below ``spec.epsilon``, or None if it
        does not before ``spec.max_time_for(mu)``.

    Notes
    -----
    Initial positions are drawn i.i.d. uniform on :math:`[0, 1]^d` from a
    stream seeded by ``(master_seed, trial_index)``, so that trial ``k``
    starts from the same configuration for every mu. The weights are drawn
    from a stream seeded by ``(master_seed, mu, trial_index)``. The result
    only depends on this triple.

    Examples
    --------
    >>> import peconsensus as pc
    >>> spec = pc.SweepSpec(mu_values=[1.], n_trials=1, N=4, epsilon=0.1)
    >>> t = pc.run_trial(spec, 1., 0)
    >>> t == pc.run_trial(spec, 1., 0)
    True
    """
    assert 0 < mu <= spec.T, 'mu must lie in (0, T].'
    assert int(trial_index) >= 0, 'trial_index must be nonnegative.'
    traj = _simulate_trial(spec, mu, trial_index, spec.max_time_for(mu),
                           spec.epsilon)
    if traj.stop_reason != 'diameter_threshold':
        logger.debug('Trial %i at mu=%g did not converge before t=%g',
                     trial_index, mu, traj.times[-1])
        return None
    return consensus_time(traj, spec.epsilon)


def run_sweep(spec):
    """Run every trial of a sweep and aggregate the convergence times.

    Parameters
    ----------
    spec : :py:class:`SweepSpec`
        Sweep specification.

    Returns
    -------
    result : :py:class:`SweepResult`
        Unconverged trials are excluded from the statistics and counted in
        ``n_unconverged``. ``std`` is the unbiased standard deviation (NaN
        with a single converged trial).

    Raises
    ------
    EmptyAggregate
        If no trial converged for some mu.

    Warns
    -----
    UserWarning
        If some trials did not converge, or if there is a single mu (the
        fit is then None).

    Notes
    -----
    Trials are keyed by ``(mu, trial_index)`` and returned in that order,
    so the result does not depend on ``n_jobs``.

    Examples
    --------
    >>> import peconsensus as pc
    >>> spec = pc.SweepSpec(mu_values=[1., 0.5], n_trials=2, N=4,
    ...                     epsilon=0.1, shared_flag=True)
    >>> res = pc.run_sweep(spec)
    >>> res.table.columns.tolist()
    ['mu', 'mean_time', 'std', 'min', 'max', 'n_unconverged']
    """
    keys = [(spec, mu, k) for mu in spec.mu_values
            for k in range(spec.n_trials)]
    n_jobs = options['n_jobs'] if spec.n_jobs is None else int(spec.n_jobs)
    logger.info('Sweep: %i mu values x %i trials (%s, N=%i, d=%i), '
                'n_jobs=%i', len(spec.mu_values), spec.n_trials,
                spec.schedule_family, spec.N, spec.d, n_jobs)
    if n_jobs == 1:
        times = [run_trial(*k) for k in keys]
    else:
        times = Parallel(n_jobs=n_jobs)(delayed(run_trial)(*k) for k in keys)

    trials = pd.DataFrame({
        'mu': [k[1] for k in keys],
        'trial': [k[2] for k in keys],
        'time': [np.nan if t is None else t for t in times]})
    trials['converged'] = trials['time'].notna()

    grp = trials.groupby('mu', sort=False)['time']
    table = grp.agg(['mean', 'std', 'min', 'max', 'count']).reset_index()
    table = table.rename(columns={'mean': 'mean_time'})
    table['n_unconverged'] = spec.n_trials - table.pop('count')

    empty = table.loc[table['n_unconverged'] == spec.n_trials, 'mu']
    if not empty.empty:
        raise EmptyAggregate('No trial converged for mu=%s before max_time.'
                             % empty.tolist())
    n_fail = int(table['n_unconverged'].sum())
    if n_fail:
        warnings.warn('%i trial(s) did not converge before max_time and are '
                      'excluded from the statistics.' % n_fail)

    if len(table) < 2:
        warnings.warn('A single mu value was given: the log-log fit is '
                      'undefined.')
        fit = None
    else:
        fit = loglog_fit(table['mu'], table['mean_time'])
        logger.info('Log-log fit: slope=%.4f, intercept=%.4f, r2=%.4f',
                    *fit)
    return SweepResult(_postprocess_dataframe(table), fit, trials)


###############################################################################
# FIT
###############################################################################


def loglog_fit(mu, times):
    """Least-squares line through :math:`(\\ln \\mu, \\ln t)`.

    Parameters
    ----------
    mu : array_like
        PE levels, strictly positive.
    times : array_like
        Mean convergence times, strictly positive.

    Returns
    -------
    fit : :py:class:`LogLogFit`
        Slope, intercept and coefficient of determination :math:`R^2`.

    Raises
    ------
    DegenerateFit
        If all ``mu`` are equal.

    Examples
    --------
    >>> import numpy as np
    >>> from peconsensus import loglog_fit
    >>> mu = np.array([1., 0.5, 0.25])
    >>> fit = loglog_fit(mu, 2 / mu)
    >>> round(fit.slope, 6), round(fit.r_squared, 6)
    (-1.0, 1.0)
    """
    mu = np.asarray(mu, dtype=float).ravel()
    times = np.asarray(times, dtype=float).ravel()
    assert mu.size == times.size, 'mu and times must have the same length.'
    if mu.size < 2:
        raise ValueError('At least two points are required for a fit.')
    if np.any(mu <= 0) or np.any(times <= 0) or not np.isfinite(times).all():
        raise ValueError('mu and times must be finite and strictly positive.')
    if np.all(mu == mu[0]):
        raise DegenerateFit('All mu values are equal: the slope is '
                            'undefined.')
    X = np.column_stack((np.ones(mu.size), np.log(mu)))
    y = np.log(times)
    coef = np.linalg.lstsq(X, y, rcond=None)[0]
    ss_res = np.sum((y - X @ coef)**2)
    ss_tot = np.sum((y - y.mean())**2)
    r2 = 1. if ss_tot == 0 else min(1., 1 - ss_res / ss_tot)
    return LogLogFit(float(coef[1]), float(coef[0]), float(r2))


###############################################################################
# TRAJECTORIES AND AVERAGED WEIGHTS
###############################################################################


def mu_trajectories(spec, mu_values=None, trial_index=0, max_time=None,
                    stop_diameter=0.):
    """Trajectories from one initial configuration for several mu.

    Parameters
    ----------
    spec : :py:class:`SweepSpec`
        Sweep specification.
    mu_values : list of float or None
        Default is ``spec.mu_values``.
    trial_index : int
        Index of the shared initial configuration.
    max_time : float or None
        If given, every trajectory runs until ``max_time`` (or until the
        diameter drops below ``stop_diameter``). Otherwise each one runs
        until the diameter drops below ``spec.epsilon``.
    stop_diameter : float
        Diameter threshold used with ``max_time``. 0 disables it.

    Returns
    -------
    trajectories : dict
        Mapping ``mu -> Trajectory``, in the order of ``mu_values``.
    """
    mu_values = spec.mu_values if mu_values is None else mu_values
    out = {}
    for mu in mu_values:
        mu = float(mu)
        if max_time is None:
            out[mu] = _simulate_trial(spec, mu, trial_index,
                                      spec.max_time_for(mu), spec.epsilon,
                                      record_weights=True)
        else:
            out[mu] = _simulate_trial(spec, mu, trial_index, max_time,
                                      stop_diameter,
                                      record_weights=True)
    return out


def averaged_comparison(spec):
    """Compare PE weights with their average :math:`M \\equiv \\mu / T`.

    The sweep is run twice: with ``spec.schedule_family`` and with the
    ``'constant'`` family of weight :math:`\\mu / T`, from the same initial
    configurations.

    Returns
    -------
    comparison : :py:class:`pandas.DataFrame`
        Columns ``mu``, ``mean_time_pe``, ``mean_time_avg`` and ``ratio``
        (PE over averaged).
    """
    pe = run_sweep(spec)
    avg = run_sweep(replace(spec, schedule_family='constant', value=None,
                            shared_flag=True))
    comp = pd.DataFrame({'mu': pe.table['mu'],
                         'mean_time_pe': pe.table['mean_time'],
                         'mean_time_avg': avg.table['mean_time'].to_numpy()})
    comp['ratio'] = comp['mean_time_pe'] / comp['mean_time_avg']
    return _postprocess_dataframe(comp)
