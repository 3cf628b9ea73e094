"""Fixed-step Runge-Kutta integration aligned on weight breakpoints."""
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.spatial.distance import pdist

from .dynamics import State, _rhs_array
from .exceptions import NonFiniteState

__all__ = ["IntegratorSettings", "Trajectory", "STOP_REASONS", "step",
           "simulate", "read_trajectory_csv"]

logger = logging.getLogger(__name__)

STOP_REASONS = ('max_time', 'diameter_threshold')


###############################################################################
# TYPES
###############################################################################


@dataclass(frozen=True)
class IntegratorSettings:
    """Settings of :py:func:`simulate`.

    Parameters
    ----------
    dt : float
        Nominal step. Steps are shortened to land on every weight
        breakpoint.
    record_every : int
        Store every k-th step (the final state is always stored).
    max_time : float
        Final time.
    stop_diameter : float
        Stop as soon as the diameter drops below this value. 0 disables.
    record_weights : bool
        If True, store :math:`\\int_0^{t} M_{ij}` at every recorded sample.
    """

    dt: float = 1e-3
    record_every: int = 1
    max_time: float = 10.
    stop_diameter: float = 0.
    record_weights: bool = True

    def __post_init__(self):
        assert self.dt > 0, 'dt must be strictly positive.'
        assert int(self.record_every) >= 1, 'record_every must be >= 1.'
        assert self.max_time > 0, 'max_time must be strictly positive.'
        assert self.stop_diameter >= 0, 'stop_diameter must be >= 0.'

    def check_resolution(self, T):
        """Require ``dt <= T / 10`` for a PE window of length ``T``."""
        if self.dt > T / 10:
            raise ValueError('dt=%r is too coarse for the PE window T=%r '
                             '(dt must be <= T/10).' % (self.dt, T))


@dataclass(frozen=True)
class Trajectory:
    """Time-stamped positions of all agents.

    Parameters
    ----------
    times : array_like
        Strictly increasing sample times, of shape (K,).
    positions : array_like
        Positions of shape (K, N, d). ``positions[0]`` is the initial state.
    stop_reason : str or None
        ``'max_time'``, ``'diameter_threshold'``, or None when unknown
        (e.g. read from a CSV file).
    config : :py:class:`peconsensus.Configuration` or None
        Snapshot of the model configuration.
    weight_integrals : array_like or None
        :math:`\\int_0^{t_k} M_{ij}(s)\\,ds`, of shape (K, N, N).
    """

    times: np.ndarray
    positions: np.ndarray
    stop_reason: str = None
    config: object = None
    weight_integrals: np.ndarray = None

    def __post_init__(self):
        times = np.array(self.times, dtype=float).ravel()
        positions = np.array(self.positions, dtype=float)
        if positions.ndim == 2:
            positions = positions[..., np.newaxis]
        assert positions.ndim == 3, 'positions must be of shape (K, N, d).'
        assert positions.shape[0] == times.size, \
            'One position array per sample time is required.'
        assert times.size >= 1, 'A trajectory needs at least one sample.'
        assert np.all(np.diff(times) > 0), \
            'Sample times must be strictly increasing.'
        assert self.stop_reason in STOP_REASONS + (None,)
        times.flags.writeable = False
        positions.flags.writeable = False
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'positions', positions)
        if self.weight_integrals is not None:
            wi = np.array(self.weight_integrals, dtype=float)
            wi.flags.writeable = False
            object.__setattr__(self, 'weight_integrals', wi)

    def __len__(self):
        return self.times.size

    @property
    def n_agents(self):
        return self.positions.shape[1]

    @property
    def dim(self):
        return self.positions.shape[2]

    def state(self, k):
        """Sample ``k`` as a :py:class:`peconsensus.State`."""
        return State(self.positions[k], self.times[k])

    @property
    def initial(self):
        return self.state(0)

    @property
    def final(self):
        return self.state(-1)

    def to_dataframe(self):
        """Long-format table with columns ``t, agent, coord, value``.

        Examples
        --------
        >>> import numpy as np
        >>> from peconsensus import Trajectory
        >>> traj = Trajectory([0., 1.], np.array([[0., 1.], [0.25, 0.75]]))
        >>> traj.to_dataframe()
              t  agent  coord  value
        0  0.0      0      0   0.00
        1  0.0      1      0   1.00
        2  1.0      0      0   0.25
        3  1.0      1      0   0.75
        """
        k, n, d = self.positions.shape
        return pd.DataFrame({
            't': np.repeat(self.times, n * d),
            'agent': np.tile(np.repeat(np.arange(n), d), k),
            'coord': np.tile(np.arange(d), k * n),
            'value': self.positions.ravel()})

    def to_csv(self, path):
        """Write the long-format table (with header) to ``path``."""
        self.to_dataframe().to_csv(path, index=False)


def read_trajectory_csv(path, config=None):
    """Read a trajectory written by :py:meth:`Trajectory.to_csv`.

    Parameters
    ----------
    path : str or path-like
        CSV file with columns ``t, agent, coord, value``.
    config : :py:class:`peconsensus.Configuration` or None
        Configuration to attach to the trajectory.

    Returns
    -------
    traj : :py:class:`Trajectory`

    Raises
    ------
    ValueError
        If the file is empty, misses a column or is not a full
        (sample, agent, coordinate) grid.
    """
    try:
        df = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise ValueError('Trajectory file %s is empty.' % path)
    missing = {'t', 'agent', 'coord', 'value'}.difference(df.columns)
    if missing:
        raise ValueError('Trajectory file %s misses columns %s.'
                         % (path, sorted(missing)))
    if df.empty:
        raise ValueError('Trajectory file %s has no rows.' % path)
    df = df.sort_values(['t', 'agent', 'coord'], kind='stable')
    times = np.unique(df['t'].to_numpy(dtype=float))
    n = df['agent'].nunique()
    d = df['coord'].nunique()
    if len(df) != times.size * n * d:
        raise ValueError('Trajectory file %s is not a complete (t, agent, '
                         'coord) grid.' % path)
    positions = df['value'].to_numpy(dtype=float).reshape(times.size, n, d)
    return Trajectory(times, positions, None, config)


###############################################################################
# INTEGRATION
###############################################################################


def _rk4(x, h, weights, kernel, scaling):
    k1 = _rhs_array(x, weights, kernel, scaling)
    k2 = _rhs_array(x + 0.5 * h * k1, weights, kernel, scaling)
    k3 = _rhs_array(x + 0.5 * h * k2, weights, kernel, scaling)
    k4 = _rhs_array(x + h * k3, weights, kernel, scaling)
    return x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def step(state, t, h, ensemble, config):
    """One classical Runge-Kutta (RK4) step.

    Parameters
    ----------
    state : :py:class:`peconsensus.State`
        State at time ``t``.
    t : float
        Current time.
    h : float
        Step length. ``[t, t + h]`` must not contain a weight breakpoint in
        its interior.
    ensemble : :py:class:`peconsensus.ScheduleEnsemble`
        Weights, sampled once at ``t + h / 2``.
    config : :py:class:`peconsensus.Configuration`
        Model configuration.

    Returns
    -------
    state : :py:class:`peconsensus.State`
        State at time ``t + h``.

    Raises
    ------
    NonFiniteState
        If the update produces NaN or infinite coordinates.
    """
    assert h > 0, 'h must be strictly positive.'
    weights = ensemble.weights_at(t + h / 2)
    x = _rk4(state.positions, h, weights, config.kernel, config.scaling)
    if not np.isfinite(x).all():
        raise NonFiniteState('Non-finite state after RK4 step.', time=t + h)
    return State(x, t + h)


def simulate(initial, ensemble, config, settings):
    """Integrate the weighted dynamics from an initial state.

    Parameters
    ----------
    initial : :py:class:`peconsensus.State`
        Initial configuration (at t=0).
    ensemble : :py:class:`peconsensus.ScheduleEnsemble`
        Communication weights.
    config : :py:class:`peconsensus.Configuration`
        Model configuration. If ``config.pe`` is set, ``settings.dt`` must
        be at most ``T / 10``.
    settings : :py:class:`IntegratorSettings`
        Step, recording and stopping settings.

    Returns
    -------
    traj : :py:class:`Trajectory`

    Raises
    ------
    NonFiniteState
        With the time of the first non-finite state.

    Notes
    -----
    The step sequence is the nominal grid :math:`k\\,\\Delta t` refined by
    every breakpoint of every schedule before ``max_time``, so the weights
    are constant on each step and the RK4 scheme keeps its order. The
    sequence only depends on the ensemble and the settings, hence the
    trajectory of :math:`-x(0)` is exactly :math:`-x(t)`.

    Examples
    --------
    >>> import numpy as np
    >>> import peconsensus as pc
    >>> cfg = pc.Configuration(pc.constant_kernel(1))
    >>> ens = pc.ScheduleEnsemble.uniform(2, pc.make_constant(1, 10))
    >>> traj = pc.simulate(pc.State([0., 1.]), ens, cfg,
    ...                    pc.IntegratorSettings(dt=0.01, max_time=1))
    >>> d = traj.positions[-1, 1, 0] - traj.positions[-1, 0, 0]
    >>> bool(abs(d - np.exp(-1)) < 1e-9)
    True
    """
    if not isinstance(initial, State):
        initial = State(initial)
    x = np.array(initial.positions)
    n = x.shape[0]
    assert ensemble.n_agents == n, 'Ensemble and state sizes differ.'
    if config.pe is not None:
        settings.check_resolution(config.pe.T)
    kernel, scaling = config.kernel, config.scaling
    dt, max_time = float(settings.dt), float(settings.max_time)
    stop_d = float(settings.stop_diameter)
    record_every = int(settings.record_every)
    eps_t = dt * 1e-9

    ev_times, offsets, rows, cols, vals = ensemble.change_events(max_time)
    weights = ensemble.weights_at(0.)
    w_int = np.zeros((n, n))
    times, samples, integrals = [0.], [x.copy()], [w_int.copy()]
    logger.debug('simulate: N=%i, d=%i, dt=%g, max_time=%g, %i weight '
                 'change times', n, x.shape[1], dt, max_time, ev_times.size)

    def diam(y):
        return pdist(y).max() if n > 1 else 0.

    stop_reason = 'max_time'
    t, k_nom, p, n_steps = 0., 0, 0, 0
    if stop_d > 0 and diam(x) < stop_d:
        stop_reason = 'diameter_threshold'
    while stop_reason == 'max_time' and t < max_time - eps_t:
        while p < ev_times.size and ev_times[p] <= t + eps_t:
            s, e = offsets[p], offsets[p + 1]
            weights[rows[s:e], cols[s:e]] = vals[s:e]
            p += 1
        while (k_nom + 1) * dt <= t + eps_t:
            k_nom += 1
        t_next = min((k_nom + 1) * dt, max_time)
        if p < ev_times.size and ev_times[p] < t_next:
            t_next = float(ev_times[p])
        h = t_next - t
        x = _rk4(x, h, weights, kernel, scaling)
        w_int += weights * h
        t = t_next
        n_steps += 1
        if not np.isfinite(x).all():
            raise NonFiniteState('Non-finite state during integration.',
                                 time=t)
        reached = stop_d > 0 and diam(x) < stop_d
        if reached:
            stop_reason = 'diameter_threshold'
        if (n_steps % record_every == 0 or reached
                or t >= max_time - eps_t):
            times.append(t)
            samples.append(x.copy())
            if settings.record_weights:
                integrals.append(w_int.copy())

    logger.debug('simulate: %i steps, stopped at t=%g (%s)', n_steps, t,
                 stop_reason)
    return Trajectory(np.array(times), np.stack(samples), stop_reason, config,
                      np.stack(integrals) if settings.record_weights
                      else None)
