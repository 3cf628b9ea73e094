"""Piecewise-constant communication weights and persistent excitation.

A weight :math:`M:[0, +\\infty) \\to [0, 1]` satisfies the persistent
excitation (PE) condition with parameters :math:`(\\mu, T)` if

.. math:: \\int_t^{t+T} M(s)\\,ds \\geq \\mu \\qquad \\forall t \\geq 0.
"""
import json
import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .config import options
from .exceptions import (InvalidInterval, PEViolated,
                         InternalVerificationFailure, GenerationFailed)
from .utils import CheckReport

__all__ = ["WeightSchedule", "PEParameters", "ScheduleEnsemble",
           "SCHEDULE_FAMILIES", "integrate_weight", "verify_pe",
           "make_constant", "make_duty_cycle", "make_random_blackout",
           "make_random_levels", "make_ensemble", "declared_pe",
           "schedule_from_json"]

logger = logging.getLogger(__name__)

SCHEDULE_FAMILIES = ('duty_cycle_random_phase', 'random_blackout',
                     'random_levels', 'constant')


###############################################################################
# TYPES
###############################################################################


@dataclass(frozen=True)
class PEParameters:
    """Parameters :math:`(\\mu, T)` of the persistent excitation condition.

    Parameters
    ----------
    mu : float
        Minimal integrated weight over any window, with
        :math:`0 < \\mu \\leq T`.
    T : float
        Window length.
    """

    mu: float
    T: float

    def __post_init__(self):
        if not (self.T > 0 and 0 < self.mu <= self.T):
            raise ValueError('PE parameters must satisfy 0 < mu <= T (got '
                             'mu=%r, T=%r).' % (self.mu, self.T))
        object.__setattr__(self, 'mu', float(self.mu))
        object.__setattr__(self, 'T', float(self.T))


@dataclass(frozen=True)
class WeightSchedule:
    """Piecewise-constant weight function.

    The value ``values[k]`` holds on ``[breakpoints[k], breakpoints[k+1])``;
    the last value persists after the last breakpoint.

    Parameters
    ----------
    breakpoints : array_like
        Strictly increasing times, starting at 0.
    values : array_like
        One value in [0, 1] per interval.
    horizon : float
        Time up to which the schedule was generated. No breakpoint lies
        beyond it.

    Examples
    --------
    >>> from peconsensus import WeightSchedule
    >>> s = WeightSchedule([0, 0.3, 1], [1, 0, 1], horizon=2)
    >>> s.value_at([0, 0.3, 0.5, 1.5])
    array([1., 0., 0., 1.])
    """

    breakpoints: np.ndarray
    values: np.ndarray
    horizon: float

    def __post_init__(self):
        bp = np.array(self.breakpoints, dtype=float).ravel()
        v = np.array(self.values, dtype=float).ravel()
        assert bp.size >= 1 and bp.size == v.size, \
            'breakpoints and values must have the same (non-zero) length.'
        assert bp[0] == 0, 'The first breakpoint must be 0.'
        assert np.all(np.diff(bp) > 0), \
            'Breakpoints must be strictly increasing.'
        assert np.isfinite(bp).all(), 'Breakpoints must be finite.'
        if not np.all((v >= 0) & (v <= 1)):
            raise ValueError('Weight values must lie in [0, 1].')
        horizon = float(self.horizon)
        assert horizon >= bp[-1], 'horizon must be >= the last breakpoint.'
        bp.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, 'breakpoints', bp)
        object.__setattr__(self, 'values', v)
        object.__setattr__(self, 'horizon', horizon)

    def __eq__(self, other):
        if not isinstance(other, WeightSchedule):
            return NotImplemented
        return (self.horizon == other.horizon
                and np.array_equal(self.breakpoints, other.breakpoints)
                and np.array_equal(self.values, other.values))

    __hash__ = None

    @property
    def n_intervals(self):
        return self.breakpoints.size

    def value_at(self, t):
        """Evaluate the schedule at time(s) ``t >= 0``."""
        t = np.asarray(t, dtype=float)
        assert np.all(t >= 0), 'Schedules are defined for t >= 0.'
        idx = np.searchsorted(self.breakpoints, t, side='right') - 1
        return self.values[idx]

    def to_dict(self):
        return {'breakpoints': self.breakpoints.tolist(),
                'values': self.values.tolist(),
                'horizon': self.horizon}

    def to_json(self):
        """Serialize to ``{breakpoints, values, horizon}``.

        Floats are written with their shortest round-tripping repr, so
        :py:func:`schedule_from_json` restores the schedule bit-for-bit.
        """
        return json.dumps(self.to_dict())


def schedule_from_json(s):
    """Read a schedule written by :py:meth:`WeightSchedule.to_json`."""
    d = json.loads(s)
    return WeightSchedule(d['breakpoints'], d['values'], d['horizon'])


@dataclass(frozen=True)
class ScheduleEnsemble:
    """One weight schedule per directed pair of agents.

    Parameters
    ----------
    n_agents : int
        Number of agents N.
    schedules : dict
        Mapping ``(i, j) -> WeightSchedule`` for every ordered pair with
        ``i != j``. The schedule weighs the influence of agent ``j`` on
        agent ``i``.
    shared : bool
        True if all pairs share one schedule.
    """

    n_agents: int
    schedules: dict
    shared: bool = False

    def __post_init__(self):
        n = int(self.n_agents)
        assert n >= 2, 'n_agents must be at least 2.'
        missing = [(i, j) for i in range(n) for j in range(n)
                   if i != j and (i, j) not in self.schedules]
        if missing:
            raise ValueError('Schedule ensemble does not cover the pairs %s.'
                             % missing[:5])

    @classmethod
    def uniform(cls, n_agents, schedule):
        """Ensemble in which every pair uses ``schedule``."""
        pairs = [(i, j) for i in range(n_agents) for j in range(n_agents)
                 if i != j]
        return cls(n_agents, {p: schedule for p in pairs}, shared=True)

    def pairs(self):
        n = self.n_agents
        return [(i, j) for i in range(n) for j in range(n) if i != j]

    def weights_at(self, t):
        """Weight matrix :math:`M_{ij}(t)`, with a zero diagonal."""
        w = np.zeros((self.n_agents, self.n_agents))
        if self.shared:
            first = self.schedules[(0, 1)]
            w[:] = first.value_at(t)
            np.fill_diagonal(w, 0.)
            return w
        for (i, j) in self.pairs():
            w[i, j] = self.schedules[(i, j)].value_at(t)
        return w

    def is_symmetric(self):
        """True if :math:`M_{ij} = M_{ji}` for every pair."""
        if self.shared:
            return True
        return all(self.schedules[(i, j)] == self.schedules[(j, i)]
                   for (i, j) in self.pairs() if i < j)

    def breakpoints(self, until=np.inf):
        """Sorted union of all breakpoints in ``(0, until)``."""
        scheds = ([self.schedules[(0, 1)]] if self.shared
                  else list(self.schedules.values()))
        bp = np.concatenate([s.breakpoints[1:] for s in scheds])
        return np.unique(bp[bp < until])

    def change_events(self, until=np.inf):
        """Weight changes in ``(0, until)``, grouped by time.

        Returns
        -------
        times : np.ndarray
            Sorted unique change times.
        offsets : np.ndarray
            Events ``offsets[k]:offsets[k+1]`` happen at ``times[k]``.
        rows, cols, vals : np.ndarray
            Pair indices and new weight of each event.
        """
        rows, cols, times, vals = [], [], [], []
        for (i, j), s in self.schedules.items():
            keep = (s.breakpoints > 0) & (s.breakpoints < until)
            n_ev = int(keep.sum())
            times.append(s.breakpoints[keep])
            vals.append(s.values[keep])
            rows.append(np.full(n_ev, i))
            cols.append(np.full(n_ev, j))
        times = np.concatenate(times)
        order = np.argsort(times, kind='stable')
        times = times[order]
        uniq, offsets = np.unique(times, return_index=True)
        offsets = np.append(offsets, times.size)
        return (uniq, offsets, np.concatenate(rows)[order],
                np.concatenate(cols)[order], np.concatenate(vals)[order])


###############################################################################
# INTEGRATION & PE VERIFICATION
###############################################################################


def integrate_weight(schedule, a, b):
    """Exact integral of a schedule over ``[a, b]``.

    Parameters
    ----------
    schedule : :py:class:`WeightSchedule`
        Weight function.
    a, b : float
        Integration bounds, ``0 <= a <= b``.

    Returns
    -------
    integral : float
        Sum over intervals of value times overlap length.

    Raises
    ------
    InvalidInterval
        If ``b < a`` or ``a < 0``.

    Examples
    --------
    >>> from peconsensus import make_duty_cycle, integrate_weight, PEParameters
    >>> s = make_duty_cycle(PEParameters(0.3, 1), phase=0, horizon=10)
    >>> round(integrate_weight(s, 0, 1), 12)
    0.3
    """
    a, b = float(a), float(b)
    if a < 0 or b < a:
        raise InvalidInterval('Invalid integration interval [%r, %r].'
                              % (a, b))
    bp = schedule.breakpoints
    ends = np.append(bp[1:], np.inf)
    overlap = np.minimum(ends, b) - np.maximum(bp, a)
    return float(np.sum(schedule.values * np.maximum(overlap, 0.)))


def _window_integrals(schedule, starts, T):
    """Integrals over ``[s, s + T]`` for every ``s`` in ``starts``.

    Only the intervals that meet each window are visited.
    """
    bp, v = schedule.breakpoints, schedule.values
    ends = np.append(bp[1:], np.inf)
    starts = np.asarray(starts, dtype=float)
    stops = starts + T
    k0 = np.searchsorted(bp, starts, side='right') - 1
    k1 = np.searchsorted(bp, stops, side='right') - 1
    total = np.zeros(starts.shape)
    if starts.size == 0:
        return total
    for offset in range(int((k1 - k0).max()) + 1):
        k = k0 + offset
        inside = k <= k1
        k = np.minimum(k, bp.size - 1)
        overlap = np.minimum(ends[k], stops) - np.maximum(bp[k], starts)
        total += np.where(inside, v[k] * np.maximum(overlap, 0.), 0.)
    return total


def verify_pe(schedule, params, horizon=None, raise_error=True):
    """Check the persistent excitation condition on ``[0, horizon]``.

    Parameters
    ----------
    schedule : :py:class:`WeightSchedule`
        Weight function.
    params : :py:class:`PEParameters`
        Parameters :math:`(\\mu, T)`.
    horizon : float or None
        Windows :math:`[t, t+T]` with :math:`0 \\leq t \\leq` ``horizon - T``
        are checked. Default is ``schedule.horizon``. Must be >= T.
    raise_error : bool
        If True (default), raise :py:class:`PEViolated` on failure.

    Returns
    -------
    report : :py:class:`peconsensus.CheckReport`
        ``margin`` is :math:`\\min_t m(t) - \\mu` and ``witness_time`` the
        argmin :math:`t`.

    Notes
    -----
    The window integral :math:`m(t) = \\int_t^{t+T} M` of a
    piecewise-constant :math:`M` is piecewise linear in :math:`t`, with
    kinks only where :math:`t` or :math:`t + T` crosses a breakpoint. Its
    exact minimum is therefore attained at 0, at ``horizon - T``, or at a
    point :math:`b` or :math:`b - T` for some breakpoint :math:`b`; all of
    them are enumerated.

    Examples
    --------
    >>> import peconsensus as pc
    >>> params = pc.PEParameters(mu=0.3, T=1)
    >>> s = pc.make_duty_cycle(params, phase=0.9, horizon=20)
    >>> abs(pc.verify_pe(s, params).margin) < 1e-12
    True
    """
    if horizon is None:
        horizon = schedule.horizon
    mu, T = params.mu, params.T
    assert horizon >= T, 'horizon must be at least T.'
    t_end = float(horizon) - T
    bp = schedule.breakpoints
    cand = np.concatenate([[0., t_end], bp, bp - T])
    cand = np.unique(cand[(cand >= 0) & (cand <= t_end)])
    m = _window_integrals(schedule, cand, T)
    k = int(np.argmin(m))
    margin = float(m[k] - mu)
    passed = margin >= -options['tol.pe']
    report = CheckReport('pe', passed, float(cand[k]), margin,
                         details={'mu': mu, 'T': T, 'n_candidates':
                                  int(cand.size)})
    if not passed and raise_error:
        raise PEViolated('PE(mu=%r, T=%r) fails on [%r, %r]: integral %r.'
                         % (mu, T, cand[k], cand[k] + T, m[k]),
                         witness_time=float(cand[k]), margin=margin,
                         report=report)
    return report


###############################################################################
# GENERATORS
###############################################################################


def _compress(bp, values, horizon):
    """Drop breakpoints that do not change the value."""
    bp, values = np.asarray(bp, dtype=float), np.asarray(values, dtype=float)
    keep = np.ones(bp.size, dtype=bool)
    keep[1:] = values[1:] != values[:-1]
    return WeightSchedule(bp[keep], values[keep], horizon)


def _on_off_schedule(starts, ends, horizon):
    """Schedule equal to 1 on the sorted, disjoint ``[starts, ends)``."""
    starts = np.asarray(starts, dtype=float)
    ends = np.asarray(ends, dtype=float)
    bp = np.concatenate([[0.], starts, ends])
    bp = np.unique(bp[(bp >= 0) & (bp < horizon)])
    idx = np.searchsorted(starts, bp, side='right') - 1
    on = (idx >= 0) & (bp < ends[np.maximum(idx, 0)])
    return _compress(bp, on.astype(float), horizon)


def make_constant(value, horizon):
    """Constant schedule :math:`M \\equiv` ``value``.

    Parameters
    ----------
    value : float
        Weight in [0, 1].
    horizon : float
        Schedule horizon.

    Returns
    -------
    schedule : :py:class:`WeightSchedule`
        Satisfies PE with :math:`(\\text{value} \\cdot T, T)` for any T.
    """
    if not 0 <= value <= 1:
        raise ValueError('Constant weight must lie in [0, 1] (got %r).'
                         % value)
    return WeightSchedule([0.], [float(value)], horizon)


def make_duty_cycle(params, phase=0., horizon=1.):
    """Periodic on/off schedule with on-time ``mu`` per period ``T``.

    Parameters
    ----------
    params : :py:class:`PEParameters`
        On-time :math:`\\mu` and period :math:`T`.
    phase : float
        Start of the on-block within each period, in ``[0, T)``. A block
        that runs past the end of a period wraps into the next one.
    horizon : float
        Schedule horizon.

    Returns
    -------
    schedule : :py:class:`WeightSchedule`
        Equal to 1 on :math:`[kT + \\text{phase}, kT + \\text{phase} + \\mu)`
        and 0 elsewhere. Every window of length :math:`T` contains exactly
        :math:`\\mu` of on-time: PE holds with margin 0.

    Examples
    --------
    >>> import peconsensus as pc
    >>> s = pc.make_duty_cycle(pc.PEParameters(0.3, 1), phase=0.9, horizon=3)
    >>> s.breakpoints
    array([0. , 0.2, 0.9, 1.2, 1.9, 2.2, 2.9])
    """
    mu, T = params.mu, params.T
    assert 0 <= phase < T, 'phase must lie in [0, T).'
    if mu == T:
        return make_constant(1., horizon)
    k = np.arange(-1, int(np.ceil(horizon / T)) + 1)
    starts = k * T + phase
    return _on_off_schedule(starts, starts + mu, horizon)


def make_random_blackout(params, seed=None, horizon=1.):
    """One randomly placed on-block of length ``mu`` per period ``T``.

    Parameters
    ----------
    params : :py:class:`PEParameters`
        On-time :math:`\\mu` and period :math:`T`.
    seed : int, SeedSequence or None
        Seed of the random placement.
    horizon : float
        Schedule horizon. Raised to ``2 T`` if smaller.

    Returns
    -------
    schedule : :py:class:`WeightSchedule`
        Satisfies PE with :math:`(\\mu, 2T)`: any window of length
        :math:`2T` contains a full period. The guarantee is verified before
        returning.

    Raises
    ------
    InternalVerificationFailure
        If the post-verification fails (a bug).

    Notes
    -----
    The schedule generally does not satisfy PE with :math:`(\\mu, T)`: a
    block at the start of period :math:`k` followed by a block at the end
    of period :math:`k+1` leaves a window of length :math:`T` empty when
    :math:`\\mu < T/2`.
    """
    mu, T = params.mu, params.T
    horizon = max(float(horizon), 2 * T)
    if mu == T:
        return make_constant(1., horizon)
    rng = np.random.default_rng(seed)
    n_periods = int(np.ceil(horizon / T)) + 1
    starts = np.arange(n_periods) * T + rng.uniform(0, T - mu, n_periods)
    schedule = _on_off_schedule(starts, starts + mu, horizon)
    declared = PEParameters(mu, 2 * T)
    report = verify_pe(schedule, declared, horizon, raise_error=False)
    if not report.passed:  # pragma: no cover
        raise InternalVerificationFailure(
            'Random blackout schedule fails PE(%r, %r) at t=%r.'
            % (mu, 2 * T, report.witness_time))
    return schedule


def make_random_levels(params, seed=None, levels=(0., 0.5, 1.), horizon=1.):
    """Random fractional levels on sub-intervals of length ``T / 10``.

    Parameters
    ----------
    params : :py:class:`PEParameters`
        Target PE parameters.
    seed : int, SeedSequence or None
        Seed of the random levels.
    levels : array_like
        Grid of admissible levels in [0, 1].
    horizon : float
        Schedule horizon. Raised to ``T`` if smaller.

    Returns
    -------
    schedule : :py:class:`WeightSchedule`
        Verified to satisfy PE with :math:`(\\mu, T)`.

    Raises
    ------
    GenerationFailed
        If some period still violates PE after
        ``peconsensus.options['levels.max_retries']`` redraw rounds. Each
        round redraws every period that ends a failing window.

    Notes
    -----
    The window integral is piecewise linear with kinks on the sub-interval
    grid, so only windows aligned on that grid are tested. Each period that
    ends a failing window is redrawn, until every window passes.
    """
    mu, T = params.mu, params.T
    levels = np.asarray(levels, dtype=float).ravel()
    assert levels.size >= 1, 'levels must not be empty.'
    if not np.all((levels >= 0) & (levels <= 1)):
        raise ValueError('levels must lie in [0, 1].')
    if levels.mean() < mu / T:
        warnings.warn('Mean level %.3f is below mu/T=%.3f: generation is '
                      'likely to fail.' % (levels.mean(), mu / T))
    horizon = max(float(horizon), T)
    rng = np.random.default_rng(seed)
    sub = T / 10
    n_periods = int(np.ceil(horizon / T)) + 1
    lv = rng.choice(levels, size=(n_periods, 10))
    tol = options['tol.pe']
    max_retries = int(options['levels.max_retries'])
    for attempt in range(max_retries + 1):
        sums = np.convolve(lv.ravel(), np.ones(10), mode='valid') * sub
        bad = np.flatnonzero(sums < mu - tol)
        if bad.size == 0:
            break
        if attempt == max_retries:
            raise GenerationFailed(
                'No admissible levels after %i retries (mu=%r, T=%r, '
                'levels=%s).' % (max_retries, mu, T, levels.tolist()))
        periods = np.unique((bad + 9) // 10)
        lv[periods] = rng.choice(levels, size=(periods.size, 10))
    logger.debug('random_levels accepted after %i redraw rounds', attempt)
    bp = np.arange(n_periods * 10) * sub
    keep = bp < horizon
    schedule = _compress(bp[keep], lv.ravel()[keep], horizon)
    report = verify_pe(schedule, params, horizon, raise_error=False)
    if not report.passed:  # pragma: no cover
        raise InternalVerificationFailure(
            'Random levels schedule fails PE(%r, %r) at t=%r.'
            % (mu, T, report.witness_time))
    return schedule


def declared_pe(family, params, value=None):
    """PE parameters guaranteed by a schedule family.

    Parameters
    ----------
    family : str
        One of ``peconsensus.SCHEDULE_FAMILIES``.
    params : :py:class:`PEParameters`
        Parameters passed to the generator.
    value : float or None
        Weight of the ``'constant'`` family (default ``mu / T``).

    Returns
    -------
    declared : :py:class:`PEParameters` or None
        None for a constant family of weight 0 (no PE).
    """
    assert family in SCHEDULE_FAMILIES, 'Unknown schedule family.'
    if family == 'random_blackout':
        return PEParameters(params.mu, 2 * params.T)
    if family == 'constant':
        value = params.mu / params.T if value is None else value
        if value == 0:
            return None
        return PEParameters(value * params.T, params.T)
    return params


def _fresh_seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key,
                                      pool_size=seed.pool_size)
    return np.random.SeedSequence(seed)


def make_ensemble(n_agents, family, params, horizon, seed=None, shared=False,
                  symmetric=False, levels=(0., 0.5, 1.), value=None):
    """Build a schedule for every directed pair of agents.

    Parameters
    ----------
    n_agents : int
        Number of agents N.
    family : str
        ``'duty_cycle_random_phase'`` (default in experiments),
        ``'random_blackout'``, ``'random_levels'`` or ``'constant'``.
    params : :py:class:`PEParameters`
        PE parameters passed to the generator.
    horizon : float
        Schedule horizon (typically the simulation ``max_time``).
    seed : int, sequence of int, SeedSequence or None
        Master seed. Each pair draws from an independent child stream.
    shared : bool
        If True, one schedule is drawn and shared by all pairs.
    symmetric : bool
        If True, pair ``(j, i)`` reuses the schedule of ``(i, j)``.
    levels : array_like
        Level grid of the ``'random_levels'`` family.
    value : float or None
        Weight of the ``'constant'`` family. Default ``mu / T``.

    Returns
    -------
    ensemble : :py:class:`ScheduleEnsemble`

    Examples
    --------
    >>> import peconsensus as pc
    >>> ens = pc.make_ensemble(3, 'duty_cycle_random_phase',
    ...                        pc.PEParameters(0.3, 1), horizon=5, seed=0)
    >>> ens.weights_at(0.).shape
    (3, 3)
    """
    if family not in SCHEDULE_FAMILIES:
        raise ValueError('Schedule family not recognized: %r. Must be one '
                         'of %s.' % (family, ', '.join(SCHEDULE_FAMILIES)))
    ss = _fresh_seed_sequence(seed)
    mu, T = params.mu, params.T

    def draw(child):
        if family == 'duty_cycle_random_phase':
            phase = np.random.default_rng(child).uniform(0, T)
            return make_duty_cycle(params, phase, horizon)
        if family == 'random_blackout':
            return make_random_blackout(params, child, horizon)
        if family == 'random_levels':
            return make_random_levels(params, child, levels, horizon)
        return make_constant(mu / T if value is None else value, horizon)

    n = int(n_agents)
    if shared:
        return ScheduleEnsemble.uniform(n, draw(ss.spawn(1)[0]))
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    schedules = {}
    if symmetric:
        upper = [p for p in pairs if p[0] < p[1]]
        for p, child in zip(upper, ss.spawn(len(upper))):
            schedules[p] = schedules[(p[1], p[0])] = draw(child)
    else:
        for p, child in zip(pairs, ss.spawn(len(pairs))):
            schedules[p] = draw(child)
    logger.debug('Built %s ensemble: N=%i, mu=%g, T=%g, horizon=%g, '
                 'shared=%s', family, n, mu, T, horizon, shared)
    return ScheduleEnsemble(n, schedules, shared=False)
