"""Observables of the dynamics and runtime checks of their properties."""
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
import pandas_flavor as pf

from .config import options
from .exceptions import (DimensionMismatch, PreconditionFailed,
                         InvariantBreach, ZeroDirection)
from .integrator import Trajectory
from .utils import CheckReport, _as_positions

__all__ = ["BarrierSpec", "diameter", "gamma_max", "gamma_min_1d", "psi",
           "check_barrier", "extremal_pair_check", "project",
           "consensus_time", "effective_time", "check_monotone",
           "check_convex_hull", "check_mean_conservation",
           "verify_trajectory", "observables_table"]

logger = logging.getLogger(__name__)


###############################################################################
# SCALAR OBSERVABLES
###############################################################################


def _distances(x):
    """Pairwise distances of (N, d) or (K, N, d) positions."""
    diff = x[..., np.newaxis, :, :] - x[..., :, np.newaxis, :]
    return np.sqrt(np.einsum('...ijk,...ijk->...ij', diff, diff))


def diameter(x):
    """Largest distance between two agents.

    Parameters
    ----------
    x : :py:class:`peconsensus.State` or array_like
        Positions of shape (N, d), or a stack of shape (K, N, d).

    Returns
    -------
    D : float or np.ndarray
        Diameter (one value per sample for a stack).

    Examples
    --------
    >>> from peconsensus import diameter
    >>> diameter([0., 1.])
    1.0
    """
    dist = _distances(_as_positions(x))
    out = dist.max(axis=(-2, -1))
    return float(out) if np.ndim(out) == 0 else out


def gamma_max(x):
    """Largest Euclidean norm of an agent, :math:`\\max_i |x_i|`.

    Examples
    --------
    >>> from peconsensus import gamma_max
    >>> gamma_max([-2., 3.])
    3.0
    """
    norms = np.linalg.norm(_as_positions(x), axis=-1)
    out = norms.max(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def gamma_min_1d(x):
    """Smallest position on the real line, :math:`\\min_i x_i`.

    Raises
    ------
    DimensionMismatch
        If the dimension is larger than 1.

    Examples
    --------
    >>> from peconsensus import gamma_min_1d
    >>> gamma_min_1d([-2., 3.])
    -2.0
    """
    x = _as_positions(x)
    if x.shape[-1] != 1:
        raise DimensionMismatch('gamma_min is only defined for d=1 (got '
                                'd=%i).' % x.shape[-1])
    out = x[..., 0].min(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def effective_time(traj, i=0, j=1):
    """Integrated weight :math:`\\int_0^{t_k} M_{ij}` at every sample."""
    assert traj.weight_integrals is not None, \
        'The trajectory was simulated without record_weights.'
    return traj.weight_integrals[:, i, j]


###############################################################################
# BARRIER
###############################################################################


@dataclass(frozen=True)
class BarrierSpec:
    """Parameters of the exponential barrier :math:`\\psi`.

    Parameters
    ----------
    alpha : float
        Lower bound of all agents at time ``theta``.
    z : float
        Start level, ``z >= alpha``.
    theta : float
        Start time.
    window : float
        Length T of the checked window.
    k_max : float
        Upper kernel bound :math:`K_{\\max}`.
    """

    alpha: float
    z: float
    theta: float
    window: float
    k_max: float

    def __post_init__(self):
        assert self.z >= self.alpha, 'z must be >= alpha.'
        assert self.window > 0, 'window must be strictly positive.'
        assert self.k_max > 0, 'k_max must be strictly positive.'


def psi(spec, tau):
    """Barrier :math:`\\psi(\\alpha, z, \\tau) = \\alpha +
    e^{-K_{\\max}\\tau}(z - \\alpha)`.

    Parameters
    ----------
    spec : :py:class:`BarrierSpec`
        Barrier parameters.
    tau : float or array_like
        Elapsed time(s) since ``spec.theta``, nonnegative.

    Returns
    -------
    value : float or np.ndarray

    Examples
    --------
    >>> from peconsensus import BarrierSpec, psi
    >>> spec = BarrierSpec(alpha=0, z=1, theta=0, window=1, k_max=1)
    >>> round(psi(spec, 1), 6)
    0.367879
    """
    tau = np.asarray(tau, dtype=float)
    assert np.all(tau >= 0), 'tau must be nonnegative.'
    out = spec.alpha + np.exp(-spec.k_max * tau) * (spec.z - spec.alpha)
    return float(out) if out.ndim == 0 else out


def check_barrier(traj, spec, agent, raise_error=True):
    """Check that an agent stays above the barrier once it reaches it.

    If all agents are above ``alpha`` at time ``theta`` and agent ``i``
    satisfies :math:`x_i(\\theta + \\tau^*) \\geq \\psi(\\tau^*)` for some
    :math:`\\tau^* \\in [0, T]`, then
    :math:`x_i(\\theta + \\tau) \\geq \\psi(\\tau)` for all
    :math:`\\tau \\in [\\tau^*, T]`.

    Parameters
    ----------
    traj : :py:class:`peconsensus.Trajectory`
        One-dimensional trajectory covering ``[theta, theta + window]``.
    spec : :py:class:`BarrierSpec`
        Barrier parameters.
    agent : int
        Index of the checked agent.
    raise_error : bool
        If True (default), raise :py:class:`InvariantBreach` on failure.

    Returns
    -------
    report : :py:class:`peconsensus.CheckReport`
        ``margin`` is the minimum slack :math:`x_i - \\psi` after
        :math:`\\tau^*`, ``details['tau_star']`` is :math:`\\tau^*` (None
        if the barrier is never reached, in which case the check holds
        vacuously).

    Raises
    ------
    DimensionMismatch
        If the trajectory is not one-dimensional.
    PreconditionFailed
        If some agent is below ``alpha`` at ``theta`` or the trajectory does
        not reach ``theta``.
    """
    if traj.dim != 1:
        raise DimensionMismatch('check_barrier requires d=1.')
    assert 0 <= agent < traj.n_agents, 'Agent index out of bounds.'
    times = traj.times
    eps_t = 1e-12 * (1 + abs(spec.theta))
    k0 = int(np.searchsorted(times, spec.theta - eps_t))
    if k0 >= times.size:
        raise PreconditionFailed('Trajectory ends before theta=%r.'
                                 % spec.theta)
    x = traj.positions[:, :, 0]
    tol = options['tol.barrier'] * (1 + abs(spec.z - spec.alpha))
    if x[k0].min() < spec.alpha - tol:
        raise PreconditionFailed('Agent %i is below alpha=%r at theta=%r.'
                                 % (int(np.argmin(x[k0])), spec.alpha,
                                    times[k0]))
    tau = times[k0:] - times[k0]
    inside = tau <= spec.window + eps_t
    tau = tau[inside]
    xi = x[k0:, agent][inside]
    slack = xi - psi(spec, np.maximum(tau, 0.))
    reached = np.flatnonzero(slack >= 0)
    if reached.size == 0:
        return CheckReport('barrier', True, None, float('nan'),
                           details={'agent': agent, 'tau_star': None})
    first = int(reached[0])
    after = slack[first:]
    k = int(np.argmin(after))
    margin = float(after[k])
    witness = float(times[k0] + tau[first + k])
    passed = margin >= -tol
    report = CheckReport('barrier', passed, witness, margin,
                         details={'agent': agent,
                                  'tau_star': float(tau[first])})
    if not passed and raise_error:
        raise InvariantBreach('Agent %i falls below the barrier at t=%r '
                              '(slack %r).' % (agent, witness, margin),
                              report)
    return report


###############################################################################
# EXTREMAL PAIR
###############################################################################


def extremal_pair_check(state, raise_error=True):
    """Check the scalar products of a diameter-attaining pair.

    For :math:`(i, j)` with :math:`|x_i - x_j| = D`,
    :math:`\\max_k \\langle x_k, x_i - x_j\\rangle =
    \\langle x_i, x_i - x_j\\rangle` and
    :math:`\\min_k \\langle x_k, x_i - x_j\\rangle =
    \\langle x_j, x_i - x_j\\rangle`.

    Parameters
    ----------
    state : :py:class:`peconsensus.State` or array_like
        Configuration with at least two agents.
    raise_error : bool
        If True (default), raise :py:class:`InvariantBreach` on failure.

    Returns
    -------
    report : :py:class:`peconsensus.CheckReport`
        Every pair tied for the diameter is checked. ``details['pair']`` is
        the lexicographically first one and ``margin`` the tightest slack
        over all of them.

    Examples
    --------
    >>> from peconsensus import extremal_pair_check
    >>> extremal_pair_check([0., 0.5, 1.]).passed
    True
    """
    x = _as_positions(state)
    assert x.ndim == 2 and x.shape[0] >= 2, 'At least two agents required.'
    dist = _distances(x)
    dmax = dist.max()
    ii, jj = np.nonzero(np.triu(dist >= dmax * (1 - 1e-12), k=1))
    t = getattr(state, 't', None)
    worst, worst_k, worst_pair = np.inf, None, None
    for i, j in zip(ii, jj):
        u = x[i] - x[j]
        prods = x @ u
        tol = options['tol.extremal'] * (1 + np.abs(prods).max())
        slack_max = prods[i] - prods.max()
        slack_min = prods.min() - prods[j]
        slack = min(slack_max, slack_min)
        if slack < worst:
            worst = slack
            worst_pair = (int(i), int(j))
            worst_k = int(np.argmax(prods) if slack_max <= slack_min
                          else np.argmin(prods))
        if slack < -tol:
            report = CheckReport('extremal_pair', False, t, float(slack),
                                 details={'pair': (int(i), int(j)),
                                          'k': worst_k})
            if raise_error:
                raise InvariantBreach('Extremal pair (%i, %i) violated by '
                                      'agent %i.' % (i, j, worst_k), report)
            return report
    return CheckReport('extremal_pair', True, t, float(worst),
                       details={'pair': (int(ii[0]), int(jj[0])),
                                'k': worst_k, 'n_tied': int(ii.size)})


###############################################################################
# TRAJECTORY-LEVEL OBSERVABLES
###############################################################################


def project(traj, x0, v):
    """Project a trajectory on a direction: :math:`y_i = (x_i - x_0)\\cdot v`.

    Parameters
    ----------
    traj : :py:class:`peconsensus.Trajectory`
        Trajectory in :math:`\\mathbb{R}^d`.
    x0 : array_like
        Origin, of shape (d,).
    v : array_like
        Direction, of shape (d,). Not necessarily normalized.

    Returns
    -------
    projected : :py:class:`peconsensus.Trajectory`
        One-dimensional trajectory with the same time stamps.

    Raises
    ------
    ZeroDirection
        If ``v`` is the zero vector.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    assert x0.size == traj.dim and v.size == traj.dim, \
        'x0 and v must have the dimension of the trajectory.'
    if not np.any(v):
        raise ZeroDirection('Projection direction must be non-zero.')
    y = (traj.positions - x0) @ v
    return Trajectory(traj.times, y[..., np.newaxis], traj.stop_reason,
                      traj.config, traj.weight_integrals)


def consensus_time(traj, epsilon=1e-2):
    """First time the diameter drops below ``epsilon``.

    Parameters
    ----------
    traj : :py:class:`peconsensus.Trajectory`
        Trajectory.
    epsilon : float
        Strictly positive threshold.

    Returns
    -------
    t : float or None
        Time of the crossing, linearly interpolated in :math:`D(t)` between
        the two bracketing samples. 0 if the initial diameter is already
        below ``epsilon``; None if the threshold is never reached.
    """
    assert epsilon > 0, 'epsilon must be strictly positive.'
    d = diameter(traj.positions)
    below = np.flatnonzero(d < epsilon)
    if below.size == 0:
        return None
    k = int(below[0])
    if k == 0:
        return float(traj.times[0])
    t0, t1 = traj.times[k - 1], traj.times[k]
    d0, d1 = d[k - 1], d[k]
    return float(t0 + (d0 - epsilon) / (d0 - d1) * (t1 - t0))


_MONOTONE = {'diameter': (diameter, -1),
             'gamma_max': (gamma_max, -1),
             'gamma_min': (gamma_min_1d, 1)}


def check_monotone(traj, quantity='diameter', raise_error=True):
    """Check that an observable is monotone along a trajectory.

    ``'diameter'`` and ``'gamma_max'`` must be non-increasing,
    ``'gamma_min'`` (d=1 only) non-decreasing, each up to a per-sample
    slack of ``options['tol.monotone'] * (1 + D(0))``.

    Returns
    -------
    report : :py:class:`peconsensus.CheckReport`
        Check named ``'<quantity>_monotone'``.
    """
    assert quantity in _MONOTONE, \
        'quantity must be one of %s.' % ', '.join(_MONOTONE)
    func, sign = _MONOTONE[quantity]
    values = func(traj.positions)
    tol = options['tol.monotone'] * (1 + diameter(traj.positions[0]))
    name = '%s_monotone' % quantity
    if len(traj) < 2:
        return CheckReport(name, True, float(traj.times[0]), 0.)
    # Slack > 0 while the observable moves in the expected direction
    slack = sign * np.diff(values)
    k = int(np.argmin(slack))
    margin = float(slack[k])
    report = CheckReport(name, margin >= -tol, float(traj.times[k + 1]),
                         margin)
    if not report.passed and raise_error:
        raise InvariantBreach('%s is not monotone at t=%r (step %r).'
                              % (quantity, traj.times[k + 1], -margin),
                              report)
    return report


def check_convex_hull(traj, raise_error=True):
    """Check that every coordinate stays within its initial range.

    For d=1 this is the convex hull of the initial positions. For d>1 the
    per-coordinate box is checked, together with ``gamma_max`` staying
    below its initial value.
    """
    x = traj.positions
    tol = options['tol.monotone'] * (1 + diameter(x[0]))
    lo, hi = x[0].min(axis=0), x[0].max(axis=0)
    slack = np.minimum(x.min(axis=1) - lo, hi - x.max(axis=1)).min(axis=1)
    if traj.dim > 1:
        slack = np.minimum(slack, gamma_max(x[0]) - gamma_max(x))
    k = int(np.argmin(slack))
    margin = float(slack[k])
    report = CheckReport('convex_hull', margin >= -tol,
                         float(traj.times[k]), margin)
    if not report.passed and raise_error:
        raise InvariantBreach('Agents leave their initial hull at t=%r.'
                              % traj.times[k], report)
    return report


def check_mean_conservation(traj, raise_error=True):
    """Check that the mean position is conserved.

    Only expected in fixed mode with symmetric weights.
    """
    means = traj.positions.mean(axis=1)
    drift = np.linalg.norm(means - means[0], axis=-1)
    tol = options['tol.mean'] * (1 + np.linalg.norm(means[0]))
    k = int(np.argmax(drift))
    report = CheckReport('mean_conservation', drift[k] <= tol,
                         float(traj.times[k]), float(tol - drift[k]))
    if not report.passed and raise_error:
        raise InvariantBreach('Mean position drifts by %r at t=%r.'
                              % (drift[k], traj.times[k]), report)
    return report


def verify_trajectory(traj, k_max, window=1.):
    """Replay the trajectory checks.

    Runs the monotonicity of the diameter and ``gamma_max`` (and
    ``gamma_min`` for d=1), the convex hull confinement, the extremal pair
    check on every sample and, for d=1, the barrier check of every agent
    from :math:`\\theta = 0` with :math:`\\alpha = \\gamma_{\\min}(0)` and
    :math:`z = x_i(0)`.

    Parameters
    ----------
    traj : :py:class:`peconsensus.Trajectory`
        Trajectory to check.
    k_max : float
        Upper kernel bound of the model, see
        :py:func:`peconsensus.validate_hypotheses`.
    window : float
        Barrier window T.

    Returns
    -------
    reports : list of :py:class:`peconsensus.CheckReport`
        One report per check, in the order listed above. Failures are
        reported, not raised.
    """
    reports = [check_monotone(traj, 'diameter', raise_error=False),
               check_monotone(traj, 'gamma_max', raise_error=False)]
    if traj.dim == 1:
        reports.append(check_monotone(traj, 'gamma_min', raise_error=False))
    reports.append(check_convex_hull(traj, raise_error=False))

    worst = None
    for k in range(len(traj)):
        rep = extremal_pair_check(traj.positions[k], raise_error=False)
        if worst is None or rep.margin < worst.margin or not rep.passed:
            worst = CheckReport('extremal_pair', rep.passed,
                                float(traj.times[k]), rep.margin,
                                rep.details)
        if not rep.passed:
            break
    reports.append(worst)

    if traj.dim == 1:
        alpha = gamma_min_1d(traj.positions[0])
        worst = None
        for i in range(traj.n_agents):
            spec = BarrierSpec(alpha, float(traj.positions[0, i, 0]),
                               float(traj.times[0]), window, k_max)
            rep = check_barrier(traj, spec, i, raise_error=False)
            if worst is None or (not np.isnan(rep.margin) and (
                    np.isnan(worst.margin) or rep.margin < worst.margin)):
                worst = rep
            if not rep.passed:
                break
        reports.append(worst)
    logger.info('verify_trajectory: %i/%i checks passed',
                sum(r.passed for r in reports), len(reports))
    return reports


###############################################################################
# PANDAS
###############################################################################


@pf.register_dataframe_method
def observables_table(data):
    """Time series of the observables of a long-format trajectory table.

    Parameters
    ----------
    data : :py:class:`pandas.DataFrame`
        Long-format table with columns ``t, agent, coord, value`` (see
        :py:meth:`peconsensus.Trajectory.to_dataframe`).

    Returns
    -------
    table : :py:class:`pandas.DataFrame`
        Columns ``t``, ``diameter``, ``gamma_max`` and, for d=1,
        ``gamma_min``.

    Examples
    --------
    >>> import numpy as np
    >>> import peconsensus as pc
    >>> traj = pc.Trajectory([0., 1.], np.array([[0., 1.], [0.25, 0.75]]))
    >>> tab = traj.to_dataframe().observables_table()
    >>> list(tab.columns)
    ['t', 'diameter', 'gamma_max', 'gamma_min']
    >>> tab['diameter'].tolist()
    [1.0, 0.5]
    """
    data = data.sort_values(['t', 'agent', 'coord'], kind='stable')
    times = np.unique(data['t'].to_numpy(dtype=float))
    n, d = data['agent'].nunique(), data['coord'].nunique()
    x = data['value'].to_numpy(dtype=float).reshape(times.size, n, d)
    table = pd.DataFrame({'t': times, 'diameter': diameter(x),
                          'gamma_max': gamma_max(x)})
    if d == 1:
        table['gamma_min'] = gamma_min_1d(x)
    return table
