"""First-order cooperative dynamics with time-varying weights.

The model is

.. math::

    \\dot{x}_i = \\frac{\\lambda_i}{N} \\sum_{j=1}^N M_{ij}(t)
    \\phi(|x_i - x_j|)(x_j - x_i)

where :math:`\\lambda_i = 1` (fixed weights) or
:math:`\\lambda_i = N / \\sum_j \\phi(|x_i - x_j|)` (rescaled weights).
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .config import options
from .exceptions import (HypothesisViolation, DegenerateInput,
                         NonFiniteState, InvariantBreach, DimensionMismatch)
from .kernels import InfluenceKernel
from .utils import CheckReport, _as_positions, _pairwise

__all__ = ["State", "Configuration", "KernelBounds", "SCALINGS",
           "validate_hypotheses", "compute_lambda", "rhs", "rhs_unweighted",
           "kernel_sandwich_check"]

logger = logging.getLogger(__name__)

SCALINGS = ('fixed', 'rescaled')


###############################################################################
# TYPES
###############################################################################


@dataclass(frozen=True)
class State:
    """Positions of N agents in :math:`\\mathbb{R}^d` at time ``t``.

    Parameters
    ----------
    positions : array_like
        Array of shape (N, d). A 1D array is read as N agents on the real
        line (d=1). The array is copied and made read-only.
    t : float
        Time stamp.

    Examples
    --------
    >>> from peconsensus import State
    >>> s = State([0., 1., 2.])
    >>> s.n_agents, s.dim
    (3, 1)
    """

    positions: np.ndarray
    t: float = 0.

    def __post_init__(self):
        x = np.array(_as_positions(self.positions), dtype=float)
        if x.ndim != 2:
            raise DimensionMismatch('State positions must have shape (N, d).')
        if x.shape[0] < 2:
            raise DegenerateInput('At least two agents are required (got '
                                  '%i).' % x.shape[0])
        if x.shape[1] < 1:
            raise DegenerateInput('Dimension must be at least 1.')
        if not np.isfinite(x).all():
            raise NonFiniteState('State contains non-finite coordinates.',
                                 time=self.t)
        x.flags.writeable = False
        object.__setattr__(self, 'positions', x)
        object.__setattr__(self, 't', float(self.t))

    @property
    def n_agents(self):
        return self.positions.shape[0]

    @property
    def dim(self):
        return self.positions.shape[1]

    def __neg__(self):
        return State(-self.positions, self.t)


@dataclass(frozen=True)
class Configuration:
    """Model configuration.

    Parameters
    ----------
    kernel : :py:class:`peconsensus.InfluenceKernel`
        Influence kernel :math:`\\phi`.
    scaling : str
        ``'fixed'`` (:math:`\\lambda_i = 1`) or ``'rescaled'``.
    n_agents, dim : int or None
        Expected number of agents and dimension. ``None`` accepts any.
    pe : :py:class:`peconsensus.PEParameters` or None
        PE parameters the weights are expected to satisfy.
    """

    kernel: InfluenceKernel
    scaling: str = 'fixed'
    n_agents: int = None
    dim: int = None
    pe: object = None

    def __post_init__(self):
        assert isinstance(self.kernel, InfluenceKernel), \
            'kernel must be an InfluenceKernel.'
        assert self.scaling in SCALINGS, \
            'scaling must be one of %s.' % ', '.join(SCALINGS)
        if self.n_agents is not None:
            assert int(self.n_agents) >= 2, 'n_agents must be at least 2.'
        if self.dim is not None:
            assert int(self.dim) >= 1, 'dim must be at least 1.'


@dataclass(frozen=True)
class KernelBounds:
    """Bounds of the kernel over the initial diameter.

    In fixed mode ``k_min = phi_min`` and ``k_max = phi_max``. In rescaled
    mode ``k_min = phi_min / phi_max`` and ``k_max = phi_max / phi_min``.
    """

    phi_min: float
    phi_max: float
    k_min: float
    k_max: float
    initial_diameter: float


###############################################################################
# HYPOTHESES
###############################################################################


def validate_hypotheses(config, initial):
    """Check the model hypotheses and compute the kernel bounds.

    Parameters
    ----------
    config : :py:class:`Configuration`
        Model configuration.
    initial : :py:class:`State` or array_like
        Initial configuration.

    Returns
    -------
    bounds : :py:class:`KernelBounds`

    Raises
    ------
    HypothesisViolation
        ``'H1'`` if the kernel has no finite Lipschitz bound, ``'H2'`` if
        :math:`\\phi_{\\min} \\leq 0` within the certified grid tolerance.
    DegenerateInput
        If there are fewer than two agents, or not ``config.n_agents``.

    Notes
    -----
    :math:`\\phi_{\\min}` and :math:`\\phi_{\\max}` are searched over
    :math:`[0, D(0)]`, where :math:`D(0)` is the initial diameter, on a
    uniform grid of step :math:`h \\leq D(0)/10^4` (plus the knots of a
    piecewise-linear kernel). The grid minimum is off by at most
    :math:`L h / 2` where :math:`L` is the Lipschitz bound. When that
    certificate does not separate the minimum from zero the grid is halved,
    up to six times.

    Examples
    --------
    >>> import peconsensus as pc
    >>> cfg = pc.Configuration(pc.rational_kernel(1, 1, 1), 'rescaled')
    >>> b = pc.validate_hypotheses(cfg, pc.State([0., 1.]))
    >>> b.phi_min, b.phi_max, b.k_min, b.k_max
    (0.5, 1.0, 0.5, 2.0)
    """
    if not isinstance(initial, State):
        initial = State(initial)
    n = initial.n_agents
    if config.n_agents is not None and n != config.n_agents:
        raise DegenerateInput('Expected %i agents, got %i.'
                              % (config.n_agents, n))
    if config.dim is not None and initial.dim != config.dim:
        raise DimensionMismatch('Expected dimension %i, got %i.'
                                % (config.dim, initial.dim))

    kernel = config.kernel
    lip = kernel.lipschitz_bound
    if lip is None or not np.isfinite(lip) or lip < 0:
        raise HypothesisViolation('H1', 'The kernel has no finite Lipschitz '
                                  'bound (got %r).' % lip)

    diam = float(pdist(initial.positions).max()) if n > 1 else 0.
    n_grid = int(options['grid.phi_points'])
    for refinement in range(7):
        n_int = n_grid * 2**refinement
        if diam > 0:
            grid = np.linspace(0, diam, n_int + 1)
            h = diam / n_int
        else:
            grid = np.zeros(1)
            h = 0.
        if kernel.kind == 'piecewise_linear':
            knots = np.asarray(kernel.params[0])
            grid = np.union1d(grid, knots[knots <= diam])
        values = kernel(grid)
        phi_min, phi_max = float(values.min()), float(values.max())
        certified = phi_min - lip * h / 2
        if certified > 0 or phi_min <= 0:
            break
    if certified <= 0:
        raise HypothesisViolation(
            'H2', 'phi_min=%r is not certified positive on [0, %r] (grid '
            'tolerance %r).' % (phi_min, diam, lip * h / 2))

    if config.scaling == 'fixed':
        k_min, k_max = phi_min, phi_max
    else:
        k_min, k_max = phi_min / phi_max, phi_max / phi_min
    logger.debug('Kernel bounds on [0, %g]: phi_min=%g, phi_max=%g, '
                 'K_min=%g, K_max=%g', diam, phi_min, phi_max, k_min, k_max)
    return KernelBounds(phi_min, phi_max, k_min, k_max, diam)


###############################################################################
# RIGHT-HAND SIDE
###############################################################################


def _lambda_array(phi, scaling):
    n = phi.shape[0]
    if scaling == 'fixed':
        return np.ones(n)
    # The sum runs over all j, including the self-term phi(0)
    return n / phi.sum(axis=1)


def _rhs_array(x, weights, kernel, scaling):
    """RHS on raw (N, d) arrays. No input checks (integrator hot path)."""
    n = x.shape[0]
    diff, dist = _pairwise(x)
    phi = kernel(dist)
    lam = _lambda_array(phi, scaling)
    coef = weights * phi
    return (lam / n)[:, np.newaxis] * np.einsum('ij,ijk->ik', coef, diff)


def _check_weights(weights, n):
    weights = np.asarray(weights, dtype=float)
    if weights.ndim == 0:
        weights = np.full((n, n), float(weights))
    assert weights.shape == (n, n), 'weights must be a (N, N) matrix.'
    assert np.all((weights >= 0) & (weights <= 1)), \
        'weights must lie in [0, 1].'
    return weights


def compute_lambda(state, config, i=None):
    """Scaling factor :math:`\\lambda_i` of agent ``i``.

    Parameters
    ----------
    state : :py:class:`State`
        Current configuration.
    config : :py:class:`Configuration`
        Model configuration.
    i : int or None
        Agent index. If None, return the factors of all agents.

    Returns
    -------
    lam : float or np.ndarray
        1 in fixed mode, :math:`N / \\sum_{j=1}^N \\phi(|x_i - x_j|)` in
        rescaled mode.

    Examples
    --------
    >>> import peconsensus as pc
    >>> cfg = pc.Configuration(pc.rational_kernel(1, 1, 1), 'rescaled')
    >>> round(pc.compute_lambda(pc.State([0., 1.]), cfg, i=0), 6)
    1.333333
    """
    if not isinstance(state, State):
        state = State(state)
    if i is not None:
        assert 0 <= int(i) < state.n_agents, 'Agent index out of bounds.'
    _, dist = _pairwise(state.positions)
    lam = _lambda_array(config.kernel(dist), config.scaling)
    return lam if i is None else float(lam[int(i)])


def rhs(state, weights, config):
    """Velocities of all agents.

    Parameters
    ----------
    state : :py:class:`State` or array_like
        Current configuration, of shape (N, d).
    weights : array_like
        Matrix :math:`M_{ij}` of shape (N, N) with entries in [0, 1], or a
        scalar applied to every pair. The diagonal has no effect.
    config : :py:class:`Configuration`
        Model configuration.

    Returns
    -------
    v : np.ndarray
        Array of shape (N, d). Row ``i`` is
        :math:`(\\lambda_i/N)\\sum_j M_{ij}\\phi_{ij}(x_j - x_i)`.

    Raises
    ------
    NonFiniteState
        If any coordinate is NaN or infinite.

    Examples
    --------
    >>> import peconsensus as pc
    >>> cfg = pc.Configuration(pc.constant_kernel(1))
    >>> pc.rhs(pc.State([0., 1., 2.]), 1, cfg).ravel()
    array([ 1.,  0., -1.])
    """
    x = _as_positions(state)
    if not np.isfinite(x).all():
        raise NonFiniteState('rhs evaluated on a non-finite state.',
                             time=getattr(state, 't', None))
    weights = _check_weights(weights, x.shape[0])
    return _rhs_array(x, weights, config.kernel, config.scaling)


def rhs_unweighted(state, config):
    """Velocities of the system without weights (:math:`M \\equiv 1`).

    Written in matrix form
    :math:`\\dot{x} = \\Lambda/N (\\Phi x - \\mathrm{diag}(\\Phi 1) x)`,
    independently of :py:func:`rhs`.

    Parameters
    ----------
    state : :py:class:`State` or array_like
        Current configuration.
    config : :py:class:`Configuration`
        Model configuration.

    Returns
    -------
    v : np.ndarray
        Array of shape (N, d).
    """
    x = _as_positions(state)
    if not np.isfinite(x).all():
        raise NonFiniteState('rhs evaluated on a non-finite state.')
    n = x.shape[0]
    dist = np.linalg.norm(x[:, np.newaxis, :] - x[np.newaxis, :, :], axis=-1)
    phi = config.kernel(dist)
    if config.scaling == 'fixed':
        lam = np.ones(n)
    else:
        lam = n / phi.sum(axis=1)
    return (lam / n)[:, np.newaxis] * (phi @ x - phi.sum(axis=1)[:, None] * x)


###############################################################################
# CHECKS
###############################################################################


def kernel_sandwich_check(state, weights, config, bounds, raise_error=True):
    """Check the kernel sandwich inequality for every agent.

    .. math::

        \\frac{K_{\\min}}{N}\\sum_j M_{ij} \\leq
        \\frac{\\lambda_i}{N}\\sum_j M_{ij}\\phi_{ij} \\leq K_{\\max}

    Parameters
    ----------
    state : :py:class:`State`
        Configuration whose pairwise distances do not exceed the initial
        diameter used to compute ``bounds``.
    weights : array_like
        Matrix :math:`M_{ij}` (N, N), diagonal included in both sums.
    config : :py:class:`Configuration`
        Model configuration.
    bounds : :py:class:`KernelBounds`
        Output of :py:func:`validate_hypotheses`.
    raise_error : bool
        If True (default), raise :py:class:`InvariantBreach` on failure.

    Returns
    -------
    report : :py:class:`peconsensus.CheckReport`
        ``margin`` is the tightest slack over both inequalities and all
        agents.
    """
    if not isinstance(state, State):
        state = State(state)
    x = state.positions
    n = x.shape[0]
    weights = _check_weights(weights, n)
    _, dist = _pairwise(x)
    phi = config.kernel(dist)
    lam = _lambda_array(phi, config.scaling)
    middle = lam / n * (weights * phi).sum(axis=1)
    left = bounds.k_min / n * weights.sum(axis=1)
    right = np.full(n, bounds.k_max)
    slack = np.minimum(middle - left, right - middle)
    i = int(np.argmin(slack))
    margin = float(slack[i])
    tol = options['tol.sandwich'] * (1 + bounds.k_max)
    passed = margin >= -tol
    report = CheckReport('kernel_sandwich', passed, state.t, margin,
                         details={'agent': i, 'left': float(left[i]),
                                  'middle': float(middle[i]),
                                  'right': float(right[i])})
    if not passed and raise_error:
        raise InvariantBreach('Kernel sandwich fails for agent %i: %r <= %r '
                              '<= %r does not hold.'
                              % (i, left[i], middle[i], right[i]), report)
    return report
