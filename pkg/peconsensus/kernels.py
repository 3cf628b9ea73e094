"""Influence kernels phi(r) weighting the interaction of two agents."""
from dataclasses import dataclass

import numpy as np

__all__ = ["InfluenceKernel", "constant_kernel", "piecewise_linear_kernel",
           "rational_kernel", "kernel_from_dict", "KERNEL_KINDS"]

KERNEL_KINDS = ('constant', 'piecewise_linear', 'rational_decay')


@dataclass(frozen=True)
class InfluenceKernel:
    """Nonnegative Lipschitz function of the inter-agent distance.

    Use the factories :py:func:`constant_kernel`,
    :py:func:`piecewise_linear_kernel` and :py:func:`rational_kernel` rather
    than the constructor.

    Parameters
    ----------
    kind : str
        One of ``'constant'``, ``'piecewise_linear'``, ``'rational_decay'``.
    params : tuple
        Family parameters: ``(c,)`` for a constant kernel, ``(r, phi)``
        (two tuples of knots) for a piecewise-linear kernel and ``(a, b, p)``
        for ``phi(r) = a / (1 + b r^2)^p``.
    lipschitz_bound : float
        Lipschitz constant of the kernel on :math:`[0, +\\infty)`.
    """

    kind: str
    params: tuple
    lipschitz_bound: float

    def __call__(self, r):
        """Evaluate the kernel on (an array of) distances."""
        r = np.asarray(r, dtype=float)
        if self.kind == 'constant':
            out = np.full(r.shape, self.params[0])
        elif self.kind == 'piecewise_linear':
            knots_r, knots_phi = self.params
            out = np.interp(r, knots_r, knots_phi)
        else:
            a, b, p = self.params
            out = a / (1 + b * r**2)**p
        # Guard against -0.0 and roundoff below zero
        return np.maximum(out, 0.)

    @property
    def is_constant(self):
        return self.kind == 'constant'

    def to_dict(self):
        """Return the ``[kernel]`` config section of this kernel."""
        if self.kind == 'constant':
            d = {'kind': 'constant', 'value': float(self.params[0])}
        elif self.kind == 'piecewise_linear':
            d = {'kind': 'piecewise_linear',
                 'knots_r': [float(v) for v in self.params[0]],
                 'knots_phi': [float(v) for v in self.params[1]]}
        else:
            a, b, p = self.params
            d = {'kind': 'rational_decay', 'a': float(a), 'b': float(b),
                 'p': float(p)}
        d['lipschitz'] = float(self.lipschitz_bound)
        return d


def _resolve_bound(derived, declared):
    if declared is None:
        return float(derived)
    declared = float(declared)
    if np.isfinite(declared) and declared < derived:
        raise ValueError('Declared Lipschitz bound %r is smaller than the '
                         'derived bound %r.' % (declared, derived))
    return declared


def constant_kernel(c=1., lipschitz=None):
    """Constant influence kernel :math:`\\phi \\equiv c`.

    Parameters
    ----------
    c : float
        Nonnegative value of the kernel.
    lipschitz : float or None
        Declared Lipschitz bound. Default derives it (0).

    Returns
    -------
    kernel : :py:class:`InfluenceKernel`

    Examples
    --------
    >>> from peconsensus import constant_kernel
    >>> phi = constant_kernel(1)
    >>> phi([0, 1, 10])
    array([1., 1., 1.])
    """
    assert isinstance(c, (int, float)), 'c must be int or float.'
    assert c >= 0, 'A constant kernel must be nonnegative.'
    return InfluenceKernel('constant', (float(c),),
                           _resolve_bound(0., lipschitz))


def piecewise_linear_kernel(r, phi, lipschitz=None):
    """Piecewise-linear kernel through the knots ``(r[k], phi[k])``.

    The kernel is constant beyond the last knot.

    Parameters
    ----------
    r : array_like
        Strictly increasing knot abscissae, starting at 0.
    phi : array_like
        Nonnegative knot values.
    lipschitz : float or None
        Declared Lipschitz bound. Default derives it as the largest absolute
        slope between consecutive knots.

    Returns
    -------
    kernel : :py:class:`InfluenceKernel`

    Examples
    --------
    >>> from peconsensus import piecewise_linear_kernel
    >>> phi = piecewise_linear_kernel([0, 1, 2], [1, 0.5, 0.5])
    >>> phi.lipschitz_bound
    0.5
    >>> float(phi(1.5))
    0.5
    """
    r = np.asarray(r, dtype=float)
    phi = np.asarray(phi, dtype=float)
    assert r.ndim == 1 and r.size >= 1, 'r must be a non-empty 1D array.'
    assert r.shape == phi.shape, 'r and phi must have the same length.'
    assert r[0] == 0, 'The first knot must be at r=0.'
    assert np.all(np.diff(r) > 0), 'Knots must be strictly increasing.'
    assert np.all(phi >= 0), 'Kernel values must be nonnegative.'
    assert np.isfinite(r).all() and np.isfinite(phi).all()
    if r.size > 1:
        derived = np.max(np.abs(np.diff(phi) / np.diff(r)))
    else:
        derived = 0.
    return InfluenceKernel('piecewise_linear',
                           (tuple(r.tolist()), tuple(phi.tolist())),
                           _resolve_bound(derived, lipschitz))


def rational_kernel(a=1., b=1., p=1., lipschitz=None):
    """Rational-decay kernel :math:`\\phi(r) = a / (1 + b r^2)^p`.

    Parameters
    ----------
    a : float
        Strictly positive amplitude.
    b, p : float
        Nonnegative scale and exponent.
    lipschitz : float or None
        Declared Lipschitz bound. Default derives it.

    Returns
    -------
    kernel : :py:class:`InfluenceKernel`

    Notes
    -----
    Writing :math:`u = b r^2`, the derivative magnitude is
    :math:`2ap\\sqrt{b}\\sqrt{u}(1+u)^{-p-1}`, maximal at
    :math:`u = 1/(2p+1)`.

    Examples
    --------
    >>> from peconsensus import rational_kernel
    >>> phi = rational_kernel(1, 1, 1)
    >>> phi([0, 1])
    array([1. , 0.5])
    >>> round(phi.lipschitz_bound, 4)
    0.6495
    """
    assert a > 0, 'a must be strictly positive.'
    assert b >= 0 and p >= 0, 'b and p must be nonnegative.'
    if b == 0 or p == 0:
        derived = 0.
    else:
        u = 1. / (2 * p + 1)
        derived = 2 * a * p * np.sqrt(b) * np.sqrt(u) * (1 + u)**(-p - 1)
    return InfluenceKernel('rational_decay', (float(a), float(b), float(p)),
                           _resolve_bound(derived, lipschitz))


def kernel_from_dict(d):
    """Build a kernel from its ``[kernel]`` config section.

    Parameters
    ----------
    d : dict
        Mapping with a ``'kind'`` key and the family parameters, as returned
        by :py:meth:`InfluenceKernel.to_dict`.

    Returns
    -------
    kernel : :py:class:`InfluenceKernel`
    """
    kind = d.get('kind')
    if kind not in KERNEL_KINDS:
        raise ValueError('Kernel kind not recognized: %r. Must be one of %s.'
                         % (kind, ', '.join(KERNEL_KINDS)))
    lipschitz = d.get('lipschitz')
    if kind == 'constant':
        return constant_kernel(float(d.get('value', 1.)), lipschitz)
    if kind == 'piecewise_linear':
        if 'knots_r' not in d or 'knots_phi' not in d:
            raise ValueError('piecewise_linear kernel requires knots_r and '
                             'knots_phi.')
        return piecewise_linear_kernel(d['knots_r'], d['knots_phi'],
                                       lipschitz)
    return rational_kernel(float(d.get('a', 1.)), float(d.get('b', 1.)),
                           float(d.get('p', 1.)), lipschitz)
