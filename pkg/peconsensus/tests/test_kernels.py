import pytest
import numpy as np

from unittest import TestCase
from peconsensus.kernels import (InfluenceKernel, constant_kernel,
                                 piecewise_linear_kernel, rational_kernel,
                                 kernel_from_dict, KERNEL_KINDS)

r = np.linspace(0, 5, 50001)


def _max_slope(kernel):
    return np.abs(np.diff(kernel(r)) / np.diff(r)).max()


class TestKernels(TestCase):
    """Test kernels.py."""

    def test_constant_kernel(self):
        """Test function constant_kernel."""
        phi = constant_kernel(2)
        np.testing.assert_array_equal(phi([0, 1, 100]), [2, 2, 2])
        assert phi.lipschitz_bound == 0
        assert phi.is_constant
        assert phi(np.zeros((3, 3))).shape == (3, 3)
        with pytest.raises(AssertionError):
            constant_kernel(-1)

    def test_piecewise_linear_kernel(self):
        """Test function piecewise_linear_kernel."""
        phi = piecewise_linear_kernel([0, 1, 3], [1, 0.5, 0.1])
        np.testing.assert_allclose(phi([0, 0.5, 2, 3, 10]),
                                   [1, 0.75, 0.3, 0.1, 0.1])
        assert phi.lipschitz_bound == 0.5
        assert not phi.is_constant
        # Vanishing kernel is allowed but never negative
        phi = piecewise_linear_kernel([0, 1], [1, 0])
        assert phi(r).min() == 0
        with pytest.raises(AssertionError):
            piecewise_linear_kernel([0.5, 1], [1, 1])
        with pytest.raises(AssertionError):
            piecewise_linear_kernel([0, 1, 1], [1, 1, 1])
        with pytest.raises(AssertionError):
            piecewise_linear_kernel([0, 1], [1, -1])

    def test_rational_kernel(self):
        """Test function rational_kernel."""
        phi = rational_kernel(1, 1, 1)
        np.testing.assert_allclose(phi([0, 1, 2]), [1, 0.5, 0.2])
        assert (phi(r) > 0).all()
        # The derived bound is the exact maximum of |phi'|
        for a, b, p in [(1, 1, 1), (2, 0.5, 1.5), (1, 4, 0.5)]:
            phi = rational_kernel(a, b, p)
            np.testing.assert_allclose(_max_slope(phi), phi.lipschitz_bound,
                                       rtol=1e-4)
        assert rational_kernel(1, 0, 1).lipschitz_bound == 0
        assert rational_kernel(1, 1, 0).lipschitz_bound == 0

    def test_declared_lipschitz(self):
        """Declared bounds may only loosen the derived one."""
        phi = piecewise_linear_kernel([0, 1], [1, 0.5], lipschitz=2)
        assert phi.lipschitz_bound == 2
        assert constant_kernel(1, lipschitz=np.inf).lipschitz_bound == np.inf
        with pytest.raises(ValueError):
            piecewise_linear_kernel([0, 1], [1, 0.5], lipschitz=0.1)
        with pytest.raises(ValueError):
            rational_kernel(1, 1, 1, lipschitz=0.5)

    def test_kernel_from_dict(self):
        """Test function kernel_from_dict and InfluenceKernel.to_dict."""
        for phi in [constant_kernel(0.5),
                    piecewise_linear_kernel([0, 1, 2], [1, 0.6, 0.2]),
                    rational_kernel(1, 2, 0.5)]:
            assert phi.kind in KERNEL_KINDS
            assert isinstance(phi, InfluenceKernel)
            assert kernel_from_dict(phi.to_dict()) == phi
        assert kernel_from_dict({'kind': 'rational_decay'}) == \
            rational_kernel(1, 1, 1)
        with pytest.raises(ValueError):
            kernel_from_dict({'kind': 'gaussian'})
        with pytest.raises(ValueError):
            kernel_from_dict({'kind': 'piecewise_linear', 'knots_r': [0, 1]})
