import pytest
import numpy as np

from unittest import TestCase
from peconsensus import (State, Configuration, KernelBounds,
                         validate_hypotheses, compute_lambda, rhs,
                         rhs_unweighted, kernel_sandwich_check,
                         constant_kernel, piecewise_linear_kernel,
                         rational_kernel)
from peconsensus.exceptions import (DegenerateInput, NonFiniteState,
                                    HypothesisViolation, DimensionMismatch,
                                    InvariantBreach)

rng = np.random.default_rng(123)
x2d = rng.uniform(0, 1, size=(8, 2))
W = rng.uniform(0, 1, size=(8, 8))
kernels = [constant_kernel(1), piecewise_linear_kernel([0, 1], [1, 0.4]),
           rational_kernel(1, 1, 1)]


class TestDynamics(TestCase):
    """Test dynamics.py."""

    def test_state(self):
        """Test State."""
        s = State([0., 1., 2.], t=1)
        assert s.positions.shape == (3, 1)
        assert (s.n_agents, s.dim, s.t) == (3, 1, 1.)
        with pytest.raises(ValueError):
            s.positions[0, 0] = 5
        np.testing.assert_array_equal((-s).positions, -s.positions)
        # The input array is copied
        x = np.zeros((2, 2))
        s = State(x)
        x[0, 0] = 1
        assert s.positions[0, 0] == 0
        with pytest.raises(DegenerateInput):
            State([1.])
        with pytest.raises(NonFiniteState):
            State([0., np.nan])
        with pytest.raises(NonFiniteState):
            State([0., np.inf])

    def test_configuration(self):
        """Test Configuration."""
        cfg = Configuration(constant_kernel(1))
        assert cfg.scaling == 'fixed'
        with pytest.raises(AssertionError):
            Configuration(constant_kernel(1), 'normalized')
        with pytest.raises(AssertionError):
            Configuration(lambda r: 1)

    def test_validate_hypotheses(self):
        """Test function validate_hypotheses."""
        x0 = State([0., 1.])
        b = validate_hypotheses(Configuration(rational_kernel(1, 1, 1)), x0)
        assert isinstance(b, KernelBounds)
        np.testing.assert_allclose([b.phi_min, b.phi_max, b.k_min, b.k_max],
                                   [0.5, 1, 0.5, 1])
        assert b.initial_diameter == 1
        b = validate_hypotheses(
            Configuration(rational_kernel(1, 1, 1), 'rescaled'), x0)
        np.testing.assert_allclose([b.k_min, b.k_max], [0.5, 2])
        # Minimum between two grid points is caught through the knots
        phi = piecewise_linear_kernel([0, 0.33333, 1], [1, 0.2, 1])
        b = validate_hypotheses(Configuration(phi), x0)
        assert b.phi_min == 0.2
        # All agents at the same point
        b = validate_hypotheses(Configuration(rational_kernel()),
                                State([0.5, 0.5]))
        assert b.phi_min == b.phi_max == 1 and b.initial_diameter == 0

    def test_hypothesis_violations(self):
        """H1 and H2 violations."""
        x0 = State([0., 2.])
        with pytest.raises(HypothesisViolation) as e:
            validate_hypotheses(
                Configuration(constant_kernel(1, lipschitz=np.inf)), x0)
        assert e.value.hypothesis == 'H1'
        with pytest.raises(HypothesisViolation) as e:
            validate_hypotheses(
                Configuration(piecewise_linear_kernel([0, 1], [1, 0])), x0)
        assert e.value.hypothesis == 'H2'
        with pytest.raises(HypothesisViolation) as e:
            validate_hypotheses(Configuration(constant_kernel(0)), x0)
        assert e.value.hypothesis == 'H2'
        # Still positive on [0, 1]
        validate_hypotheses(Configuration(
            piecewise_linear_kernel([0, 1.5], [1, 0])), State([0., 1.]))
        with pytest.raises(DegenerateInput):
            validate_hypotheses(Configuration(constant_kernel(), n_agents=3),
                                x0)
        with pytest.raises(DimensionMismatch):
            validate_hypotheses(Configuration(constant_kernel(), dim=2), x0)

    def test_compute_lambda(self):
        """Test function compute_lambda."""
        s = State([0., 1.])
        cfg = Configuration(rational_kernel(1, 1, 1))
        np.testing.assert_array_equal(compute_lambda(s, cfg), [1, 1])
        cfg = Configuration(rational_kernel(1, 1, 1), 'rescaled')
        np.testing.assert_allclose(compute_lambda(s, cfg), [4 / 3, 4 / 3])
        assert compute_lambda(s, cfg, i=1) == pytest.approx(4 / 3)
        # phi = 1 makes both scalings equal
        cfg = Configuration(constant_kernel(1), 'rescaled')
        np.testing.assert_allclose(compute_lambda(State(x2d), cfg), 1)

    def test_rhs(self):
        """Test function rhs."""
        cfg = Configuration(constant_kernel(1))
        s = State([0., 1., 2.])
        np.testing.assert_allclose(rhs(s, 1, cfg).ravel(), [1, 0, -1])
        np.testing.assert_array_equal(rhs(s, 0, cfg), 0)
        # Diagonal of the weights has no effect
        W1 = np.ones((3, 3))
        W0 = W1 - np.eye(3)
        np.testing.assert_array_equal(rhs(s, W1, cfg), rhs(s, W0, cfg))
        with pytest.raises(NonFiniteState):
            rhs(np.array([[0.], [np.nan]]), 1, cfg)
        with pytest.raises(AssertionError):
            rhs(s, 2 * W1, cfg)

    def test_rhs_invariances(self):
        """Translation, sign reversal, cooperativity and reduction."""
        shift = np.array([3., -7.])
        for phi in kernels:
            for scaling in ['fixed', 'rescaled']:
                cfg = Configuration(phi, scaling)
                v = rhs(State(x2d), W, cfg)
                assert v.shape == x2d.shape
                # Translation equivariance
                np.testing.assert_allclose(rhs(State(x2d + shift), W, cfg),
                                           v, atol=1e-12)
                # Exact sign reversal
                np.testing.assert_array_equal(rhs(State(-x2d), W, cfg), -v)
                # Reduction to the unweighted system
                np.testing.assert_allclose(rhs(State(x2d), 1, cfg),
                                           rhs_unweighted(State(x2d), cfg),
                                           atol=1e-12)
                # Cooperativity: the extreme agents move inwards
                v1 = rhs(State(x2d[:, 0]), W, cfg).ravel()
                assert v1[np.argmax(x2d[:, 0])] <= 0
                assert v1[np.argmin(x2d[:, 0])] >= 0

    def test_mean_conservation(self):
        """Fixed scaling with symmetric weights conserves the mean."""
        Ws = (W + W.T) / 2
        for phi in kernels:
            v = rhs(State(x2d), Ws, Configuration(phi, 'fixed'))
            np.testing.assert_allclose(v.sum(axis=0), 0, atol=1e-14)

    def test_kernel_sandwich_check(self):
        """Test function kernel_sandwich_check."""
        Wz = W.copy()
        np.fill_diagonal(Wz, 0)
        for phi in kernels:
            for scaling in ['fixed', 'rescaled']:
                cfg = Configuration(phi, scaling)
                bounds = validate_hypotheses(cfg, State(x2d))
                rep = kernel_sandwich_check(State(x2d), Wz, cfg, bounds)
                assert rep.passed and rep.check == 'kernel_sandwich'
                assert rep.margin >= -1e-12
        # Forged upper bound
        cfg = Configuration(constant_kernel(1))
        bounds = KernelBounds(1, 1, 1, 1e-3, 1)
        with pytest.raises(InvariantBreach) as e:
            kernel_sandwich_check(State(x2d), Wz, cfg, bounds)
        assert not e.value.report.passed
        rep = kernel_sandwich_check(State(x2d), Wz, cfg, bounds,
                                    raise_error=False)
        assert not rep.passed and rep.margin < 0
        assert 'agent' in rep.details
