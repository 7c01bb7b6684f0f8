import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypmin import CoefficientSpec, Grid, eval_coeff, integrate, vanishing_prefix
from hypmin.coeffs import prefix_of_samples, relative_tol
from hypmin.errors import DomainError


class TestEval:
    def test_constant(self):
        assert eval_coeff(CoefficientSpec.constant(3.0), 0.7) == 3.0

    def test_step_both_sides(self):
        spec = CoefficientSpec.step(0.3, 0.0, 1.0)
        assert eval_coeff(spec, 0.2) == 0.0
        assert eval_coeff(spec, 0.3) == 0.0  # lo applies at the threshold
        assert eval_coeff(spec, 0.4) == 1.0

    def test_expbump_at_one(self):
        val = eval_coeff(CoefficientSpec.expbump(), 1.0)
        assert val == pytest.approx(math.exp(-1.0), abs=1e-15)

    def test_expbump_shifted(self):
        spec = CoefficientSpec.expbump(0.5)
        assert eval_coeff(spec, 0.5) == 0.0
        assert eval_coeff(spec, 1.0) == pytest.approx(math.exp(-2.0), rel=1e-12)

    def test_polynomial(self):
        spec = CoefficientSpec.polynomial([1.0, 2.0, 3.0])
        assert eval_coeff(spec, 0.5) == pytest.approx(1 + 1 + 0.75)

    def test_sampled(self):
        spec = CoefficientSpec.sampled([0.0, 0.5, 1.0], [0.0, 1.0, 0.0])
        assert eval_coeff(spec, 0.25) == pytest.approx(0.5)

    def test_vectorized(self):
        spec = CoefficientSpec.polynomial([0.0, 1.0])
        xs = np.array([0.0, 0.5, 1.0])
        assert np.allclose(eval_coeff(spec, xs), xs)

    def test_domain_error(self):
        with pytest.raises(DomainError):
            eval_coeff(CoefficientSpec.constant(1.0), 1.5)
        with pytest.raises(DomainError):
            eval_coeff(CoefficientSpec.constant(1.0), -0.1)

    def test_sampled_validation(self):
        with pytest.raises(DomainError):
            CoefficientSpec.sampled([0.0, 0.5, 0.5, 1.0], [0, 1, 2, 3])
        with pytest.raises(DomainError):
            CoefficientSpec.sampled([0.1, 1.0], [0, 1])


class TestIntegrate:
    def test_constant_one(self):
        assert integrate(CoefficientSpec.constant(1.0), 0.0, 1.0, 10) == pytest.approx(1.0)

    def test_linear_exact(self):
        spec = CoefficientSpec.polynomial([0.0, 1.0])
        assert integrate(spec, 0.0, 1.0, 7) == pytest.approx(0.5, abs=1e-15)

    def test_log_two(self):
        val = integrate(lambda x: 1.0 / (1.0 + x), 0.0, 1.0, 200)
        assert val == pytest.approx(math.log(2.0), abs=1e-4)

    def test_bounds_error(self):
        with pytest.raises(DomainError):
            integrate(CoefficientSpec.constant(1.0), 0.7, 0.3, 10)

    def test_empty_interval(self):
        assert integrate(CoefficientSpec.constant(5.0), 0.4, 0.4, 10) == 0.0

    @given(st.integers(min_value=1, max_value=50))
    def test_additive_on_nested_grids(self, n):
        spec = CoefficientSpec.polynomial([0.3, -1.2, 2.0, 0.7])
        whole = integrate(spec, 0.0, 1.0, 2 * n)
        parts = integrate(spec, 0.0, 0.5, n) + integrate(spec, 0.5, 1.0, n)
        assert whole == pytest.approx(parts, abs=1e-14)


class TestVanishingPrefix:
    def test_step(self):
        grid = Grid.uniform(200)
        spec = CoefficientSpec.step(0.3, 0.0, 1.0)
        val = vanishing_prefix(spec, 0.5, 1e-12, grid)
        assert abs(val - 0.3) <= grid.h

    def test_expbump_tolerance_artifact(self):
        # oracle: exp(-1/x) > tol exactly for x > 1/log(1/tol)
        tol = 1e-12
        crossing = 1.0 / math.log(1.0 / tol)
        grid = Grid.uniform(2000)
        val = vanishing_prefix(CoefficientSpec.expbump(), 0.5, tol, grid)
        assert val <= crossing + 1e-15
        assert val >= crossing - 2 * grid.h

    def test_identically_zero(self):
        grid = Grid.uniform(100)
        assert vanishing_prefix(CoefficientSpec.constant(0.0), 0.5, 1e-12, grid) == 0.5

    def test_nonzero_at_origin(self):
        grid = Grid.uniform(100)
        assert vanishing_prefix(CoefficientSpec.constant(2.0), 0.5, 1e-12, grid) == 0.0

    def test_bad_args(self):
        grid = Grid.uniform(10)
        with pytest.raises(DomainError):
            vanishing_prefix(CoefficientSpec.constant(0.0), 0.0, 1e-12, grid)
        with pytest.raises(DomainError):
            vanishing_prefix(CoefficientSpec.constant(0.0), 0.5, -1.0, grid)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(min_value=1e-14, max_value=1e-2),
           st.floats(min_value=1.0, max_value=100.0))
    def test_monotone_in_tol(self, tol, factor):
        grid = Grid.uniform(500)
        spec = CoefficientSpec.expbump()
        lo = vanishing_prefix(spec, 1.0, tol, grid)
        hi = vanishing_prefix(spec, 1.0, tol * factor, grid)
        assert lo <= hi

    @settings(max_examples=40, deadline=None)
    @given(st.floats(min_value=1e-6, max_value=1e6))
    def test_scaling_invariance(self, s):
        grid = Grid.uniform(300)
        xs = grid.nodes
        vals = np.where(xs > 0.4, np.sin(3 * xs) + 1.5, 0.0)
        tol = 1e-9
        base = prefix_of_samples(vals, grid.h, 1.0, tol)
        scaled = prefix_of_samples(s * vals, grid.h, 1.0, abs(s) * tol)
        assert base == scaled

    def test_relative_tol_zero_function(self):
        grid = Grid.uniform(10)
        assert relative_tol(CoefficientSpec.constant(0.0), grid) == 1e-12
