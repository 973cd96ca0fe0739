import math

import numpy as np
import pytest
from scipy.special import erfc

from sheetlab.errors import DomainError
from sheetlab.initial_functions import get_initial_function
from sheetlab.samplers import (
    FieldKind,
    RngStream,
    Weight,
    mc_expectation,
    sample_field,
    sample_inverse_subordinator,
    sample_sheet_on_grid,
    sample_stable_L1,
)

QUAD = get_initial_function("quadratic", d=1, polynomial_growth=True)


class TestDeterminism:
    def test_identical_streams_reproduce_bitwise(self):
        a = sample_stable_L1(0.5, RngStream(42, 3), size=1000)
        b = sample_stable_L1(0.5, RngStream(42, 3), size=1000)
        assert np.array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = sample_stable_L1(0.5, RngStream(42, 3), size=1000)
        b = sample_stable_L1(0.5, RngStream(42, 4), size=1000)
        assert not np.array_equal(a, b)

    def test_mc_expectation_reproducible(self):
        kwargs = dict(beta=1.0 / 3.0, nu=3)
        a = mc_expectation(FieldKind.ISLTBS, QUAD, Weight.PROD_S_NU, 1, (1.0, 0.5), [0.3],
                           50_000, RngStream(77, 5), **kwargs)
        b = mc_expectation(FieldKind.ISLTBS, QUAD, Weight.PROD_S_NU, 1, (1.0, 0.5), [0.3],
                           50_000, RngStream(77, 5), **kwargs)
        assert a == b

    def test_child_streams_are_distinct(self):
        s = RngStream(3, 1)
        assert s.child(0) != s.child(1)


class TestStableSampler:
    @pytest.mark.parametrize("beta", [0.5, 1.0 / 3.0])
    def test_laplace_transform(self, beta):
        draws = sample_stable_L1(beta, RngStream(101, int(beta * 100)), size=10**6)
        for s in (0.5, 1.0, 2.0):
            vals = np.exp(-s * draws)
            se = float(np.std(vals)) / 1000.0
            assert abs(float(np.mean(vals)) - math.exp(-(s**beta))) <= 3.0 * se

    def test_half_law_kolmogorov_smirnov(self):
        # for beta = 1/2 the subordinator at time 1 is 1/(2 Z^2) with Z
        # standard normal, giving the CDF erfc(1/(2 sqrt(x)))
        draws = np.sort(sample_stable_L1(0.5, RngStream(12345, 7), size=10**6))
        cdf = erfc(1.0 / (2.0 * np.sqrt(draws)))
        n = draws.size
        hi = np.max(np.abs(np.arange(1, n + 1) / n - cdf))
        lo = np.max(np.abs(np.arange(0, n) / n - cdf))
        assert max(hi, lo) < 0.002

    def test_rejects_bad_beta(self):
        with pytest.raises(DomainError):
            sample_stable_L1(1.2, RngStream(0))


class TestInverseSubordinatorSampler:
    def test_zero_time_exact(self):
        assert sample_inverse_subordinator(0.5, 0.0, RngStream(1)) == 0.0

    def test_mean_half(self):
        draws = sample_inverse_subordinator(0.5, 1.0, RngStream(5, 0), size=10**6)
        se = float(np.std(draws)) / 1000.0
        assert abs(float(np.mean(draws)) - 2.0 / math.sqrt(math.pi)) <= 3.0 * se

    def test_mean_third_scaled_time(self):
        draws = sample_inverse_subordinator(1.0 / 3.0, 8.0, RngStream(5, 1), size=10**6)
        target = 2.0 * 3.0 / math.gamma(1.0 / 3.0)
        se = float(np.std(draws)) / 1000.0
        assert abs(float(np.mean(draws)) - target) <= 3.0 * se


class TestFieldSampler:
    def test_boundary_returns_start_exactly(self):
        for k in range(100):
            sample = sample_field(FieldKind.BTBS, (0.0, 1.0), [0.7], None, RngStream(9, k))
            assert sample.value[0] == 0.7

    def test_conditional_variance(self):
        # fixed inner times: the empirical variance matches their product
        rng = RngStream(31, 0).generator()
        inner = np.array([0.8, 1.6])
        v = float(np.prod(inner))
        draws = 0.0 + np.sqrt(v) * rng.standard_normal(size=10**5)
        assert abs(float(np.var(draws)) - v) / v < 0.05

    def test_second_moment_btbs(self):
        est, se = mc_expectation(FieldKind.BTBS, QUAD, Weight.NONE, 1, (1.0,), [0.0],
                                 10**6, RngStream(11, 2))
        assert abs(est - math.sqrt(2.0 / math.pi)) <= 3.0 * se

    def test_isltbs_mean_reflects_inverse_clock(self):
        est, se = mc_expectation(FieldKind.ISLTBS, QUAD, Weight.NONE, 1, (1.0,), [0.0],
                                 10**6, RngStream(11, 3), beta=0.5)
        assert abs(est - 2.0 / math.sqrt(math.pi)) <= 3.0 * se

    def test_constant_function_no_variance(self):
        class One:
            name = "one"

            def value(self, y):
                return np.ones(np.asarray(y).shape[:-1])

        est, se = mc_expectation(FieldKind.BTBS, One(), Weight.NONE, 1, (1.0,), [0.0],
                                 1000, RngStream(2, 2))
        assert est == 1.0 and se == 0.0

    def test_weighted_example(self):
        est, se = mc_expectation(FieldKind.BTBS, QUAD, Weight.PROD_S, 1, (1.0, 1.0), [0.0],
                                 10**6, RngStream(11, 1))
        assert abs(est - math.sqrt(2.0 / math.pi)) <= 3.0 * se


class TestSheetDemoSampler:
    def test_shape_and_boundary(self):
        axes = [np.linspace(0.0, 1.0, 5), np.linspace(0.0, 2.0, 4)]
        field = sample_sheet_on_grid(axes, 2, RngStream(8, 8))
        assert field.shape == (5, 4, 2)
        assert np.all(field[0, :, :] == 0.0)
        assert np.all(field[:, 0, :] == 0.0)

    def test_corner_variance(self):
        # Var W(t) = prod(t); check the far corner over many draws
        acc = []
        for k in range(4000):
            f = sample_sheet_on_grid([np.array([0.0, 1.0]), np.array([0.0, 2.0])], 1,
                                     RngStream(99, k))
            acc.append(f[1, 1, 0])
        var = float(np.var(acc))
        assert abs(var - 2.0) / 2.0 < 0.1
