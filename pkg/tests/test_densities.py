import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from sheetlab.densities import (
    KernelId,
    KernelKind,
    StableMethod,
    bm_density,
    bs_density,
    density_boundary_values,
    density_pde_residual,
    inv_subordinator_density,
    inv_subordinator_x0_limit,
    laplace_check,
    stable_g,
)
from sheetlab.errors import DomainError, SeriesConvergenceError
from sheetlab.fractional import FractionalOrder

SQRT_PI = math.sqrt(math.pi)


class TestBmDensity:
    def test_standard_normal_at_zero(self):
        assert bm_density(1.0, 0.0) == pytest.approx(1.0 / math.sqrt(2 * math.pi), abs=1e-12)

    def test_time_scaling(self):
        assert bm_density(4.0, 0.0) == pytest.approx(1.0 / math.sqrt(8 * math.pi), abs=1e-12)

    def test_off_origin(self):
        assert bm_density(1.0, 1.0) == pytest.approx(math.exp(-0.5) / math.sqrt(2 * math.pi), abs=1e-12)

    def test_rejects_nonpositive_time(self):
        with pytest.raises(DomainError):
            bm_density(0.0, 1.0)


class TestBsDensity:
    def test_reduces_to_bm(self):
        assert bs_density([1.0, 1.0], [0.0], [0.0]) == pytest.approx(bm_density(1.0, 0.0), abs=1e-14)

    def test_product_variance(self):
        assert bs_density([2.0, 3.0], [0.0], [0.0]) == pytest.approx(1.0 / math.sqrt(12 * math.pi), abs=1e-12)

    @pytest.mark.parametrize("n,d", [(1, 1), (2, 1), (1, 2), (2, 2)])
    def test_normalizes(self, n, d):
        s = [0.7, 1.3][:n]
        v = float(np.prod(s))
        if d == 1:
            total, _ = quad(lambda y: bs_density(s, [0.2], [y]), -np.inf, np.inf)
        else:
            inner, _ = quad(
                lambda y1: quad(lambda y2: bs_density(s, [0.2, -0.1], [y1, y2]), -8, 8)[0],
                -8,
                8,
            )
            total = inner
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_rejects_bad_clock(self):
        with pytest.raises(DomainError):
            bs_density([1.0, -1.0], [0.0], [0.0])

    def test_kernel_id_validation(self):
        with pytest.raises(DomainError):
            KernelId(kind=KernelKind.STABLE_G)
        with pytest.raises(DomainError):
            KernelId(kind=KernelKind.BS, n=0, d=1)


class TestStableDensity:
    def test_closed_form_half_at_one(self):
        assert stable_g(0.5, 1.0, StableMethod.CLOSED_FORM_HALF) == pytest.approx(
            math.exp(-0.25) / (2 * SQRT_PI), abs=1e-12
        )

    def test_series_matches_closed_form_at_one(self):
        a = stable_g(0.5, 1.0, StableMethod.SERIES)
        b = stable_g(0.5, 1.0, StableMethod.CLOSED_FORM_HALF)
        assert abs(a - b) < 1e-8

    def test_series_matches_closed_form_on_range(self):
        xs = np.linspace(0.3, 10.0, 40)
        a = stable_g(0.5, xs, StableMethod.SERIES)
        b = stable_g(0.5, xs, StableMethod.CLOSED_FORM_HALF)
        assert np.max(np.abs(a - b)) < 1e-8

    def test_talbot_matches_closed_form_small_x(self):
        xs = np.array([0.02, 0.05, 0.1, 0.25])
        a = stable_g(0.5, xs, StableMethod.TALBOT)
        b = stable_g(0.5, xs, StableMethod.CLOSED_FORM_HALF)
        assert np.max(np.abs(a - b)) < 1e-10

    def test_series_reports_range_error_for_small_x(self):
        with pytest.raises(SeriesConvergenceError) as err:
            stable_g(0.5, 1e-3, StableMethod.SERIES)
        assert err.value.attained_bound > 0

    def test_normalization_one_third(self):
        total, _ = quad(lambda x: stable_g(1.0 / 3.0, x), 1e-12, np.inf, limit=400)
        assert total == pytest.approx(1.0, abs=1e-5)

    def test_closed_form_requires_half(self):
        with pytest.raises(DomainError):
            stable_g(0.4, 1.0, StableMethod.CLOSED_FORM_HALF)

    def test_rejects_nonpositive_x(self):
        with pytest.raises(DomainError):
            stable_g(0.5, 0.0)


@settings(max_examples=40, deadline=None)
@given(beta=st.floats(0.2, 0.8), x=st.floats(0.05, 20.0))
def test_stable_density_nonnegative(beta, x):
    assert stable_g(beta, x) >= -1e-12


class TestInverseSubordinatorDensity:
    def test_half_closed_form_value(self):
        target = 2.0 * math.exp(-0.25) / math.sqrt(4 * math.pi)
        assert inv_subordinator_density(0.5, 1.0, 1.0) == pytest.approx(target, abs=1e-12)

    def test_limit_at_origin(self):
        # extrapolate x -> 0+ and compare with t^(-beta)/Gamma(1-beta)
        xs = np.array([1e-4, 5e-4, 1e-3])
        vals = inv_subordinator_density(0.5, 1.0, xs)
        coeffs = np.polyfit(xs, vals, 1)
        assert np.polyval(coeffs, 0.0) == pytest.approx(1.0 / SQRT_PI, rel=1e-6)
        assert inv_subordinator_x0_limit(0.5, 1.0) == pytest.approx(1.0 / SQRT_PI, abs=1e-12)

    def test_normalization_beta_third(self):
        total, _ = quad(
            lambda x: inv_subordinator_density(1.0 / 3.0, 1.0, x), 1e-12, np.inf, limit=400
        )
        assert total == pytest.approx(1.0, abs=1e-4)

    @pytest.mark.parametrize("beta", [0.5, 1.0 / 3.0])
    def test_scaling_law(self, beta):
        c, t, x = 1.7, 0.9, 1.3
        lhs = inv_subordinator_density(beta, c * t, c**beta * x)
        rhs = c ** (-beta) * inv_subordinator_density(beta, t, x)
        assert abs(lhs - rhs) < 1e-9

    def test_abs_bm_identity(self):
        # half-line BM density against the rescaled inverse-clock density
        for t in (0.5, 1.0, 2.0):
            xs = np.linspace(0.05, 3.0, 40)
            k_abs = 2.0 * np.exp(-(xs**2) / (2 * t)) / math.sqrt(2 * math.pi * t)
            k_lam = math.sqrt(2.0) * inv_subordinator_density(0.5, t, math.sqrt(2.0) * xs)
            assert np.max(np.abs(k_abs - k_lam)) < 1e-10

    def test_cache_consistency(self):
        # cached scalar path and vector path agree to well below 1e-12
        xs = np.array([0.4, 0.9, 2.2])
        vec = inv_subordinator_density(1.0 / 3.0, 1.0, xs)
        scalars = [inv_subordinator_density(1.0 / 3.0, 1.0, float(x)) for x in xs]
        rerun = [inv_subordinator_density(1.0 / 3.0, 1.0, float(x)) for x in xs]
        assert np.max(np.abs(vec - scalars)) < 1e-12
        assert scalars == rerun


class TestLaplaceCheck:
    def test_half_on_reference_points(self):
        assert laplace_check(0.5, 1.0, [0.5, 1.0, 2.0]) < 1e-5

    def test_one_third(self):
        assert laplace_check(1.0 / 3.0, 0.5, [1.0]) < 1e-4

    def test_far_tail_absolute(self):
        # transform value ~ 2e-9; match to 1e-11 absolute
        assert laplace_check(0.5, 20.0, [1.0]) < 1e-11


class TestDensityPde:
    def test_heat_equation_residual_half(self):
        order = FractionalOrder.from_nu(2)
        t_grid = np.linspace(0.5, 2.0, 512)
        x_grid = np.linspace(0.2, 3.0, 512)
        report = density_pde_residual(order, t_grid, x_grid)
        assert report.residual_inf_norm < 1e-3

    def test_third_order_residual(self):
        order = FractionalOrder.from_nu(3)
        t_grid = np.linspace(0.5, 2.0, 160)
        x_grid = np.linspace(0.2, 3.0, 160)
        report = density_pde_residual(order, t_grid, x_grid)
        assert report.residual_inf_norm < 1e-3

    def test_boundary_rows_half(self):
        vals = density_boundary_values(FractionalOrder.from_nu(2), 1.0)
        k0, target0 = vals[0]
        assert abs(k0 - target0) / target0 < 1e-3
        assert target0 == pytest.approx(1.0 / SQRT_PI, abs=1e-12)
        k1, target1 = vals[1]
        assert target1 == 0.0
        assert abs(k1) < 1e-3

    def test_boundary_rows_third(self):
        vals = density_boundary_values(FractionalOrder.from_nu(3), 1.0)
        assert abs(vals[0][0] - 1.0 / math.gamma(2.0 / 3.0)) < 1e-3
        assert abs(vals[1][0] + 1.0 / math.gamma(1.0 / 3.0)) < 1e-3
        assert abs(vals[2][0]) < 1e-3

    def test_rejects_coarse_grid(self):
        order = FractionalOrder.from_nu(3)
        with pytest.raises(Exception):
            density_pde_residual(order, np.linspace(0.5, 2, 2), np.linspace(0.2, 3, 4))
