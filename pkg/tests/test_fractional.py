import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sheetlab.errors import DomainError, GridError
from sheetlab.fractional import (
    FractionalOrder,
    TimeGrid1D,
    caputo_gl,
    caputo_l1,
    caputo_l1_corrected,
    caputo_power,
    composition_residual,
    iterated_caputo,
    nu_fold_composition_residual,
)

SQRT_PI = math.sqrt(math.pi)


class TestCaputoPower:
    def test_linear_half(self):
        assert caputo_power(1.0, 0.5, 1.0) == pytest.approx(2.0 / SQRT_PI, abs=1e-12)

    def test_sqrt_half_is_time_independent(self):
        # exponent p - beta = 0
        assert caputo_power(0.5, 0.5, 5.0) == pytest.approx(SQRT_PI / 2.0, abs=1e-12)
        assert caputo_power(0.5, 0.5, 0.3) == pytest.approx(SQRT_PI / 2.0, abs=1e-12)

    def test_quadratic_half(self):
        target = math.gamma(3.0) / math.gamma(2.5)
        assert caputo_power(2.0, 0.5, 1.0) == pytest.approx(target, abs=1e-12)

    @pytest.mark.parametrize("p,beta,t", [(-1.0, 0.5, 1.0), (1.0, 1.5, 1.0), (1.0, 0.5, 0.0)])
    def test_domain_errors(self, p, beta, t):
        with pytest.raises(DomainError):
            caputo_power(p, beta, t)


class TestTimeGrid:
    def test_must_start_at_zero(self):
        with pytest.raises(GridError):
            TimeGrid1D(points=np.array([0.1, 0.2, 0.3]))

    def test_must_increase(self):
        with pytest.raises(GridError):
            TimeGrid1D(points=np.array([0.0, 0.2, 0.2]))

    def test_uniform_step_checked(self):
        with pytest.raises(GridError):
            TimeGrid1D(points=np.array([0.0, 0.1, 0.3]), uniform_step=0.1)


class TestCaputoL1:
    def test_linear_hits_power_rule(self):
        grid = TimeGrid1D.uniform(1.0, 1024)
        res = caputo_l1(grid.points.copy(), grid, 0.5)
        assert abs(res.values[-1] - 2.0 / SQRT_PI) < 1e-3
        # the scheme is exact on piecewise-linear signals
        assert abs(res.values[-1] - 2.0 / SQRT_PI) < 1e-12

    def test_constant_killed_exactly(self):
        grid = TimeGrid1D.uniform(1.0, 64)
        res = caputo_l1(np.full(65, 3.7), grid, 0.5)
        assert np.all(np.abs(res.values[1:]) < 1e-12)

    def test_sqrt_near_singularity(self):
        grid = TimeGrid1D.uniform(1.0, 1024)
        res = caputo_l1(np.sqrt(grid.points), grid, 0.5)
        # reduced rate near the t=0 kink; endpoint still within 5e-3
        assert abs(res.values[-1] - SQRT_PI / 2.0) < 5e-3

    def test_undefined_at_zero_flagged(self):
        grid = TimeGrid1D.uniform(1.0, 16)
        res = caputo_l1(grid.points.copy(), grid, 0.5)
        assert math.isnan(res.values[0])

    def test_rejects_nonuniform(self):
        grid = TimeGrid1D(points=np.array([0.0, 0.1, 0.3, 0.7]))
        with pytest.raises(GridError):
            caputo_l1(np.zeros(4), grid, 0.5)

    def test_rejects_short_grid(self):
        grid = TimeGrid1D(points=np.array([0.0, 1.0]))
        with pytest.raises(GridError):
            caputo_l1(np.zeros(2), grid, 0.5)

    def test_convergence_order_at_least_1p4(self):
        # smooth oracle u = t^2 against the analytic rule, beta = 1/2
        errors = []
        for steps in (256, 512, 1024):
            grid = TimeGrid1D.uniform(1.0, steps)
            res = caputo_l1(grid.points**2, grid, 0.5)
            errors.append(abs(res.values[-1] - caputo_power(2.0, 0.5, 1.0)))
        orders = [math.log2(errors[i] / errors[i + 1]) for i in range(2)]
        assert min(orders) >= 1.4

    def test_matches_grunwald_letnikov_flag(self):
        grid = TimeGrid1D.uniform(1.0, 2048)
        u = grid.points**2
        l1 = caputo_l1(u, grid, 0.4).values[-1]
        gl = caputo_gl(u, grid, 0.4).values[-1]
        exact = caputo_power(2.0, 0.4, 1.0)
        assert abs(l1 - exact) < 1e-4
        assert abs(gl - exact) < 5e-3  # first-order scheme, looser

    def test_batch_columns_match_single(self):
        grid = TimeGrid1D.uniform(1.0, 128)
        cols = np.stack([grid.points, grid.points**2], axis=1)
        batch = caputo_l1(cols, grid, 0.5).values
        one = caputo_l1(grid.points.copy(), grid, 0.5).values
        two = caputo_l1(grid.points**2, grid, 0.5).values
        assert np.allclose(batch[1:, 0], one[1:], rtol=0, atol=1e-13)
        assert np.allclose(batch[1:, 1], two[1:], rtol=0, atol=1e-13)


@settings(max_examples=25, deadline=None)
@given(
    a=st.floats(-5, 5, allow_nan=False),
    b=st.floats(-5, 5, allow_nan=False),
    beta=st.floats(0.1, 0.9),
)
def test_l1_linearity(a, b, beta):
    grid = TimeGrid1D.uniform(1.0, 64)
    u = np.sin(grid.points)
    v = grid.points**1.5
    lhs = caputo_l1(a * u + b * v, grid, beta).values[1:]
    rhs = a * caputo_l1(u, grid, beta).values[1:] + b * caputo_l1(v, grid, beta).values[1:]
    assert np.max(np.abs(lhs - rhs)) < 1e-10 * max(1.0, abs(a), abs(b))


class TestIteratedCaputo:
    def test_half_twice_on_linear_gives_first_derivative(self):
        grid = TimeGrid1D.uniform(1.0, 2048)
        res = iterated_caputo(grid.points.copy(), grid, 0.5, 2)
        burn = len(grid) // 64
        assert np.max(np.abs(res.values[burn:] - 1.0)) < 2e-3

    def test_constant_killed(self):
        grid = TimeGrid1D.uniform(1.0, 256)
        res = iterated_caputo(np.full(257, 2.0), grid, 0.5, 2)
        assert np.nanmax(np.abs(res.values[1:])) < 1e-12

    def test_single_pass_cube_root(self):
        grid = TimeGrid1D.uniform(1.0, 2048)
        res = iterated_caputo(grid.points ** (1.0 / 3.0), grid, 1.0 / 3.0, 1)
        assert abs(res.values[-1] - math.gamma(4.0 / 3.0)) < 5e-3

    def test_rejects_order_above_one(self):
        grid = TimeGrid1D.uniform(1.0, 64)
        with pytest.raises(DomainError):
            iterated_caputo(grid.points.copy(), grid, 0.6, 2)

    def test_corrected_scheme_is_exact_on_power_layers(self):
        grid = TimeGrid1D.uniform(1.0, 512)
        u = 0.7 + 1.3 * grid.points ** (1.0 / 3.0)
        res = caputo_l1_corrected(u, grid, 1.0 / 3.0, (1.0 / 3.0, 2.0 / 3.0))
        assert np.nanmax(np.abs(res.values[1:] - 1.3 * math.gamma(4.0 / 3.0))) < 1e-12
        assert res.zero_limit == pytest.approx(1.3 * math.gamma(4.0 / 3.0), abs=1e-12)

    def test_analytic_layers_advance_between_passes(self):
        grid = TimeGrid1D.uniform(1.0, 512)
        a = 0.9
        u = 0.2 + a * grid.points ** (2.0 / 3.0)
        res = iterated_caputo(
            u, grid, 1.0 / 3.0, 2,
            singular_powers=(2.0 / 3.0,), layer_coeffs=[np.array([a])],
        )
        # D^(1/3) D^(1/3) t^(2/3) = Gamma(5/3)/Gamma(4/3) * Gamma(4/3) * t^0
        target = math.gamma(5.0 / 3.0)
        assert np.nanmax(np.abs(res.values[1:] - a * target)) < 1e-10


class TestComposition:
    def test_identity_on_linear(self):
        grid = TimeGrid1D.uniform(1.0, 2048)
        res = composition_residual(grid.points.copy(), grid, 0.5, 0.5)
        assert res.inf_norm < 5e-3

    def test_identity_on_constant_exact(self):
        grid = TimeGrid1D.uniform(1.0, 256)
        res = composition_residual(np.full(257, 4.2), grid, 0.3, 0.3)
        assert res.inf_norm == 0.0

    def test_identity_on_square_thirds(self):
        grid = TimeGrid1D.uniform(1.0, 2048)
        res = composition_residual(grid.points**2, grid, 1.0 / 3.0, 1.0 / 3.0)
        assert res.inf_norm < 5e-3

    def test_negative_exponent_reading_of_the_correction(self):
        # f = sqrt(t): the inner half-derivative has the nonzero limit
        # Gamma(3/2) at 0+, so the correction term is active.  With the
        # t^(-b1) reading both sides cancel; the +b1 reading would leave an
        # O(1) residual (about 0.5 at t=1).
        grid = TimeGrid1D.uniform(1.0, 4096)
        res = composition_residual(np.sqrt(grid.points), grid, 0.5, 0.5,
                                   burn_in=len(grid) // 8)
        assert res.inf_norm < 5e-3
        t = res.times
        wrong = (t**0.5 - t**-0.5) / math.gamma(0.5) * math.gamma(1.5)
        assert np.max(np.abs(wrong)) > 0.4  # the readings are far apart here

    def test_rejects_sum_above_one(self):
        grid = TimeGrid1D.uniform(1.0, 64)
        with pytest.raises(DomainError):
            composition_residual(grid.points.copy(), grid, 0.7, 0.5)

    @pytest.mark.parametrize("nu", [2, 3])
    def test_nu_fold_identity_on_linear(self, nu):
        grid = TimeGrid1D.uniform(1.0, 4096)
        res = nu_fold_composition_residual(grid.points.copy(), grid, nu)
        assert res.inf_norm < 1e-2


class TestFractionalOrder:
    def test_nu_derives_beta(self):
        order = FractionalOrder.from_nu(3)
        assert order.beta == 1.0 / 3.0 and order.nu == 3

    def test_parse_rational(self):
        assert FractionalOrder.parse("1/3").nu == 3
        assert FractionalOrder.parse("0.4").beta == pytest.approx(0.4)
        assert FractionalOrder.parse("0.4").nu is None

    @pytest.mark.parametrize("beta", [0.0, 1.0, -0.2, 1.7])
    def test_rejects_bad_beta(self, beta):
        with pytest.raises(DomainError):
            FractionalOrder(beta=beta)
