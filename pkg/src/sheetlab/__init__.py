"""sheetlab: kernels, fractional calculus, samplers, and PDE-residual checks
for Brownian-time and inverse-stable-Levy-time Brownian sheets."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DomainError,
    GridError,
    QuadratureError,
    SeriesConvergenceError,
    SheetlabError,
)
from .fractional import (
    CaputoResult,
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
from .densities import (
    KernelEval,
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
from .moments import (
    MomentConstant,
    MomentRoute,
    TimeProfile,
    abs_normal_moment,
    inner_time_moment,
    moment_E,
    profile_M,
    profile_M_dtj,
    profile_N,
)
from .samplers import (
    FieldKind,
    FieldSample,
    RngStream,
    Weight,
    mc_expectation,
    sample_field,
    sample_inverse_subordinator,
    sample_sheet_on_grid,
    sample_stable_L1,
)
from .initial_functions import (
    Growth,
    InitialFunction,
    bump_f0,
    bump_laplacian_d2,
    catalog,
    get_initial_function,
)
from .solutions import (
    Functional,
    QuadratureSpec,
    SolutionField,
    eval_field,
    eval_functional,
    eval_line,
    gaussian_expectation,
    oracle_line,
    oracle_polynomial,
    startup_layers,
    v_boundary_coefficient,
    weight_power,
)
from .reports import ResidualReport, SystemId
from .pde_verify import (
    BTBS_FRACTIONAL_COEFF,
    ISLTBS_FRACTIONAL_COEFF,
    StencilSpec,
    btbs_drift_coefficient,
    equivalence_residual,
    fd_laplacian_power,
    residual_fourth_order,
    residual_fractional,
    residual_order_2nu,
    u_coefficient_formula,
    u_coefficient_numeric,
)
