"""Finite-difference residuals of the four interacting PDE systems and of the
two conditional-equivalence identities.

Fields enter as (T, X) arrays: one active time axis against a 1-d spatial
lattice (the acceptance grids are all d = 1).  Time derivatives are central
differences; Caputo derivatives come from the L1 scheme on the same step and
therefore need field values on the full history grid starting at t = 0.

The fractional-system coefficients differ by clock and are kept as distinct
pinned constants: 1/sqrt(8) for the Brownian clock, 1/2 for the
inverse-subordinator clock.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, GridError
from .fractional import FractionalOrder, TimeGrid1D, caputo_l1, iterated_caputo
from .initial_functions import InitialFunction
from .moments import moment_E, MomentRoute, profile_M_dtj
from .reports import ResidualReport, SystemId
from .samplers import FieldKind

__all__ = [
    "BTBS_FRACTIONAL_COEFF",
    "ISLTBS_FRACTIONAL_COEFF",
    "StencilSpec",
    "fd_laplacian_power",
    "btbs_drift_coefficient",
    "residual_fourth_order",
    "residual_fractional",
    "residual_order_2nu",
    "equivalence_residual",
    "u_coefficient_formula",
    "u_coefficient_numeric",
]

BTBS_FRACTIONAL_COEFF = 1.0 / math.sqrt(8.0)
ISLTBS_FRACTIONAL_COEFF = 0.5


@dataclass(frozen=True)
class StencilSpec:
    """Step sizes and the highest derivative orders a grid must support."""

    h: float
    tau: float
    spatial_order: int = 2
    temporal_order: int = 1

    def __post_init__(self):
        if self.h <= 0 or self.tau <= 0:
            raise DomainError("steps must be positive")

    def min_spatial_points(self) -> int:
        # k-fold Laplacian eats one point per side per application
        return 2 * self.spatial_order + 1


def _laplacian_once(values: np.ndarray, h: float) -> np.ndarray:
    return (values[..., 2:] - 2.0 * values[..., 1:-1] + values[..., :-2]) / (h * h)


def fd_laplacian_power(values: np.ndarray, k: int, h: float) -> np.ndarray:
    """k-fold second-order central Laplacian along the last axis.

    The result loses k points per side; O(h**2) accurate on smooth fields
    and exact on quadratics for k = 1.
    """
    if k < 1:
        raise DomainError("power must be >= 1")
    values = np.asarray(values, dtype=float)
    if values.shape[-1] < 2 * k + 1:
        raise GridError(f"lattice too narrow for a {k}-fold Laplacian")
    out = values
    for _ in range(k):
        out = _laplacian_once(out, h)
    return out


def btbs_drift_coefficient(t_j: float, t_frozen, n: int) -> float:
    """sqrt(prod_{i != j} t_i / (2**(4-n) * t_j * pi**n)); 1/sqrt(8 pi t) at n=1."""
    if t_j <= 0:
        raise DomainError("drift coefficient is singular at t_j = 0")
    prod_off = float(np.prod([float(v) for v in t_frozen])) if len(t_frozen) else 1.0
    return math.sqrt(prod_off / (2.0 ** (4 - n) * t_j * math.pi**n))


def _central_dt(values: np.ndarray, tau: float) -> np.ndarray:
    return (values[2:] - values[:-2]) / (2.0 * tau)


def _report(system, j, residual, t_coords, x_coords, grid_desc, commute_gap=None):
    tt, xx = np.meshgrid(t_coords, x_coords, indexing="ij")
    coords = np.stack([tt.ravel(), xx.ravel()], axis=-1)
    return ResidualReport(
        system=system,
        j=j,
        grid_desc=grid_desc,
        residual_inf_norm=float(np.max(np.abs(residual))),
        residual_l2_norm=float(np.sqrt(np.mean(residual**2))),
        per_point=residual,
        coords=coords,
        commute_gap=commute_gap,
    )


def residual_fourth_order(
    u: np.ndarray,
    script_u: np.ndarray,
    f: InitialFunction,
    t_line: np.ndarray,
    t_frozen,
    j: int,
    x_points: np.ndarray,
    report_t_min: float = 0.25,
) -> ResidualReport:
    """Residual of d/dt_j u = drift(t) * Lap f + (1/8) Lap^2 scriptU.

    ``u`` and ``script_u`` live on (t_line, x_points); the drift Laplacian of
    f is analytic, the bi-Laplacian is finite-difference.  Points with
    t_j < ``report_t_min`` are excluded (the drift is singular at t_j = 0).
    """
    t_line = np.asarray(t_line, dtype=float)
    x_points = np.asarray(x_points, dtype=float)
    if u.shape != script_u.shape or u.shape != (t_line.size, x_points.size):
        raise GridError("field shapes must match the (t, x) lattice")
    n = len(t_frozen) + 1
    tau = t_line[1] - t_line[0]
    h = x_points[1] - x_points[0]

    dudt = _central_dt(u, tau)
    lap2 = fd_laplacian_power(script_u, 2, h)
    t_int = t_line[1:-1]
    x_int = x_points[2:-2]
    lap_f = np.asarray(f.laplacian_k(x_int[:, None], 1), dtype=float)
    drift = np.array([btbs_drift_coefficient(tv, t_frozen, n) for tv in t_int])
    residual = dudt[:, 2:-2] - drift[:, None] * lap_f[None, :] - lap2[1:-1, :] / 8.0

    keep = t_int >= report_t_min
    residual = residual[keep]
    desc = f"fourth-order n={n} tau={tau:g} h={h:g} t>={report_t_min:g}"
    return _report(SystemId.FOURTH_ORDER, j, residual, t_int[keep], x_int, desc)


def residual_fractional(
    u: np.ndarray,
    script_v: np.ndarray,
    kind: FieldKind,
    grid: TimeGrid1D,
    x_points: np.ndarray,
    j: int,
    order: FractionalOrder | None = None,
    report_t_min: float = 0.25,
) -> ResidualReport:
    """Residual of the fractional system D^beta_{t_j} u = c * Lap scriptV.

    The Brownian clock pins beta = 1/2 with c = 1/sqrt(8); the inverse clock
    uses the supplied beta with c = 1/2.  Fields must cover the full history
    grid from t = 0 for the Caputo derivative.
    """
    x_points = np.asarray(x_points, dtype=float)
    if kind is FieldKind.BTBS:
        beta = 0.5
        coeff = BTBS_FRACTIONAL_COEFF
        system = SystemId.HALF_FRACTIONAL
    else:
        if order is None:
            raise DomainError("the inverse-clock system needs beta")
        beta = order.beta
        coeff = ISLTBS_FRACTIONAL_COEFF
        system = SystemId.BETA_FRACTIONAL
    if u.shape != script_v.shape or u.shape != (len(grid), x_points.size):
        raise GridError("field shapes must match the (t, x) lattice")
    h = x_points[1] - x_points[0]

    cap = caputo_l1(u, grid, beta).values
    lap_v = fd_laplacian_power(script_v, 1, h)
    residual_full = cap[1:, 1:-1] - coeff * lap_v[1:, :]

    t_int = grid.points[1:]
    keep = t_int >= report_t_min
    residual = residual_full[keep]
    desc = f"{system.value} tau={grid.uniform_step:g} h={h:g} t>={report_t_min:g}"
    return _report(system, j, residual, t_int[keep], x_points[1:-1], desc)


def residual_order_2nu(
    u: np.ndarray,
    script_u_nu: np.ndarray,
    f: InitialFunction,
    order: FractionalOrder,
    t_line: np.ndarray,
    t_frozen,
    j: int,
    x_points: np.ndarray,
    report_t_min: float = 0.25,
) -> ResidualReport:
    """Residual of d/dt_j u = sum_k Lap^k f / 2^k * dM_k/dt_j + Lap^nu scriptU_nu / 2^nu."""
    nu = order.nu
    if nu is None or nu < 2:
        raise DomainError("the high-order system needs beta = 1/nu, nu >= 2")
    t_line = np.asarray(t_line, dtype=float)
    x_points = np.asarray(x_points, dtype=float)
    if u.shape != script_u_nu.shape or u.shape != (t_line.size, x_points.size):
        raise GridError("field shapes must match the (t, x) lattice")
    tau = t_line[1] - t_line[0]
    h = x_points[1] - x_points[0]

    dudt = _central_dt(u, tau)
    lap_nu = fd_laplacian_power(script_u_nu, nu, h)
    t_int = t_line[1:-1]
    x_int = x_points[nu:-nu]

    drift = np.zeros((t_int.size, x_int.size))
    for kappa in range(1, nu):
        lap_k = np.asarray(f.laplacian_k(x_int[:, None], kappa), dtype=float)
        dm = np.array(
            [
                profile_M_dtj(order, j, kappa, _insert(t_frozen, j, tv))
                for tv in t_int
            ]
        )
        drift += dm[:, None] * lap_k[None, :] / 2.0**kappa

    residual = dudt[:, nu:-nu] - drift - lap_nu[1:-1, :] / 2.0**nu
    keep = t_int >= report_t_min
    residual = residual[keep]
    desc = f"order-2nu nu={nu} tau={tau:g} h={h:g} t>={report_t_min:g}"
    return _report(SystemId.ORDER_2NU, j, residual, t_int[keep], x_int, desc)


def _insert(t_frozen, j, value):
    parts = [float(v) for v in t_frozen]
    parts.insert(j - 1, float(value))
    return tuple(parts)


def equivalence_residual(
    script_u: np.ndarray,
    script_v: np.ndarray,
    variant: FieldKind,
    grid: TimeGrid1D,
    x_points: np.ndarray,
    j: int,
    order: FractionalOrder | None = None,
    report_t_min: float = 0.25,
    startup: tuple | None = None,
) -> ResidualReport:
    """Residual of the equivalence condition between the weighted functionals.

    Brownian clock:      sqrt(8) Lap(D^1/2 scriptV) = Lap^2 scriptU.
    Inverse clock, 1/nu: 2**(nu-1) Lap(D^((nu-1) x beta) scriptV) = Lap^nu scriptU_nu.

    The mixed operator applies Caputo first, then the Laplacian; the
    commuted order is also computed and its max gap recorded.

    ``startup`` optionally carries analytic (powers, coeffs) layers of
    scriptV at t_j -> 0 (see ``solutions.startup_layers``); the iterated
    Caputo passes then subtract them exactly instead of fitting.
    """
    x_points = np.asarray(x_points, dtype=float)
    h = x_points[1] - x_points[0]
    if variant is FieldKind.BTBS:
        beta, iterations, nu = 0.5, 1, 2
        factor = math.sqrt(8.0)
        system = SystemId.EQUIV_COND_BTBS
        powers = None
    else:
        if order is None or order.nu is None:
            raise DomainError("the inverse-clock condition needs beta = 1/nu")
        nu = order.nu
        beta, iterations = order.beta, nu - 1
        factor = 2.0 ** (nu - 1)
        system = SystemId.EQUIV_COND_ISLTBS
        # iterated passes need the startup-corrected scheme on the t**(k/nu)
        # layers the functionals carry at t -> 0
        powers = tuple(k / nu for k in range(1, nu))
    if script_u.shape != script_v.shape or script_u.shape != (len(grid), x_points.size):
        raise GridError("field shapes must match the (t, x) lattice")
    layer_coeffs = None
    if startup is not None:
        powers = tuple(startup[0])
        layer_coeffs = [np.asarray(c, dtype=float) for c in startup[1]]

    cap = iterated_caputo(script_v, grid, beta, iterations,
                          singular_powers=powers, layer_coeffs=layer_coeffs)
    cap_vals = cap.values.copy()
    cap_vals[0] = cap.zero_limit
    lhs = factor * fd_laplacian_power(cap_vals, 1, h)
    rhs = fd_laplacian_power(script_u, nu, h)
    crop = nu - 1  # extra columns the nu-fold Laplacian loses beyond one
    lhs_aligned = lhs[:, crop:-crop] if crop else lhs
    residual_full = lhs_aligned[1:, :] - rhs[1:, :]

    # commuted operator order: Laplacian first, Caputo second
    lap_v = fd_laplacian_power(script_v, 1, h)
    commuted_layers = None
    if layer_coeffs is not None:
        # layers of Lap scriptV: second x-difference of each coefficient row
        commuted_layers = [
            (c[2:] - 2.0 * c[1:-1] + c[:-2]) / (h * h) for c in layer_coeffs
        ]
    cap2 = iterated_caputo(lap_v, grid, beta, iterations,
                           singular_powers=powers, layer_coeffs=commuted_layers)
    commuted = factor * cap2.values[1:, :]
    commuted_aligned = commuted[:, crop:-crop] if crop else commuted

    t_int = grid.points[1:]
    keep = t_int >= report_t_min
    residual = residual_full[keep]
    gap = float(np.max(np.abs(lhs_aligned[1:, :][keep] - commuted_aligned[keep])))
    desc = f"{system.value} tau={grid.uniform_step:g} h={h:g} t>={report_t_min:g}"
    return _report(system, j, residual, t_int[keep], x_points[nu:-nu], desc, commute_gap=gap)


def u_coefficient_formula(
    order: FractionalOrder,
    k: int,
    n: int,
    f: InitialFunction,
    x,
    t_frozen,
    variant: str = "as-stated",
) -> float:
    """t_j -> 0+ value of the k-iterated derivative of u, by formula.

    variant "as-stated": Gamma((nu-k)/nu) * E(1/nu, k)**n * Lap^k f(x)
    * prod_{i != j} t_i**(k/nu) / (nu * 2**k * (k-1)!).

    variant "derived": Lap^k f(x) / 2**k * E(1/nu, k)**(n-1)
    * prod_{i != j} t_i**(k/nu), which is what the moment expansion of u
    gives directly (each clock contributes E(1/nu, k) t**(k/nu) and the
    k-iterated derivative of t**(k/nu) ends at Gamma(k/nu + 1)).

    The two coincide exactly when k = nu/2 (in particular for nu = 2) and
    differ otherwise by Gamma((nu-k)/nu) / Gamma(k/nu); both are exposed so
    the numerical extrapolation can be compared against each.
    """
    nu = order.nu
    if nu is None or not (1 <= k <= nu - 1):
        raise DomainError("coefficient formula needs beta = 1/nu and 1 <= k <= nu-1")
    e_const = moment_E(order, float(k), MomentRoute.CLOSED_FORM).value
    lap_k = float(f.laplacian_k(np.atleast_1d(np.asarray(x, dtype=float)), k))
    prod_off = float(np.prod([float(v) ** (k / nu) for v in t_frozen])) if len(t_frozen) else 1.0
    if variant == "as-stated":
        return (
            math.gamma((nu - k) / nu)
            * e_const**n
            * lap_k
            * prod_off
            / (nu * 2.0**k * math.factorial(k - 1))
        )
    if variant == "derived":
        return lap_k / 2.0**k * e_const ** (n - 1) * prod_off
    raise DomainError(f"unknown variant {variant!r}")


def u_coefficient_numeric(u_line: np.ndarray, grid: TimeGrid1D, order: FractionalOrder, k: int):
    """Extrapolated t_j -> 0+ value of the k-iterated Caputo derivative of u."""
    powers = None
    if k > 1 and order.nu is not None:
        powers = tuple(m / order.nu for m in range(1, order.nu))
    return iterated_caputo(u_line, grid, order.beta, k, singular_powers=powers).zero_limit
