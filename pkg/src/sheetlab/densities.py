"""Transition kernels: Brownian motion/sheet, one-sided stable, inverse subordinator.

The one-sided stable density ``stable_g`` (Laplace transform exp(-s**beta))
is evaluated by a tail series in x**(-k*beta-1) where it is numerically
stable and by fixed-Talbot Laplace inversion closer to the origin, where the
series terms grow before they decay and cancellation would dominate.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln

from .errors import DomainError, GridError, QuadratureError, SeriesConvergenceError
from .fractional import FractionalOrder

__all__ = [
    "KernelKind",
    "KernelId",
    "KernelEval",
    "StableMethod",
    "bm_density",
    "bs_density",
    "stable_g",
    "inv_subordinator_density",
    "inv_subordinator_x0_limit",
    "laplace_check",
    "density_pde_residual",
    "density_boundary_values",
]

_SQRT_PI = math.sqrt(math.pi)


class KernelKind(enum.Enum):
    BM = "bm"
    BS = "bs"
    STABLE_G = "stable-g"
    INV_SUBORDINATOR = "inv-subordinator"


@dataclass(frozen=True)
class KernelId:
    kind: KernelKind
    beta: FractionalOrder | None = None
    n: int | None = None
    d: int | None = None

    def __post_init__(self):
        if self.kind in (KernelKind.STABLE_G, KernelKind.INV_SUBORDINATOR) and self.beta is None:
            raise DomainError(f"{self.kind.value} kernel requires a fractional order")
        if self.kind is KernelKind.BS and ((self.n or 0) < 1 or (self.d or 0) < 1):
            raise DomainError("sheet kernel requires n >= 1 and d >= 1")


@dataclass(frozen=True)
class KernelEval:
    kernel: KernelId
    args: tuple
    value: float

    def __post_init__(self):
        if self.value < 0:
            raise DomainError("kernel values are nonnegative")


class StableMethod(enum.Enum):
    AUTO = "auto"
    SERIES = "series"
    CLOSED_FORM_HALF = "closed-form-half"
    TALBOT = "talbot"


def bm_density(t: float, s) -> float | np.ndarray:
    """Density of a standard one-dimensional BM at time t: N(0, t)."""
    if t <= 0:
        raise DomainError(f"bm_density needs t > 0, got {t}")
    s = np.asarray(s, dtype=float)
    out = np.exp(-s * s / (2.0 * t)) / math.sqrt(2.0 * math.pi * t)
    return float(out) if out.ndim == 0 else out


def bs_density(s_vec, x, y) -> float:
    """Sheet transition density: Gaussian in y with variance prod(s) per axis."""
    s_vec = np.atleast_1d(np.asarray(s_vec, dtype=float))
    if np.any(s_vec <= 0):
        raise DomainError("every s_i must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise DomainError("x and y must have the same dimension")
    v = float(np.prod(s_vec))
    d = x.size
    sq = float(np.sum((x - y) ** 2))
    return math.exp(-sq / (2.0 * v)) / (2.0 * math.pi * v) ** (d / 2.0)


def _stable_half_closed(x: np.ndarray) -> np.ndarray:
    return x ** (-1.5) * np.exp(-1.0 / (4.0 * x)) / (2.0 * _SQRT_PI)


_SERIES_MAX_TERMS = 400
_SERIES_CANCEL_LIMIT = 1e12


def _stable_series_arr(beta: float, x: np.ndarray, tol: float):
    """Tail series for the stable density, vectorized over x.

    Returns (values, converged mask, attained bound).  Convergence is
    declared after two consecutive terms below tol/10 (single terms can
    vanish through the sine factor); points where the largest term exceeds
    the cancellation budget are marked unconverged.
    """
    logx = np.log(x)
    total = np.zeros_like(x)
    max_term = np.zeros_like(x)
    small_streak = np.zeros(x.shape, dtype=int)
    # Truncation threshold is floored well below any requested tolerance so
    # that batched and scalar evaluations of the same point agree to ~1e-13
    # (the optional result cache must not change values beyond 1e-12).
    cut = 0.1 * min(tol, 1e-13)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, _SERIES_MAX_TERMS + 1):
            sin_f = math.sin(k * math.pi * beta)
            log_mag = gammaln(k * beta + 1.0) - gammaln(k + 1.0) - (k * beta + 1.0) * logx
            term = ((-1.0) ** (k + 1) * sin_f / math.pi) * np.exp(np.minimum(log_mag, 700.0))
            total += term
            np.maximum(max_term, np.abs(term), out=max_term)
            small_streak = np.where(np.abs(term) < cut, small_streak + 1, 0)
            if np.all(small_streak >= 2):
                break
    with np.errstate(over="ignore", invalid="ignore"):
        bound = max_term * 1e-16 + np.where(small_streak >= 2, 0.0, np.abs(term))
        converged = (small_streak >= 2) & (max_term * 1e-16 < np.maximum(tol, 1e-13 * np.abs(total)))
        converged &= max_term < _SERIES_CANCEL_LIMIT * np.maximum(np.abs(total), 1e-300)
        converged &= np.isfinite(total)
    return total, converged, bound


_TALBOT_NODES = 32


def _talbot_invert(transform, t: np.ndarray, m: int = _TALBOT_NODES) -> np.ndarray:
    """Fixed-Talbot inverse Laplace transform at times t (Abate-Valko)."""
    t = np.asarray(t, dtype=float)
    r = 2.0 * m / (5.0 * t)
    theta = np.pi * np.arange(1, m) / m
    cot = 1.0 / np.tan(theta)
    s = r[..., None] * theta * (cot + 1j)
    sigma = theta + (theta * cot - 1.0) * cot
    terms = np.exp(t[..., None] * s) * transform(s) * (1.0 + 1j * sigma)
    total = 0.5 * np.exp(r * t) * np.real(transform(r + 0j)) + np.sum(np.real(terms), axis=-1)
    return r / m * total


def _stable_talbot_arr(beta: float, x: np.ndarray) -> np.ndarray:
    return _talbot_invert(lambda s: np.exp(-(s**beta)), x)


@lru_cache(maxsize=65536)
def _stable_scalar_cached(beta: float, x: float, tol: float, method: str) -> float:
    val = _stable_g_impl(beta, np.asarray([x]), tol, StableMethod(method))
    return float(val[0])


def _stable_g_impl(beta: float, x: np.ndarray, tol: float, method: StableMethod) -> np.ndarray:
    if method is StableMethod.CLOSED_FORM_HALF:
        if abs(beta - 0.5) > 1e-14:
            raise DomainError("closed form is only available for beta = 1/2")
        return _stable_half_closed(x)
    if method is StableMethod.TALBOT:
        return _stable_talbot_arr(beta, x)
    if method is StableMethod.SERIES:
        vals, ok, bound = _stable_series_arr(beta, x, tol)
        if not np.all(ok):
            worst = float(np.max(bound[~ok]))
            raise SeriesConvergenceError(
                f"stable series did not reach tol={tol} (attained {worst:.3e}); "
                "x is too small for the tail expansion",
                attained_bound=worst,
            )
        return vals
    # AUTO: closed form at beta=1/2, else series with Talbot fallback.
    if abs(beta - 0.5) <= 1e-14:
        return _stable_half_closed(x)
    vals, ok, _ = _stable_series_arr(beta, x, tol)
    if not np.all(ok):
        vals = np.where(ok, vals, _stable_talbot_arr(beta, np.where(ok, 1.0, x)))
    return vals


def stable_g(beta: float, x, method: StableMethod = StableMethod.AUTO, tol: float = 1e-8):
    """Density of the standard subordinator at time 1 (Laplace transform e^{-s^beta})."""
    if not (0.0 < beta < 1.0):
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise DomainError("stable density is supported on x > 0")
    if arr.ndim == 0:
        return _stable_scalar_cached(beta, float(arr), tol, method.value)
    return _stable_g_impl(beta, arr, tol, method)


def inv_subordinator_density(beta: float, t, x, tol: float = 1e-8):
    """Density of the inverse subordinator at time t:

    t / beta * x**(-1 - 1/beta) * g_beta(t * x**(-1/beta)).
    """
    if not (0.0 < beta < 1.0):
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    t_arr = np.asarray(t, dtype=float)
    x_arr = np.asarray(x, dtype=float)
    if np.any(t_arr <= 0) or np.any(x_arr <= 0):
        raise DomainError("inverse-subordinator density needs t > 0 and x > 0")
    scale = t_arr / beta * x_arr ** (-1.0 - 1.0 / beta)
    arg = t_arr * x_arr ** (-1.0 / beta)
    g_tol = tol / max(float(np.max(scale)), 1.0)
    g = stable_g(beta, arg, StableMethod.AUTO, g_tol)
    out = scale * g
    return float(out) if np.ndim(out) == 0 else out


def inv_subordinator_x0_limit(beta: float, t: float) -> float:
    """x -> 0+ limit of the inverse-subordinator density: t**(-beta)/Gamma(1-beta)."""
    if t <= 0:
        raise DomainError("limit needs t > 0")
    return t ** (-beta) / math.gamma(1.0 - beta)


def laplace_check(beta: float, x: float, s_points, tol: float = 1e-10) -> float:
    """Max deviation of the numerical t->s Laplace transform of the
    inverse-subordinator density from s**(beta-1) * exp(-x * s**beta)."""
    if x <= 0:
        raise DomainError("laplace_check needs x > 0")
    worst = 0.0
    t_star = x ** (1.0 / beta)
    for s in np.atleast_1d(np.asarray(s_points, dtype=float)):
        if s <= 0:
            raise DomainError("transform points must be positive")

        def integrand(t, s=s):
            return math.exp(-s * t) * inv_subordinator_density(beta, t, x)

        cut = 10.0 * t_star + 10.0 / s
        val1, err1 = quad(integrand, 0.0, cut, epsabs=tol, epsrel=1e-10, limit=400,
                          points=[min(t_star, cut * 0.5)])
        val2, err2 = quad(integrand, cut, np.inf, epsabs=tol, epsrel=1e-10, limit=400)
        if err1 + err2 > 1e3 * tol + 1e-8:
            raise QuadratureError(
                f"laplace_check quadrature error {err1 + err2:.3e} too large at s={s}"
            )
        target = s ** (beta - 1.0) * math.exp(-x * s**beta)
        worst = max(worst, abs(val1 + val2 - target))
    return worst


def _fd_time_derivative(field: np.ndarray, tau: float) -> np.ndarray:
    return (field[2:, :] - field[:-2, :]) / (2.0 * tau)


_SPACE_STENCILS = {
    2: (np.array([1.0, -2.0, 1.0]), 1),
    3: (np.array([-0.5, 1.0, 0.0, -1.0, 0.5]), 2),
}


def _fd_space_derivative(field: np.ndarray, h: float, order: int) -> np.ndarray:
    coeffs, margin = _SPACE_STENCILS[order]
    out = np.zeros((field.shape[0], field.shape[1] - 2 * margin))
    for k, c in enumerate(coeffs):
        if c != 0.0:
            out += c * field[:, k : k + out.shape[1]]
    return out / h**order


def density_pde_residual(order: FractionalOrder, t_grid, x_grid, tol: float = 1e-8):
    """Finite-difference residual of d/dt K = (-1)**nu * d^nu/dx^nu K on a grid.

    Returns a ``ResidualReport``; the grid must keep x bounded away from 0,
    where the density is singular as a distributional object.
    """
    from .reports import ResidualReport, SystemId

    if order.nu not in (2, 3):
        raise DomainError("density PDE residual implemented for nu in {2, 3}")
    nu = order.nu
    t_grid = np.asarray(t_grid, dtype=float)
    x_grid = np.asarray(x_grid, dtype=float)
    if np.any(x_grid <= 0):
        raise DomainError("x grid must stay strictly positive")
    margin = _SPACE_STENCILS[nu][1]
    if t_grid.size < 3 or x_grid.size < 2 * margin + 1:
        raise GridError("grid too coarse for the requested stencils")
    tau = t_grid[1] - t_grid[0]
    h = x_grid[1] - x_grid[0]
    if np.any(np.abs(np.diff(t_grid) - tau) > 1e-10 * tau) or np.any(
        np.abs(np.diff(x_grid) - h) > 1e-10 * h
    ):
        raise GridError("density PDE residual requires uniform grids")

    tt, xx = np.meshgrid(t_grid, x_grid, indexing="ij")
    field = inv_subordinator_density(order.beta, tt, xx, tol)
    lhs = _fd_time_derivative(field, tau)[:, margin:-margin]
    rhs = (-1.0) ** nu * _fd_space_derivative(field, h, nu)[1:-1, :]
    residual = lhs - rhs
    return ResidualReport(
        system=SystemId.DENSITY_PDE,
        j=None,
        grid_desc=f"t[{t_grid[0]:g},{t_grid[-1]:g}]x{t_grid.size} X x[{x_grid[0]:g},{x_grid[-1]:g}]x{x_grid.size} nu={nu}",
        residual_inf_norm=float(np.max(np.abs(residual))),
        residual_l2_norm=float(np.sqrt(np.mean(residual**2))),
        per_point=residual,
    )


def density_boundary_values(order: FractionalOrder, t: float, eps: float = 0.05, h: float = 1e-3):
    """Extrapolated x->0+ values of d^k/dx^k K for k = 0..nu-1, with targets.

    Targets: t**(-(k+1)/nu) * (-1)**k / Gamma(1 - (k+1)/nu) for k <= nu-2 and
    0 at k = nu-1.  Extrapolation is a quadratic fit in x from [eps, eps+6h].
    """
    nu = order.nu
    if nu is None:
        raise DomainError("boundary values need an order of the form 1/nu")
    n_fit = 7
    width = 2  # widest one-sided sampling needed for derivatives up to nu-1
    base = eps + h * np.arange(n_fit + 2 * width)
    vals = np.asarray([inv_subordinator_density(order.beta, t, float(x)) for x in base])

    results = {}
    for k in range(nu):
        if k == 0:
            samples = vals[:n_fit]
            xs = base[:n_fit]
        else:
            # central differences of order k at the interior fit points
            if k == 1:
                deriv = (vals[2:] - vals[:-2]) / (2.0 * h)
            elif k == 2:
                deriv = (vals[2:] - 2.0 * vals[1:-1] + vals[:-2]) / h**2
            else:
                raise DomainError("boundary derivatives implemented for k <= 2")
            samples = deriv[:n_fit]
            xs = base[1 : 1 + n_fit] if k else base[:n_fit]
        coeffs = np.polyfit(xs, samples, 2)
        extrapolated = float(np.polyval(coeffs, 0.0))
        if k <= nu - 2:
            target = t ** (-(k + 1.0) / nu) * (-1.0) ** k / math.gamma(1.0 - (k + 1.0) / nu)
        else:
            target = 0.0
        results[k] = (extrapolated, target)
    return results
