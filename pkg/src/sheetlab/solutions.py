"""Deterministic quadrature for the solution functionals and their oracles.

Each functional is a kernel-weighted integral over the inner-time vector s:

    value(t, x) = int_{R_+^n} [prod_{i != j} s_i**p] E[f(N(x, prod(s) I_d))]
                  prod_i kernel(t_i, s_i) ds,

with p = 0, 1, 2, nu for the plain mean and the three weighted functionals.
For the Brownian clock the kernel is the half-normal density of |B(t_i)|
(twice the BM density on s > 0); for the inverse-subordinator clock it is
the subordinator inverse's density.  The outer integral maps to (0, 1) per
axis through s = t * (w/(1-w))**2 (Brownian) or s = t**beta * w/(1-w)
(inverse clock) on Gauss-Legendre nodes; the inner Gaussian expectation is
tensor Gauss-Hermite.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .densities import inv_subordinator_density
from .errors import DomainError, QuadratureError
from .fractional import FractionalOrder
from .initial_functions import InitialFunction
from .moments import inner_time_moment
from .samplers import FieldKind

__all__ = [
    "Functional",
    "QuadratureSpec",
    "SolutionField",
    "gaussian_expectation",
    "eval_functional",
    "eval_line",
    "eval_field",
    "oracle_polynomial",
    "oracle_line",
    "startup_layers",
    "weight_power",
    "v_boundary_coefficient",
]


class Functional(enum.Enum):
    U = "u"
    SCRIPT_U = "script-u"
    SCRIPT_V = "script-v"
    SCRIPT_U_NU = "script-u-nu"


def weight_power(functional: Functional, nu: int | None = None) -> float:
    if functional is Functional.U:
        return 0.0
    if functional is Functional.SCRIPT_V:
        return 1.0
    if functional is Functional.SCRIPT_U:
        return 2.0
    if nu is None:
        raise DomainError("the nu-weighted functional needs nu")
    return float(nu)


@dataclass(frozen=True)
class QuadratureSpec:
    inner_nodes: int = 64
    outer_nodes: int = 96
    truncation_radius: float | None = None  # optional per-axis cut in s units
    tolerance: float = 1e-6

    def __post_init__(self):
        if self.inner_nodes < 8 or self.outer_nodes < 8:
            raise DomainError("node counts must be at least 8")
        if self.tolerance <= 0:
            raise DomainError("tolerance must be positive")

    @classmethod
    def default_for(cls, n: int) -> "QuadratureSpec":
        return cls(tolerance=1e-6 if n == 1 else 1e-5)


@lru_cache(maxsize=32)
def _gauss_legendre(nodes: int):
    x, w = np.polynomial.legendre.leggauss(nodes)
    return 0.5 * (x + 1.0), 0.5 * w  # mapped to (0, 1)


@lru_cache(maxsize=32)
def _gauss_hermite(nodes: int):
    x, w = np.polynomial.hermite.hermgauss(nodes)
    return x, w / math.sqrt(math.pi)


@lru_cache(maxsize=32)
def _hermite_grid(nodes: int, d: int):
    """Tensor Gauss-Hermite abscissae (H^d, d) and weights (H^d,)."""
    x, w = _gauss_hermite(nodes)
    if d == 1:
        return x[:, None], w
    grids = np.meshgrid(*([x] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wts = np.ones(pts.shape[0])
    for axis in range(d):
        wts *= w[np.arange(pts.shape[0]) // (nodes ** (d - 1 - axis)) % nodes]
    return pts, wts


def gaussian_expectation(f: InitialFunction, x, variance: float, nodes: int = 64) -> float:
    """E[f(N(x, variance * I_d))] by tensor Gauss-Hermite; f(x) at variance 0."""
    if variance < 0:
        raise DomainError("variance must be nonnegative")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if variance == 0.0:
        return float(f.value(x))
    pts, wts = _hermite_grid(nodes, x.size)
    y = x[None, :] + math.sqrt(2.0 * variance) * pts
    return float(np.dot(wts, f.value(y)))


def _axis_nodes(kind: FieldKind, t_i: float, order: FractionalOrder | None,
                spec: QuadratureSpec):
    """Outer substitution for one axis: returns (s values, combined weights).

    Weights include the kernel value, the substitution Jacobian, and the
    Gauss-Legendre weight, so that sum(weights * g(s)) approximates
    int_0^inf g(s) kernel(t_i, s) ds.
    """
    w, glw = _gauss_legendre(spec.outer_nodes)
    if kind is FieldKind.BTBS:
        q = (w / (1.0 - w)) ** 2
        s = t_i * q
        jac = t_i * 2.0 * w / (1.0 - w) ** 3
        kernel = 2.0 * np.exp(-s * s / (2.0 * t_i)) / math.sqrt(2.0 * math.pi * t_i)
    else:
        if order is None:
            raise DomainError("inverse-clock quadrature needs a fractional order")
        q = w / (1.0 - w)
        s = t_i**order.beta * q
        jac = t_i**order.beta / (1.0 - w) ** 2
        kernel = inv_subordinator_density(order.beta, t_i, s, spec.tolerance * 0.01)
    weights = kernel * jac * glw
    if spec.truncation_radius is not None:
        keep = s <= spec.truncation_radius
        neglected = float(np.sum(weights[~keep]))
        if neglected > spec.tolerance / 10.0:
            raise QuadratureError(
                f"truncation radius {spec.truncation_radius} drops kernel mass "
                f"{neglected:.3e} > tolerance/10"
            )
        s, weights = s[keep], weights[keep]
    return s, weights


def _eval_zero_boundary(functional, kind, f, t, x, j, order, spec, power):
    """Boundary lattice points: axes with t_i = 0 force s_i = 0.

    A zero off-axis clock kills every weighted functional; a zero active
    clock leaves f(x) times the product of off-axis moment integrals.
    """
    zero_off_axis = any(ti == 0.0 for i, ti in enumerate(t, start=1) if i != j)
    if power > 0 and zero_off_axis:
        return 0.0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    value = float(f.value(x))
    for i, ti in enumerate(t, start=1):
        if i == j or ti == 0.0:
            continue
        s, wts = _axis_nodes(kind, ti, order, spec)
        value *= float(np.dot(wts, s**power))
    return value


def eval_functional(
    functional: Functional,
    kind: FieldKind,
    f: InitialFunction,
    t,
    x,
    j: int = 1,
    order: FractionalOrder | None = None,
    spec: QuadratureSpec | None = None,
) -> float:
    """Nested-quadrature value of one functional at a single (t, x)."""
    t = tuple(float(v) for v in t)
    n = len(t)
    if any(v < 0 for v in t):
        raise DomainError("time parameters must be nonnegative")
    if not (1 <= j <= n):
        raise DomainError(f"active index j={j} outside 1..{n}")
    if kind is FieldKind.ISLTBS and order is None:
        raise DomainError("ISLTBS functionals need a fractional order")
    if functional is Functional.SCRIPT_U_NU and (order is None or order.nu is None):
        raise DomainError("the nu-weighted functional needs beta = 1/nu")
    spec = spec or QuadratureSpec.default_for(n)
    power = weight_power(functional, order.nu if order else None)

    if any(v == 0.0 for v in t):
        return _eval_zero_boundary(functional, kind, f, t, x, j, order, spec, power)

    per_axis = [_axis_nodes(kind, ti, order, spec) for ti in t]
    x = np.atleast_1d(np.asarray(x, dtype=float))

    # Tensor the axes: combined outer weight, the off-axis weight product,
    # and the conditional variance prod(s) per combination.
    grids_s = np.meshgrid(*[s for s, _ in per_axis], indexing="ij")
    grids_w = np.meshgrid(*[w for _, w in per_axis], indexing="ij")
    outer_w = np.ones_like(grids_w[0])
    for g in grids_w:
        outer_w = outer_w * g
    variance = np.ones_like(grids_s[0])
    wgt = np.ones_like(grids_s[0])
    for i, g in enumerate(grids_s, start=1):
        variance = variance * g
        if power > 0 and i != j:
            wgt = wgt * g**power
    outer_w, wgt, variance = (a.ravel() for a in (outer_w, wgt, variance))

    pts, hw = _hermite_grid(spec.inner_nodes, x.size)
    # y has shape (combos, hermite, d); chunk combos to bound memory.
    total = 0.0
    chunk = max(1, 2**22 // (pts.shape[0] * max(x.size, 1)))
    for lo in range(0, variance.size, chunk):
        hi = min(lo + chunk, variance.size)
        y = x[None, None, :] + np.sqrt(2.0 * variance[lo:hi])[:, None, None] * pts[None, :, :]
        inner = np.asarray(f.value(y), dtype=float) @ hw
        total += float(np.dot(outer_w[lo:hi] * wgt[lo:hi], inner))
    return total


@dataclass(frozen=True)
class SolutionField:
    """Functional values on a (t-lattice) x (x-lattice) product grid."""

    functional: Functional
    kind: FieldKind
    j: int
    t_points: np.ndarray  # (P, n)
    x_points: np.ndarray  # (Q, d)
    values: np.ndarray  # (P, Q)

    def write_csv(self, path, header_comment: str | None = None) -> None:
        n = self.t_points.shape[1]
        d = self.x_points.shape[1]
        cols = [f"t{i + 1}" for i in range(n)] + [f"x{i + 1}" for i in range(d)] + ["value"]
        with open(path, "w", encoding="utf-8") as fh:
            if header_comment:
                fh.write(header_comment.rstrip("\n") + "\n")
            fh.write(",".join(cols) + "\n")
            for p in range(self.t_points.shape[0]):
                for q in range(self.x_points.shape[0]):
                    cells = [f"{c:.17g}" for c in self.t_points[p]]
                    cells += [f"{c:.17g}" for c in self.x_points[q]]
                    cells.append(f"{self.values[p, q]:.17g}")
                    fh.write(",".join(cells) + "\n")


def eval_line(
    functional: Functional,
    kind: FieldKind,
    f: InitialFunction,
    t_line,
    t_frozen,
    j: int,
    x_points,
    order: FractionalOrder | None = None,
    spec: QuadratureSpec | None = None,
    t_chunk: int = 32,
) -> np.ndarray:
    """Functional values on (active-axis line) x (x-points), vectorized.

    ``t_line`` holds the active axis t_j; ``t_frozen`` the remaining axes in
    order with j removed.  Returns shape (len(t_line), len(x_points)).  The
    fixed axes tensorize once; the active axis and the x batch share the
    inner Hermite evaluation, chunked along t to bound memory.
    """
    t_line = np.asarray(t_line, dtype=float)
    t_frozen = tuple(float(v) for v in t_frozen)
    n = len(t_frozen) + 1
    spec = spec or QuadratureSpec.default_for(n)
    x_points = np.atleast_2d(np.asarray(x_points, dtype=float))
    q_count = x_points.shape[0]
    d = x_points.shape[1]
    power = weight_power(functional, order.nu if order else None)
    if kind is FieldKind.ISLTBS and order is None:
        raise DomainError("ISLTBS functionals need a fractional order")

    def full_t(tj):
        parts = list(t_frozen)
        parts.insert(j - 1, float(tj))
        return tuple(parts)

    out = np.empty((t_line.size, q_count))
    boundary_rows = (t_line == 0.0) | (min(t_frozen, default=1.0) == 0.0)
    for idx in np.nonzero(boundary_rows)[0]:
        for qq in range(q_count):
            out[idx, qq] = _eval_zero_boundary(
                functional, kind, f, full_t(t_line[idx]), x_points[qq], j, order, spec, power
            )
    active = np.nonzero(~boundary_rows)[0]
    if active.size == 0:
        return out
    if spec.truncation_radius is not None:
        for idx in active:
            for qq in range(q_count):
                out[idx, qq] = eval_functional(
                    functional, kind, f, full_t(t_line[idx]), x_points[qq], j=j,
                    order=order, spec=spec,
                )
        return out

    # Fixed axes: tensorized variance / weight products (C combinations).
    off = [_axis_nodes(kind, ti, order, spec) for ti in t_frozen]
    if off:
        grids_s = np.meshgrid(*[s for s, _ in off], indexing="ij")
        grids_w = np.meshgrid(*[wt for _, wt in off], indexing="ij")
        off_var = np.ones_like(grids_s[0])
        off_wgt = np.ones_like(grids_w[0])
        for gs, gw in zip(grids_s, grids_w):
            off_var = off_var * gs
            off_wgt = off_wgt * gw * (gs**power if power > 0 else 1.0)
        off_var = off_var.ravel()
        off_wgt = off_wgt.ravel()
    else:
        off_var = np.ones(1)
        off_wgt = np.ones(1)

    # Active axis: (T, O) inner-time values and combined weights.
    w, glw = _gauss_legendre(spec.outer_nodes)
    tpos = t_line[active]
    if kind is FieldKind.BTBS:
        qmap = (w / (1.0 - w)) ** 2
        s_to = tpos[:, None] * qmap[None, :]
        jac = tpos[:, None] * (2.0 * w / (1.0 - w) ** 3)[None, :]
        kern = 2.0 * np.exp(-s_to**2 / (2.0 * tpos[:, None])) / np.sqrt(
            2.0 * math.pi * tpos[:, None]
        )
    else:
        qmap = w / (1.0 - w)
        tb = tpos[:, None] ** order.beta
        s_to = tb * qmap[None, :]
        jac = tb / (1.0 - w)[None, :] ** 2
        kern = inv_subordinator_density(
            order.beta, np.broadcast_to(tpos[:, None], s_to.shape), s_to,
            spec.tolerance * 0.01,
        )
    act_w = kern * jac * glw[None, :]

    pts, hw = _hermite_grid(spec.inner_nodes, d)
    c_count = off_var.size
    o_count = w.size
    chunk = max(1, min(t_chunk, (1 << 24) // max(1, o_count * c_count * q_count * pts.shape[0])))
    vals = np.empty((tpos.size, q_count))
    for lo in range(0, tpos.size, chunk):
        hi = min(lo + chunk, tpos.size)
        v = s_to[lo:hi, :, None] * off_var[None, None, :]  # (Tc, O, C)
        y = (
            x_points[None, None, None, :, None, :]
            + np.sqrt(2.0 * v)[..., None, None, None] * pts[None, None, None, None, :, :]
        )  # (Tc, O, C, Q, H, d)
        inner = np.asarray(f.value(y), dtype=float) @ hw  # (Tc, O, C, Q)
        vals[lo:hi] = np.einsum("tocq,to,c->tq", inner, act_w[lo:hi], off_wgt)
    out[active] = vals
    return out


def eval_field(
    functional: Functional,
    kind: FieldKind,
    f: InitialFunction,
    t_points: np.ndarray,
    x_points: np.ndarray,
    j: int = 1,
    order: FractionalOrder | None = None,
    spec: QuadratureSpec | None = None,
) -> SolutionField:
    """Evaluate a functional over a product lattice.

    ``t_points`` has shape (P, n) and ``x_points`` (Q, d).  The first outer
    axis that varies across rows is vectorized; remaining axes tensorize.
    """
    t_points = np.atleast_2d(np.asarray(t_points, dtype=float))
    x_points = np.atleast_2d(np.asarray(x_points, dtype=float))
    n = t_points.shape[1]
    spec = spec or QuadratureSpec.default_for(n)
    values = np.empty((t_points.shape[0], x_points.shape[0]))
    for p, t_row in enumerate(t_points):
        for qq, x_row in enumerate(x_points):
            values[p, qq] = eval_functional(
                functional, kind, f, t_row, x_row, j=j, order=order, spec=spec
            )
    return SolutionField(functional, kind, j, t_points, x_points, values)


def oracle_polynomial(
    functional: Functional,
    kind: FieldKind,
    f: InitialFunction,
    t,
    x,
    j: int = 1,
    order: FractionalOrder | None = None,
) -> float:
    """Closed-form value for the polynomial oracles.

    Writing E[f(N(x, v))] = sum_m c_m(x) v**m (c = [|x|^2, d] for the
    quadratic, [sum x^4, 6|x|^2, 3d] for the quartic), independence of the
    clocks factorizes each functional into products of single-clock moments:

        value = sum_m c_m(x) mu_j(m) prod_{i != j} mu_i(p + m).
    """
    t = tuple(float(v) for v in t)
    n = len(t)
    if not (1 <= j <= n):
        raise DomainError(f"active index j={j} outside 1..{n}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = x.size
    if f.name == "quadratic":
        coeffs = [float(np.sum(x**2)), float(d)]
    elif f.name == "quartic":
        coeffs = [float(np.sum(x**4)), 6.0 * float(np.sum(x**2)), 3.0 * float(d)]
    else:
        raise DomainError("polynomial oracle supports the quadratic and quartic entries")
    if kind is FieldKind.ISLTBS and order is None:
        raise DomainError("ISLTBS oracle needs a fractional order")
    power = weight_power(functional, order.nu if order else None)
    kind_key = "btbs" if kind is FieldKind.BTBS else "isltbs"

    total = 0.0
    for m, c in enumerate(coeffs):
        if c == 0.0:
            continue
        prod = inner_time_moment(kind_key, float(m), t[j - 1], order)
        for i, ti in enumerate(t, start=1):
            if i == j:
                continue
            prod *= inner_time_moment(kind_key, power + m, ti, order)
        total += c * prod
    return total


def _inner_moment_vec(kind: FieldKind, q: float, t_arr: np.ndarray,
                      order: FractionalOrder | None) -> np.ndarray:
    """Vectorized q-th inner-clock moment over an array of times."""
    t_arr = np.asarray(t_arr, dtype=float)
    if q == 0:
        return np.ones_like(t_arr)
    if kind is FieldKind.BTBS:
        return (2.0 * t_arr) ** (q / 2.0) * math.gamma((q + 1.0) / 2.0) / math.sqrt(math.pi)
    const = inner_time_moment("isltbs", q, 1.0, order)
    return t_arr ** (q * order.beta) * const


def oracle_line(
    functional: Functional,
    kind: FieldKind,
    f: InitialFunction,
    t_line,
    t_frozen,
    j: int,
    x_points,
    order: FractionalOrder | None = None,
) -> np.ndarray:
    """Vectorized ``oracle_polynomial`` on (active-axis line) x (x-points)."""
    t_line = np.asarray(t_line, dtype=float)
    x_points = np.atleast_2d(np.asarray(x_points, dtype=float))
    d = x_points.shape[1]
    if f.name == "quadratic":
        coeffs = [np.sum(x_points**2, axis=1), np.full(x_points.shape[0], float(d))]
    elif f.name == "quartic":
        coeffs = [
            np.sum(x_points**4, axis=1),
            6.0 * np.sum(x_points**2, axis=1),
            np.full(x_points.shape[0], 3.0 * d),
        ]
    else:
        raise DomainError("polynomial oracle supports the quadratic and quartic entries")
    power = weight_power(functional, order.nu if order else None)
    out = np.zeros((t_line.size, x_points.shape[0]))
    for m, c in enumerate(coeffs):
        active = _inner_moment_vec(kind, float(m), t_line, order)
        off = 1.0
        for ti in t_frozen:
            off *= inner_time_moment(
                "btbs" if kind is FieldKind.BTBS else "isltbs", power + m, float(ti), order
            )
        out += active[:, None] * c[None, :] * off
    return out


def startup_layers(
    functional: Functional,
    kind: FieldKind,
    f: InitialFunction,
    x_points,
    m_values,
    t_frozen=(),
    j: int = 1,
    order: FractionalOrder | None = None,
):
    """Analytic small-t_j layers of a functional: powers and coefficients.

    Expanding the inner Gaussian mean, E[f(N(x, v))] = sum_m Lap^m f(x)
    v**m / (2**m m!), and factorizing the independent clocks gives

        F(t, x) = sum_m Lap^m f(x) / (2**m m!) mu_j(m; t_j)
                  prod_{i != j} mu_i(m + p; t_i),

    so the t_j -> 0 layer at power m*beta (inverse clock) or m/2 (Brownian
    clock) has a fully analytic coefficient.  Returns (powers, coeffs) for
    the requested m values, suitable for the startup-corrected Caputo
    scheme.
    """
    x_points = np.atleast_2d(np.asarray(x_points, dtype=float))
    power = weight_power(functional, order.nu if order else None)
    kind_key = "btbs" if kind is FieldKind.BTBS else "isltbs"
    powers, coeffs = [], []
    for m in m_values:
        if m < 1:
            raise DomainError("layer indices start at 1 (m = 0 is the constant)")
        lap = np.asarray(f.laplacian_k(x_points, m), dtype=float)
        if kind is FieldKind.BTBS:
            exponent = m / 2.0
            const = 2.0 ** (m / 2.0) * math.gamma((m + 1.0) / 2.0) / math.sqrt(math.pi)
        else:
            exponent = m * order.beta
            const = inner_time_moment("isltbs", float(m), 1.0, order)
        off = 1.0
        for ti in t_frozen:
            off *= inner_time_moment(kind_key, power + m, float(ti), order)
        powers.append(exponent)
        coeffs.append(lap * const * off / (2.0**m * math.factorial(m)))
    return powers, coeffs


def v_boundary_coefficient(kind: FieldKind, t_i: float, order: FractionalOrder | None = None) -> float:
    """Per-axis boundary factor of the linear-weight functional at t_j = 0:

    sqrt(2 t_i / pi) for the Brownian clock, E(beta, 1) * t_i**beta for the
    inverse clock.
    """
    if kind is FieldKind.BTBS:
        return math.sqrt(2.0 * t_i / math.pi)
    if order is None:
        raise DomainError("inverse-clock boundary factor needs an order")
    return inner_time_moment("isltbs", 1.0, t_i, order)
