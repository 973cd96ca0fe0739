"""Catalog of admissible initial functions with analytic iterated Laplacians.

Points are arrays of shape (..., d); values come back with shape (...).
Scalars are accepted for d = 1.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import hermite_e

from .errors import DomainError

__all__ = [
    "Growth",
    "InitialFunction",
    "bump_f0",
    "bump_laplacian_d2",
    "catalog",
    "get_initial_function",
]


class Growth(enum.Enum):
    BOUNDED = "bounded"
    POLYNOMIAL = "polynomial"


@dataclass(frozen=True)
class InitialFunction:
    name: str
    d: int
    holder_alpha: float
    growth: Growth
    max_k: int
    value_fn: Callable = field(repr=False)
    laplacian_fn: Callable = field(repr=False)  # (points, k) -> values

    def _points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        if x.shape[-1] != self.d:
            raise DomainError(f"{self.name} expects points in R^{self.d}")
        return x

    def value(self, x):
        out = self.value_fn(self._points(x))
        return float(out) if np.ndim(out) == 0 else out

    def laplacian_k(self, x, k: int):
        if not (1 <= k <= self.max_k):
            raise DomainError(f"{self.name} provides Laplacians up to order {self.max_k}")
        out = self.laplacian_fn(self._points(x), k)
        return float(out) if np.ndim(out) == 0 else out


def bump_f0(C: float, alpha: float, x) -> float | np.ndarray:
    """Compactly supported bump: C * exp(1 / (|x|**(2*alpha) - 1)) inside the
    unit ball, 0 outside; continuous across |x| = 1."""
    if not (0.0 < alpha <= 1.0):
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    x = np.asarray(x, dtype=float)
    r2 = x**2 if x.ndim == 0 else np.sum(x**2, axis=-1)
    inside = r2 < 1.0
    with np.errstate(divide="ignore", over="ignore"):
        expo = 1.0 / (np.where(inside, r2, 0.0) ** alpha - 1.0)
        vals = np.where(inside, C * np.exp(expo), 0.0)
    return float(vals) if vals.ndim == 0 else vals


def bump_laplacian_d2(C: float, x, at_boundary_limit: bool = False) -> float | np.ndarray:
    """Laplacian of the alpha=1 bump in two dimensions:

    4C (|x|^4 + |x|^2 - 1) exp(1/(|x|^2 - 1)) / (|x|^2 - 1)^4  for |x| < 1,
    0 for |x| > 1.  |x| = 1 is rejected unless ``at_boundary_limit`` is set,
    in which case the (vanishing) limit is returned.
    """
    x = np.asarray(x, dtype=float)
    r2 = np.asarray(np.sum(x**2, axis=-1))
    on_edge = np.abs(r2 - 1.0) < 1e-14
    if np.any(on_edge):
        if not at_boundary_limit:
            raise DomainError("the displayed formula is singular at |x| = 1; the limit is 0")
    inside = r2 < 1.0
    w = np.where(inside, r2 - 1.0, -1.0)
    with np.errstate(divide="ignore", over="ignore"):
        vals = np.where(
            inside & ~on_edge,
            4.0 * C * (r2**2 + r2 - 1.0) * np.exp(1.0 / w) / w**4,
            0.0,
        )
    return float(vals) if vals.ndim == 0 else vals


def _quadratic(d: int) -> InitialFunction:
    def val(x):
        return np.sum(x**2, axis=-1)

    def lap(x, k):
        base = np.zeros(x.shape[:-1])
        return base + 2.0 * d if k == 1 else base

    return InitialFunction("quadratic", d, 1.0, Growth.POLYNOMIAL, 6, val, lap)


def _quartic(d: int) -> InitialFunction:
    def val(x):
        return np.sum(x**4, axis=-1)

    def lap(x, k):
        if k == 1:
            return 12.0 * np.sum(x**2, axis=-1)
        if k == 2:
            return np.full(x.shape[:-1], 24.0 * d)
        return np.zeros(x.shape[:-1])

    return InitialFunction("quartic", d, 1.0, Growth.POLYNOMIAL, 6, val, lap)


def _hermite_even(y: np.ndarray, m: int) -> np.ndarray:
    if m == 0:
        return np.ones_like(y)
    coeffs = np.zeros(2 * m + 1)
    coeffs[2 * m] = 1.0
    return hermite_e.hermeval(y, coeffs)


def _gaussian(d: int) -> InitialFunction:
    # d^(2m)/dy^(2m) e^{-y^2/2} = He_{2m}(y) e^{-y^2/2}; the k-Laplacian is the
    # multinomial sum over per-axis second-derivative counts.
    def val(x):
        return np.exp(-0.5 * np.sum(x**2, axis=-1))

    def lap(x, k):
        out = np.zeros(x.shape[:-1])
        for combo in itertools.product(range(k + 1), repeat=d):
            if sum(combo) != k:
                continue
            coeff = math.factorial(k)
            prod = np.ones(x.shape[:-1])
            for axis, m in enumerate(combo):
                coeff //= math.factorial(m)
                prod = prod * _hermite_even(x[..., axis], m)
            out += coeff * prod
        return out * val(x)

    return InitialFunction("gaussian", d, 1.0, Growth.BOUNDED, 8, val, lap)


def _bump(d: int, alpha: float, scale: float) -> InitialFunction:
    def val(x):
        return bump_f0(scale, alpha, x)

    if d == 2 and alpha == 1.0:
        def lap(x, k):
            if k != 1:
                raise DomainError("bump Laplacian is provided analytically only at k = 1")
            return bump_laplacian_d2(scale, x, at_boundary_limit=True)

        max_k = 1
    else:
        def lap(x, k):
            raise DomainError("bump Laplacians are only available for d = 2, alpha = 1")

        max_k = 0
    return InitialFunction("bump", d, alpha, Growth.BOUNDED, max_k, val, lap)


def catalog(d: int = 1, alpha: float = 1.0, bump_scale: float = 1.0,
            polynomial_growth: bool = False) -> list[InitialFunction]:
    """Shipped initial functions.

    The unbounded polynomial oracles are only included when
    ``polynomial_growth`` is set; callers record that they rely on the
    polynomial-growth relaxation of the boundedness hypothesis.
    """
    entries = [_gaussian(d), _bump(d, alpha, bump_scale)]
    if polynomial_growth:
        entries = [_quadratic(d), _quartic(d)] + entries
    return entries


def get_initial_function(name: str, d: int = 1, alpha: float = 1.0,
                         bump_scale: float = 1.0,
                         polynomial_growth: bool = False) -> InitialFunction:
    if name in ("quadratic", "quartic") and not polynomial_growth:
        raise DomainError(
            f"{name!r} is unbounded; pass polynomial_growth=True to opt into the relaxation"
        )
    for f in catalog(d=d, alpha=alpha, bump_scale=bump_scale,
                     polynomial_growth=polynomial_growth):
        if f.name == name:
            return f
    raise DomainError(f"unknown initial function {name!r}")
