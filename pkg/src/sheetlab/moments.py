"""Moment constants of the inverse subordinator and the time-profile factors
entering the high-order system drift and boundary rows."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .densities import StableMethod, stable_g
from .errors import DomainError
from .fractional import FractionalOrder
from .samplers import RngStream, sample_stable_L1

__all__ = [
    "MomentRoute",
    "MomentConstant",
    "ProfileKind",
    "TimeProfile",
    "moment_E",
    "abs_normal_moment",
    "inner_time_moment",
    "profile_M",
    "profile_M_dtj",
    "profile_N",
]


class MomentRoute(enum.Enum):
    CLOSED_FORM = "closed-form"
    QUADRATURE = "quadrature"
    MONTE_CARLO = "monte-carlo"


@dataclass(frozen=True)
class MomentConstant:
    beta: float
    gamma: float
    value: float
    route: MomentRoute
    stderr: float | None = None

    def __post_init__(self):
        if self.value <= 0:
            raise DomainError("moment constants are positive")


_QUAD_SPLIT = 0.05  # below this the integrand is dominated by the Talbot-route density


def moment_E(
    order: FractionalOrder,
    gamma: float,
    route: MomentRoute = MomentRoute.CLOSED_FORM,
    samples: int = 10**6,
    stream: RngStream | None = None,
) -> MomentConstant:
    """E[Lambda(1)**gamma] = integral of x**(-gamma*beta) * g_beta(x), gamma > -1.

    CLOSED_FORM needs beta = 1/nu and integer gamma = k >= 1, where the value
    is nu * (k-1)! / Gamma(k/nu).  The other routes work for any admissible
    gamma and must agree with it where it applies.
    """
    if gamma <= -1.0:
        raise DomainError(f"gamma must exceed -1, got {gamma}")
    beta = order.beta

    if route is MomentRoute.CLOSED_FORM:
        k = int(round(gamma))
        if order.nu is None or abs(gamma - k) > 1e-12 or k < 1:
            raise DomainError(
                "closed form requires beta = 1/nu and a positive integer gamma"
            )
        value = order.nu * math.factorial(k - 1) / math.gamma(k / order.nu)
        return MomentConstant(beta=beta, gamma=gamma, value=value, route=route)

    if route is MomentRoute.QUADRATURE:
        expo = -gamma * beta

        def integrand(x):
            return x**expo * stable_g(beta, x, StableMethod.AUTO, 1e-12)

        left, _ = quad(integrand, 0.0, _QUAD_SPLIT, epsabs=1e-12, epsrel=1e-10, limit=200)
        right, _ = quad(integrand, _QUAD_SPLIT, np.inf, epsabs=1e-12, epsrel=1e-10, limit=400)
        return MomentConstant(beta=beta, gamma=gamma, value=left + right, route=route)

    if route is MomentRoute.MONTE_CARLO:
        src = stream if stream is not None else RngStream(0)
        rng = src.generator() if isinstance(src, RngStream) else src
        draws = sample_stable_L1(beta, rng, size=samples)
        vals = draws ** (-gamma * beta)
        mean = float(np.mean(vals))
        stderr = float(np.std(vals) / math.sqrt(samples))
        return MomentConstant(beta=beta, gamma=gamma, value=mean, route=route, stderr=stderr)

    raise DomainError(f"unknown route {route!r}")


def abs_normal_moment(q: float, t: float) -> float:
    """E|B(t)|**q for a standard BM: (2t)**(q/2) * Gamma((q+1)/2) / sqrt(pi)."""
    if t < 0:
        raise DomainError("time must be nonnegative")
    if q == 0:
        return 1.0
    if t == 0.0:
        return 0.0
    return (2.0 * t) ** (q / 2.0) * math.gamma((q + 1.0) / 2.0) / math.sqrt(math.pi)


def inner_time_moment(kind: str, q: float, t: float, order: FractionalOrder | None = None) -> float:
    """q-th moment of one inner clock at time t.

    kind 'btbs': E|B(t)|**q.  kind 'isltbs': E[Lambda(t)**q] = t**(q*beta) * E(beta, q),
    using the closed form when it applies and quadrature otherwise.
    """
    if q == 0:
        return 1.0
    if t == 0.0:
        return 0.0
    if kind == "btbs":
        return abs_normal_moment(q, t)
    if kind == "isltbs":
        if order is None:
            raise DomainError("isltbs moments need a fractional order")
        k = int(round(q))
        if order.nu is not None and abs(q - k) < 1e-12 and k >= 1:
            const = moment_E(order, float(k), MomentRoute.CLOSED_FORM).value
        else:
            const = moment_E(order, q, MomentRoute.QUADRATURE).value
        return t ** (q * order.beta) * const
    raise DomainError(f"unknown kind {kind!r}")


class ProfileKind(enum.Enum):
    M_KAPPA = "m-kappa"
    N_NU = "n-nu"


@dataclass(frozen=True)
class TimeProfile:
    kind: ProfileKind
    j: int
    order_index: int  # kappa for M, nu for N
    t: tuple
    value: float

    def __post_init__(self):
        if self.value < 0:
            raise DomainError("time profiles are nonnegative")


def _check_t(t, j):
    t = tuple(float(v) for v in t)
    if any(v < 0 for v in t):
        raise DomainError("time parameters must be nonnegative")
    if not (1 <= j <= len(t)):
        raise DomainError(f"active index j={j} outside 1..{len(t)}")
    return t


def profile_M(order: FractionalOrder, j: int, kappa: int, t) -> TimeProfile:
    """M_kappa over all n axes: E(1/nu, kappa)**n / kappa! * prod_i t_i**(kappa/nu)."""
    nu = order.nu
    if nu is None:
        raise DomainError("profile_M needs beta of the form 1/nu")
    if not (1 <= kappa <= nu - 1):
        raise DomainError(f"kappa must lie in 1..{nu - 1}, got {kappa}")
    t = _check_t(t, j)
    n = len(t)
    const = moment_E(order, float(kappa), MomentRoute.CLOSED_FORM).value
    value = const**n / math.factorial(kappa) * float(np.prod([ti ** (kappa / nu) for ti in t]))
    return TimeProfile(kind=ProfileKind.M_KAPPA, j=j, order_index=kappa, t=t, value=value)


def profile_M_dtj(order: FractionalOrder, j: int, kappa: int, t) -> float:
    """Analytic d/dt_j of M_kappa (power rule); needs t_j > 0."""
    t = _check_t(t, j)
    if t[j - 1] <= 0:
        raise DomainError("the drift derivative needs t_j > 0")
    nu = order.nu
    base = profile_M(order, j, kappa, t).value
    return base * (kappa / nu) / t[j - 1]


def profile_N(order: FractionalOrder, j: int, t) -> TimeProfile:
    """N_nu off the active axis: E(1/nu, nu)**(n-1) * prod_{i != j} t_i (1 when n=1)."""
    nu = order.nu
    if nu is None:
        raise DomainError("profile_N needs beta of the form 1/nu")
    t = _check_t(t, j)
    n = len(t)
    if n == 1:
        value = 1.0
    else:
        const = moment_E(order, float(nu), MomentRoute.CLOSED_FORM).value
        off = [ti for i, ti in enumerate(t, start=1) if i != j]
        value = const ** (n - 1) * float(np.prod(off))
    return TimeProfile(kind=ProfileKind.N_NU, j=j, order_index=nu, t=t, value=value)
