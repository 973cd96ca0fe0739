"""Seeded sampling of subordinators, sheet values, and Monte-Carlo functionals.

All randomness flows through counter-based Philox streams keyed on
(seed, stream_id), so identical keys reproduce identical draws bit for bit
regardless of what ran before.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "RngStream",
    "FieldKind",
    "Weight",
    "FieldSample",
    "sample_stable_L1",
    "sample_inverse_subordinator",
    "sample_field",
    "sample_sheet_on_grid",
    "mc_expectation",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed & _MASK64, self.stream_id & _MASK64], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, k: int) -> "RngStream":
        """Derived stream for shard k; distinct k gives independent streams."""
        return RngStream(self.seed, (self.stream_id * 1_000_003 + k + 1) & _MASK64)


def _as_generator(stream) -> np.random.Generator:
    if isinstance(stream, np.random.Generator):
        return stream
    if isinstance(stream, RngStream):
        return stream.generator()
    raise DomainError(f"expected RngStream or Generator, got {type(stream)!r}")


class FieldKind(enum.Enum):
    BTBS = "btbs"
    ISLTBS = "isltbs"


class Weight(enum.Enum):
    """Product weight over the off-axis inner times, by power."""

    NONE = 0
    PROD_S = 1
    PROD_S_SQ = 2
    PROD_S_NU = -1  # power supplied separately


@dataclass(frozen=True)
class FieldSample:
    kind: FieldKind
    t: tuple
    x: np.ndarray
    inner_times: np.ndarray
    value: np.ndarray


def sample_stable_L1(beta: float, stream, size=None):
    """Draw the standard subordinator at time 1 via Kanter's representation.

    With U uniform and E exponential,
      A(U) = sin((1-b) pi U) * sin(b pi U)**(b/(1-b)) / sin(pi U)**(1/(1-b)),
      L(1) = (A(U)/E)**((1-b)/b).
    """
    if not (0.0 < beta < 1.0):
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    rng = _as_generator(stream)
    u = rng.uniform(size=size)
    e = rng.standard_exponential(size=size)
    u = np.clip(u, 1e-16, 1.0 - 1e-16)
    e = np.maximum(e, 1e-300)
    a = (
        np.sin((1.0 - beta) * np.pi * u)
        * np.sin(beta * np.pi * u) ** (beta / (1.0 - beta))
        / np.sin(np.pi * u) ** (1.0 / (1.0 - beta))
    )
    out = (a / e) ** ((1.0 - beta) / beta)
    return float(out) if size is None else out


def sample_inverse_subordinator(beta: float, t: float, stream, size=None):
    """Draw the inverse subordinator at time t as t**beta * L(1)**(-beta)."""
    if t < 0:
        raise DomainError(f"time must be nonnegative, got {t}")
    if t == 0.0:
        return 0.0 if size is None else np.zeros(size)
    levy = sample_stable_L1(beta, stream, size)
    return t**beta * levy ** (-beta)


def _inner_times_block(kind, t, beta, rng, m: int) -> np.ndarray:
    """(m, n) inner-time draws.  Axis i always consumes the same number of
    draws, so the stream position does not depend on which t_i vanish."""
    n = len(t)
    out = np.empty((m, n))
    for i, ti in enumerate(t):
        if kind is FieldKind.BTBS:
            out[:, i] = np.abs(rng.standard_normal(size=m)) * math.sqrt(ti)
        else:
            levy = sample_stable_L1(beta, rng, size=m)
            out[:, i] = 0.0 if ti == 0.0 else ti**beta * levy ** (-beta)
    return out


def sample_field(kind: FieldKind, t, x, beta: float | None, stream) -> FieldSample:
    """One draw of the subordinated sheet at (t, x).

    Conditionally on the realized inner times s, the value is Gaussian with
    mean x and variance prod(s) per coordinate; if any t_i = 0 the product
    vanishes and the value equals x exactly.
    """
    t = tuple(float(v) for v in t)
    if any(v < 0 for v in t):
        raise DomainError("time parameters must be nonnegative")
    if kind is FieldKind.ISLTBS and beta is None:
        raise DomainError("ISLTBS sampling requires beta")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    rng = _as_generator(stream)
    inner = _inner_times_block(kind, t, beta, rng, 1)[0]
    variance = float(np.prod(inner))
    z = rng.standard_normal(size=x.size)
    value = x + math.sqrt(variance) * z
    return FieldSample(kind=kind, t=t, x=x, inner_times=inner, value=value)


def sample_sheet_on_grid(t_axes, d: int, stream) -> np.ndarray:
    """Demo sampler: a Brownian sheet on the rectangular grid prod(t_axes).

    Returns an array of shape (len(t_1), ..., len(t_n), d) built from cell
    increments with variance equal to the cell volume, cumulatively summed
    along every axis.  Grid axes must start at 0.
    """
    rng = _as_generator(stream)
    axes = [np.asarray(a, dtype=float) for a in t_axes]
    for a in axes:
        if a[0] != 0.0 or np.any(np.diff(a) <= 0):
            raise DomainError("each axis must start at 0 and increase")
    steps = [np.diff(a) for a in axes]
    shape = tuple(len(s) for s in steps) + (d,)
    cell_vol = np.ones(shape[:-1])
    for ax, s in enumerate(steps):
        cell_vol *= s.reshape([-1 if i == ax else 1 for i in range(len(steps))])
    incr = rng.standard_normal(size=shape) * np.sqrt(cell_vol)[..., None]
    for ax in range(len(steps)):
        incr = np.cumsum(incr, axis=ax)
    out = np.zeros(tuple(len(a) for a in axes) + (d,))
    out[(slice(1, None),) * len(axes)] = incr
    return out


_MC_CHUNK = 1 << 17  # fixed chunking keeps the draw order reproducible


def mc_expectation(
    kind: FieldKind,
    f,
    weight: Weight,
    j: int,
    t,
    x,
    samples: int,
    stream,
    beta: float | None = None,
    nu: int | None = None,
) -> tuple[float, float]:
    """Monte-Carlo estimate of E[ prod_{i != j} s_i**p * f(sheet value) ].

    The weight power p is 0/1/2 for NONE/PROD_S/PROD_S_SQ and nu for
    PROD_S_NU.  Returns (estimate, standard error).
    """
    if samples < 1:
        raise DomainError("samples must be >= 1")
    if weight is Weight.PROD_S_NU:
        if nu is None:
            raise DomainError("PROD_S_NU weight needs nu")
        power = float(nu)
    else:
        power = float(weight.value)
    t = tuple(float(v) for v in t)
    n = len(t)
    if not (1 <= j <= n):
        raise DomainError(f"active index j={j} outside 1..{n}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = x.size
    rng = _as_generator(stream)

    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        m = min(_MC_CHUNK, samples - done)
        inner = _inner_times_block(kind, t, beta, rng, m)
        if power == 0.0:
            wgt = np.ones(m)
        else:
            off = np.concatenate([inner[:, : j - 1], inner[:, j:]], axis=1)
            wgt = np.prod(off**power, axis=1) if off.shape[1] else np.ones(m)
        variance = np.prod(inner, axis=1)
        z = rng.standard_normal(size=(m, d))
        y = x + np.sqrt(variance)[:, None] * z
        vals = wgt * np.asarray(f.value(y), dtype=float)
        total += float(np.sum(vals))
        total_sq += float(np.sum(vals * vals))
        done += m
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    stderr = math.sqrt(var / samples)
    return mean, stderr
