"""Continued fractions, best-approximation denominators, and resonance detection.

Everything in this module runs either on exact quadratic surds (pure integer
recursion) or at extended floating precision via ``mpmath``: double precision
corrupts the denominators ``q_k`` of the best rational approximations beyond
``k`` of roughly 35 for a generic frequency, which silently breaks every
scale schedule built on top of them.

Conventions
-----------
For ``alpha`` in (0, 1) the partial quotients are ``a_k = floor(1/alpha_{k-1})``
with ``alpha_0 = alpha``, and the convergents ``p_k / q_k`` satisfy::

    p_k = a_k p_{k-1} + p_{k-2},   p_0 = 0, p_{-1} = 1
    q_k = a_k q_{k-1} + q_{k-2},   q_0 = 1, q_{-1} = 0

``continued_fraction(alpha, depth)`` returns quotients ``a_1 .. a_depth`` and
convergents ``(p_0, q_0) .. (p_{depth-1}, q_{depth-1})``.

A phase ``theta`` has a *resonance* at the integer ``n`` (relative to
``alpha`` and a decay rate ``eps0``) when ``dist(2*theta - n*alpha, Z)`` is
both below ``exp(-eps0*|n|)`` and minimal among all ``|m| <= |n|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import gcd, isqrt
from typing import Iterable, Sequence, Union

import mpmath

from .errors import ConfigError, PrecisionExhausted

__all__ = [
    "QuadraticSurd",
    "ContinuedFraction",
    "ResonanceSet",
    "continued_fraction",
    "beta_estimate",
    "resonances",
    "circle_distance",
    "DEFAULT_PRECISION_BITS",
]

#: Default significand size in bits for all extended-precision arithmetic.
DEFAULT_PRECISION_BITS = 256


# ---------------------------------------------------------------------------
# exact quadratic surds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticSurd:
    """Exact real number ``(a + b*sqrt(d)) / q`` with integer entries.

    Supports the exact continued-fraction path: the Gauss map applied to a
    quadratic surd stays inside the field Q(sqrt(d)), so partial quotients
    come out of pure integer arithmetic with no precision ceiling.
    """

    a: int
    b: int
    d: int
    q: int

    def __post_init__(self) -> None:
        if self.q == 0:
            raise ConfigError("surd denominator must be nonzero")
        if self.d < 0:
            raise ConfigError("surd radicand must be nonnegative")
        if self.b != 0 and isqrt(self.d) ** 2 == self.d:
            raise ConfigError(
                "surd radicand is a perfect square; the value is rational"
            )
        if self.b == 0:
            raise ConfigError("surd with b = 0 is rational; use a decimal string")

    @classmethod
    def from_tag(cls, tag: Sequence[int]) -> "QuadraticSurd":
        """Build from the config-file list form.

        ``[a, d, q]`` means ``(a + sqrt(d)) / q`` and ``[a, b, d, q]``
        means ``(a + b*sqrt(d)) / q``.
        """
        entries = [int(x) for x in tag]
        if len(entries) == 3:
            a, d, q = entries
            return cls(a, 1, d, q)
        if len(entries) == 4:
            a, b, d, q = entries
            return cls(a, b, d, q)
        raise ConfigError(f"surd tag must have 3 or 4 integers, got {len(entries)}")

    @classmethod
    def golden(cls) -> "QuadraticSurd":
        """The inverse golden ratio ``(sqrt(5) - 1) / 2``."""
        return cls(-1, 1, 5, 2)

    def to_mpf(self, precision_bits: int = DEFAULT_PRECISION_BITS) -> mpmath.mpf:
        with mpmath.workprec(precision_bits):
            return mpmath.mpf(self.a / self.q) if self.b == 0 else (
                (self.a + self.b * mpmath.sqrt(self.d)) / self.q
            )

    def __float__(self) -> float:
        return float(self.to_mpf(80))

    # -- exact integer helpers -------------------------------------------

    def _normalized(self) -> tuple[int, int, int]:
        """Return ``(a, b, q)`` with ``q > 0`` (``d`` unchanged)."""
        a, b, q = self.a, self.b, self.q
        if q < 0:
            a, b, q = -a, -b, -q
        return a, b, q

    def floor(self) -> int:
        """Exact floor, using only integer arithmetic."""
        a, b, q = self._normalized()
        # floor(b*sqrt(d)) for irrational sqrt(d)
        if b >= 0:
            s = isqrt(b * b * self.d)
        else:
            s = -isqrt(b * b * self.d) - 1
        return (a + s) // q

    def _gauss_step(self) -> tuple[int, "QuadraticSurd"]:
        """One step of the Gauss map: return ``(floor(1/x), frac(1/x))``."""
        a, b, q = self._normalized()
        # 1/x = q (a - b sqrt(d)) / (a^2 - b^2 d)
        den = a * a - b * b * self.d
        na, nb, nq = q * a, -q * b, den
        g = gcd(gcd(abs(na), abs(nb)), abs(nq))
        if g > 1:
            na, nb, nq = na // g, nb // g, nq // g
        recip = QuadraticSurd(na, nb, self.d, nq)
        k = recip.floor()
        frac = QuadraticSurd(recip.a - k * recip.q, recip.b, recip.d, recip.q)
        return k, frac


AlphaLike = Union[float, str, mpmath.mpf, QuadraticSurd]


# ---------------------------------------------------------------------------
# continued fractions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContinuedFraction:
    """Partial quotients and convergents of a frequency ``alpha`` in (0, 1).

    ``alpha`` is retained at the working precision used for the expansion
    (an ``mpmath.mpf``); ``partial_quotients`` is ``[a_1, ..., a_depth]`` and
    ``convergents`` is ``[(p_0, q_0), ..., (p_{depth-1}, q_{depth-1})]``.
    """

    alpha: mpmath.mpf
    partial_quotients: tuple[int, ...]
    convergents: tuple[tuple[int, int], ...]
    precision_bits: int
    surd: QuadraticSurd | None = field(default=None, compare=False)

    @property
    def denominators(self) -> tuple[int, ...]:
        """``(q_0, q_1, ...)`` — best-approximation denominators."""
        return tuple(q for _, q in self.convergents)

    @property
    def numerators(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.convergents)

    def __len__(self) -> int:
        return len(self.partial_quotients)


def _coerce_alpha(
    alpha: AlphaLike, precision_bits: int
) -> tuple[mpmath.mpf, QuadraticSurd | None]:
    if isinstance(alpha, QuadraticSurd):
        return alpha.to_mpf(precision_bits), alpha
    with mpmath.workprec(precision_bits):
        if isinstance(alpha, str):
            value = mpmath.mpf(alpha.strip())
        elif isinstance(alpha, (int, float, mpmath.mpf)):
            value = mpmath.mpf(alpha)
        else:
            raise ConfigError(f"cannot interpret alpha of type {type(alpha).__name__}")
        return value, None


def continued_fraction(
    alpha: AlphaLike,
    depth: int,
    precision_bits: int = DEFAULT_PRECISION_BITS,
) -> ContinuedFraction:
    """Expand ``alpha`` in (0, 1) to ``depth`` partial quotients.

    Parameters
    ----------
    alpha:
        Frequency as a float, decimal string, ``mpmath.mpf``, or
        :class:`QuadraticSurd` (exact path, no precision ceiling).
    depth:
        Number of partial quotients requested (``>= 1``).
    precision_bits:
        Working significand size for the floating path; at least 128 bits
        are required to keep deep denominators trustworthy.

    Raises
    ------
    PrecisionExhausted
        If a Gauss-map remainder underflows ``2**(-precision_bits/2)``
        before ``depth`` quotients are produced: the input is rational (or
        indistinguishable from rational) at this working precision.
    ConfigError
        If ``alpha`` is outside (0, 1) or ``depth < 1``.
    """
    if depth < 1:
        raise ConfigError(f"depth must be >= 1, got {depth}")
    if precision_bits < 128:
        raise ConfigError(
            f"precision_bits must be >= 128 for stable denominators, got {precision_bits}"
        )
    value, surd = _coerce_alpha(alpha, precision_bits)
    if not (0 < value < 1):
        raise ConfigError(f"alpha must lie in the open interval (0, 1), got {value}")

    quotients: list[int] = []
    if surd is not None:
        x = surd
        for _ in range(depth):
            a_k, x = x._gauss_step()
            quotients.append(a_k)
    else:
        threshold = mpmath.mpf(2) ** (-(precision_bits // 2))
        with mpmath.workprec(precision_bits):
            x = value
            if x < threshold:
                raise PrecisionExhausted(
                    "alpha underflows the rational-detection threshold at k=1"
                )
            for k in range(1, depth + 1):
                y = 1 / x
                a_k = int(mpmath.floor(y))
                x = y - a_k
                quotients.append(a_k)
                if x < threshold:
                    raise PrecisionExhausted(
                        f"continued-fraction remainder underflow at k={k}: "
                        "alpha is rational (or precision too low) at "
                        f"{precision_bits}-bit precision"
                    )

    # convergents (p_k, q_k) for k = 0 .. depth-1
    p_prev, p_cur = 1, 0  # p_{-1}, p_0
    q_prev, q_cur = 0, 1  # q_{-1}, q_0
    convergents = [(p_cur, q_cur)]
    for a_k in quotients[: depth - 1]:
        p_prev, p_cur = p_cur, a_k * p_cur + p_prev
        q_prev, q_cur = q_cur, a_k * q_cur + q_prev
        convergents.append((p_cur, q_cur))

    return ContinuedFraction(
        alpha=value,
        partial_quotients=tuple(quotients),
        convergents=tuple(convergents),
        precision_bits=precision_bits,
        surd=surd,
    )


def beta_estimate(cf: ContinuedFraction) -> float:
    """Finite-depth proxy for the exponential approximation rate beta(alpha).

    Returns ``max_k ln(q_{k+1}) / q_k`` over the computed convergents.  The
    true beta is a limsup and not computable; this proxy upper-bounds the
    behaviour seen up to the expansion depth and is reported together with
    that depth.  Nonnegative, and close to zero for bounded-type frequencies.
    """
    qs = cf.denominators
    if len(qs) < 3:
        raise ConfigError(
            f"beta estimate needs at least 3 convergents, got {len(qs)}"
        )
    return max(math.log(qs[k + 1]) / qs[k] for k in range(len(qs) - 1))


# ---------------------------------------------------------------------------
# resonances
# ---------------------------------------------------------------------------


def circle_distance(x: Union[float, mpmath.mpf]) -> Union[float, mpmath.mpf]:
    """Distance from ``x`` to the nearest integer (works for mpf and float)."""
    if isinstance(x, mpmath.mpf):
        frac = x - mpmath.floor(x)
        return min(frac, 1 - frac)
    frac = x - math.floor(x)
    return min(frac, 1.0 - frac)


@dataclass(frozen=True)
class ResonanceSet:
    """All resonances of a phase up to a horizon.

    ``resonances[l]`` is the integer ``n_l``; ``distances[l]`` the value of
    ``dist(2*theta - n_l*alpha, Z)``.  Ordered by ``|n|``, ties broken by
    smaller distance first, then positive ``n`` first.  The horizon ``K``
    bounds the search: absence of resonances beyond ``K`` is *not* certified.
    """

    theta: float
    eps0: float
    horizon: int
    resonances: tuple[int, ...]
    distances: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.resonances)

    def __contains__(self, n: int) -> bool:
        return n in self.resonances


def resonances(
    theta: Union[float, str, mpmath.mpf],
    cf: ContinuedFraction,
    eps0: float,
    horizon: int,
) -> ResonanceSet:
    """Find every resonance ``|n| <= horizon`` of the phase ``theta``.

    ``n`` qualifies when ``dist(2 theta - n alpha, Z) <= exp(-eps0 |n|)``
    and no ``|m| <= |n|`` achieves a strictly smaller distance.
    """
    if eps0 <= 0:
        raise ConfigError(f"eps0 must be positive, got {eps0}")
    if horizon < 1:
        raise ConfigError(f"horizon must be >= 1, got {horizon}")

    with mpmath.workprec(cf.precision_bits):
        alpha = cf.alpha
        th = mpmath.mpf(theta.strip()) if isinstance(theta, str) else mpmath.mpf(theta)
        two_theta = 2 * th
        eps = mpmath.mpf(eps0)

        found: list[tuple[int, mpmath.mpf]] = []
        best_so_far = None  # min distance over all |m| < current level
        for level in range(horizon + 1):
            candidates = [level] if level == 0 else [level, -level]
            dists = {n: circle_distance(two_theta - n * alpha) for n in candidates}
            level_min = min(dists.values())
            for n in candidates:
                dist_n = dists[n]
                minimal = (best_so_far is None or dist_n <= best_so_far) and (
                    dist_n <= level_min
                )
                if minimal and dist_n <= mpmath.exp(-eps * abs(n)):
                    found.append((n, dist_n))
            best_so_far = (
                level_min if best_so_far is None else min(best_so_far, level_min)
            )

        found.sort(key=lambda item: (abs(item[0]), item[1], 0 if item[0] > 0 else 1))
        return ResonanceSet(
            theta=float(th),
            eps0=float(eps0),
            horizon=horizon,
            resonances=tuple(n for n, _ in found),
            distances=tuple(float(d) for _, d in found),
        )


def denominator_schedule(cf: ContinuedFraction, n_min: int, n_max: int) -> list[int]:
    """Best-approximation denominators inside ``[n_min, n_max]``.

    Convenience for scale schedules: windows marched through denominators
    inherit the Diophantine spacing guarantees of the convergents.
    """
    return [q for q in cf.denominators if n_min <= q <= n_max]
