"""Closed-form outage diversity / SNR-exponent formulas for INR-ARQ.

Floor and ceiling arguments are evaluated in exact rational arithmetic:
the formulas are staircase functions whose jumps sit exactly where naive
floating-point floors misfire.  Rates supplied as floats are converted
exactly to rationals and guarded with a 1e-9 snap toward integers of the
floor/ceiling argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

EPS_GUARD = Fraction(1, 10 ** 9)

EXACT = "exact"
BOUNDARY_EXCLUDED = "boundary-excluded"

SCHEMES = ("multi_bit", "one_bit", "constant_power", "random_coding")


def as_rate(rate) -> Fraction:
    """Convert a rate given as Fraction, int, float or ``"p/q"`` string."""
    if isinstance(rate, Fraction):
        return rate
    if isinstance(rate, int):
        return Fraction(rate)
    if isinstance(rate, str):
        return Fraction(rate.strip())
    if isinstance(rate, float):
        return Fraction(rate)  # exact binary expansion; guard applied at floors
    raise ValueError(f"cannot interpret rate {rate!r}")


def _snap(x: Fraction) -> Fraction:
    """Snap x to the nearest integer when within the float-input guard."""
    nearest = Fraction(round(x))
    if abs(x - nearest) < EPS_GUARD:
        return nearest
    return x


@dataclass(frozen=True)
class DiversityQuery:
    """One ARQ scenario for the closed-form tradeoff formulas."""

    n_t: int
    n_r: int
    b: int
    m: int
    rate: Fraction
    delay: int = 1  # L
    feedback_levels: int = 2  # K
    guard: bool = False  # True when rate came from a float

    def __post_init__(self):
        object.__setattr__(self, "rate", as_rate(self.rate))
        for nm in ("n_t", "n_r", "b", "m", "delay"):
            if getattr(self, nm) < 1:
                raise ValueError(f"{nm} must be a positive integer")
        if self.feedback_levels < 2:
            raise ValueError("feedback_levels must be >= 2")
        if not (0 < self.rate < self.m * self.n_t):
            raise ValueError(
                f"rate must lie in (0, {self.m * self.n_t}), got {self.rate}"
            )

    @classmethod
    def make(cls, n_t, n_r, b, m, rate, delay=1, feedback_levels=2):
        """Build a query, marking float rates for the epsilon guard."""
        return cls(
            n_t=n_t, n_r=n_r, b=b, m=m,
            rate=as_rate(rate), delay=delay, feedback_levels=feedback_levels,
            guard=isinstance(rate, float),
        )

    def _guarded(self, x: Fraction) -> Fraction:
        return _snap(x) if self.guard else x

    @property
    def is_integer_case(self) -> bool:
        return self._guarded(self.b * self.rate / self.m).denominator == 1

    @property
    def min_levels(self) -> int:
        """Smallest K for which the multi-bit tradeoff theorem applies."""
        return int(math.ceil(self._guarded(self.b * self.rate / self.m))) + 1

    def _validity(self) -> str:
        return BOUNDARY_EXCLUDED if self.is_integer_case else EXACT


@dataclass(frozen=True)
class DiversityValue:
    value: int
    validity: str = EXACT

    def __int__(self):
        return self.value


def d_dagger(q: DiversityQuery) -> DiversityValue:
    """Outage diversity of one fixed-rate round: N_r(1 + floor(B(N_t - R/M)))."""
    x = q._guarded(q.b * (q.n_t - q.rate / q.m))
    return DiversityValue(q.n_r * (1 + math.floor(x)))


def d_ddagger(q: DiversityQuery) -> DiversityValue:
    """Random-coding SNR-exponent of one round: N_r * ceil(B(N_t - R/M))."""
    x = q._guarded(q.b * (q.n_t - q.rate / q.m))
    return DiversityValue(q.n_r * math.ceil(x))


def _check_levels(q: DiversityQuery):
    if q.feedback_levels < q.min_levels:
        raise ValueError(
            f"feedback_levels={q.feedback_levels} below the {q.min_levels} "
            f"required for the multi-bit tradeoff at this rate; use "
            f"one_bit_diversity for K=2 or increase K"
        )


def _geometric_tradeoff(q: DiversityQuery, rnd: int, base: int) -> DiversityValue:
    growth = 1 + q.b * q.n_t * q.n_r
    return DiversityValue(
        growth ** (rnd - 1) * (base + 1) - 1, validity=q._validity()
    )


def multi_bit_diversity(q: DiversityQuery, rnd: int) -> DiversityValue:
    """Optimal rate-diversity-delay tradeoff with K >= ceil(BR/M)+1 levels.

    d_l(R) = (1 + B*N_t*N_r)^(l-1) * (d_dagger(R) + 1) - 1.  Flagged
    boundary-excluded when BR/M is an integer (the theorem excludes it).
    """
    _check_round(q, rnd)
    _check_levels(q)
    return _geometric_tradeoff(q, rnd, d_dagger(q).value)


def random_coding_exponent(q: DiversityQuery, rnd: int) -> DiversityValue:
    """Achievable SNR-exponent with random codes: same shape on d_ddagger."""
    _check_round(q, rnd)
    _check_levels(q)
    return _geometric_tradeoff(q, rnd, d_ddagger(q).value)


def one_bit_diversity(q: DiversityQuery, rnd: int) -> DiversityValue:
    """Optimal tradeoff of classical ACK/NACK (K=2) ARQ, by recursion.

    d1 = d_dagger; dl = B*N_t*N_r*(l-1 + sum_{j<=l-2} dj) + (1+d_{l-1})*d1.
    """
    _check_round(q, rnd)
    d1 = d_dagger(q).value
    vals = [d1]
    bnn = q.b * q.n_t * q.n_r
    for ell in range(2, rnd + 1):
        prefix = sum(vals[: ell - 2])
        vals.append(bnn * (ell - 1 + prefix) + (1 + vals[-1]) * d1)
    return DiversityValue(vals[rnd - 1], validity=q._validity())


def constant_power_diversity(q: DiversityQuery) -> DiversityValue:
    """Optimal diversity with constant per-round power and delay L.

    Equivalent to one shot at rate R/L over B*L fading blocks:
    N_r(1 + floor(B*L*(N_t - R/(L*M)))).
    """
    x = q._guarded(q.b * q.delay * (q.n_t - q.rate / (q.delay * q.m)))
    return DiversityValue(q.n_r * (1 + math.floor(x)), validity=q._validity())


def _check_round(q: DiversityQuery, rnd: int):
    if not 1 <= rnd <= q.delay:
        raise ValueError(f"round {rnd} outside 1..L={q.delay}")


def boundary_rates(q_template: DiversityQuery):
    """Rates in (0, M*N_t) where BR/M is an integer (staircase jumps)."""
    step = Fraction(q_template.m, q_template.b)
    out = []
    r = step
    while r < q_template.m * q_template.n_t:
        out.append(r)
        r += step
    return out


def tradeoff_curve(q_template: DiversityQuery, rate_grid, scheme: str, rnd: int):
    """Evaluate one tradeoff scheme over a rate grid.

    Returns ``(points, discontinuities)`` where points is a list of
    ``(rate, DiversityValue)`` and discontinuities the exact rates where
    the staircase jumps.  For the multi-bit and random-coding schemes the
    feedback-level count grows with rate as the theorems require, so the
    template's K acts as a floor, not a cap.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    points = []
    for rate in rate_grid:
        frac = as_rate(rate)
        q = DiversityQuery(
            n_t=q_template.n_t, n_r=q_template.n_r, b=q_template.b,
            m=q_template.m, rate=frac, delay=q_template.delay,
            feedback_levels=q_template.feedback_levels,
            guard=isinstance(rate, float),
        )
        if scheme == "constant_power":
            val = constant_power_diversity(q)
        elif scheme == "one_bit":
            val = one_bit_diversity(q, rnd)
        else:
            if q.feedback_levels < q.min_levels:
                q = DiversityQuery(
                    n_t=q.n_t, n_r=q.n_r, b=q.b, m=q.m, rate=q.rate,
                    delay=q.delay, feedback_levels=q.min_levels, guard=q.guard,
                )
            fn = multi_bit_diversity if scheme == "multi_bit" else random_coding_exponent
            val = fn(q, rnd)
        points.append((frac, val))
    return points, boundary_rates(q_template)
