"""Certified enclosures of the equilibrium reward and its gradient.

With ``alpha = w(r) / w(e)`` and ``alpha' = (w'(r) - alpha w'(e)) / w(e)``,
the radii from :mod:`truncgrad.cycle_error_bounds` give intervals for all
four cycle quantities.  :func:`alpha_prime_interval` combines them with the
sign-dependent case splits (each case chooses the extreme end of the
denominator interval that makes the bound valid).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .chain_model import (
    DriftReport,
    ParametricChain,
    build_blocks,
    checkable_region,
    verify_drift,
)
from .cycle_error_bounds import ErrorRadii, error_radii
from .cycle_values import CycleQuantities, cycle_quantities, factorize
from .errors import UncertifiedDrift


@dataclass(frozen=True)
class Interval:
    """Closed interval with outward-rounded arithmetic."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @staticmethod
    def _out(lo: float, hi: float) -> "Interval":
        return Interval(math.nextafter(lo, -math.inf), math.nextafter(hi, math.inf))

    @classmethod
    def point(cls, x: float) -> "Interval":
        return cls(x, x)

    @classmethod
    def radius(cls, centre: float, r: float) -> "Interval":
        return cls._out(centre - r, centre + r)

    def __add__(self, other):
        other = _as_interval(other)
        return Interval._out(self.lo + other.lo, self.hi + other.hi)

    def __sub__(self, other):
        other = _as_interval(other)
        return Interval._out(self.lo - other.hi, self.hi - other.lo)

    def __mul__(self, other):
        other = _as_interval(other)
        p = (self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi)
        return Interval._out(min(p), max(p))

    def __truediv__(self, other):
        other = _as_interval(other)
        if other.lo <= 0.0 <= other.hi:
            raise ZeroDivisionError("denominator interval contains zero")
        q = (self.lo / other.lo, self.lo / other.hi, self.hi / other.lo, self.hi / other.hi)
        return Interval._out(min(q), max(q))

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= x <= self.hi + tol

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)


def _as_interval(x) -> Interval:
    return x if isinstance(x, Interval) else Interval.point(float(x))


@dataclass
class GradientEnclosure:
    alpha_lo: float
    alpha_hi: float
    lprime: float
    uprime: float
    dalpha_lo: float
    dalpha_hi: float
    validity: dict = field(default_factory=dict)
    quantities: dict = field(default_factory=dict, repr=False)

    @property
    def alpha(self) -> Interval:
        return Interval(self.alpha_lo, self.alpha_hi)

    @property
    def dalpha(self) -> Interval:
        return Interval(self.dalpha_lo, self.dalpha_hi)

    @property
    def contraction(self) -> float:
        return max(self.validity.get("contraction", {}).values(), default=0.0)


def alpha_interval(q_r: CycleQuantities, q_e: CycleQuantities) -> tuple[float, float]:
    if not q_e.w_tilde > 0:
        raise RuntimeError(f"non-positive truncated cycle length {q_e.w_tilde}")
    lo = q_r.w_tilde / (q_e.w_tilde + q_e.mu1)
    hi = (q_r.w_tilde + q_r.mu1) / q_e.w_tilde
    return lo, hi


def alpha_prime_interval(q_r: CycleQuantities, q_e: CycleQuantities, alpha: tuple[float, float]):
    """Return ``(l', u', lower, upper)`` for ``alpha'``.

    ``l' <= alpha w'(e) <= u'`` and ``lower <= alpha' <= upper``.
    """
    a_lo, a_hi = alpha
    we, mue = q_e.w_tilde, q_e.mu1
    de_lo = q_e.w_tilde_prime - q_e.mu1_prime
    de_hi = q_e.w_tilde_prime + q_e.mu1_prime
    lprime = a_lo * de_lo if de_lo >= 0 else a_hi * de_lo
    uprime = a_hi * de_hi if de_hi >= 0 else a_lo * de_hi

    num_lo = q_r.w_tilde_prime - q_r.mu1_prime - uprime
    lower = num_lo / (we + mue) if num_lo >= 0 else num_lo / we
    num_hi = q_r.w_tilde_prime + q_r.mu1_prime - lprime
    upper = num_hi / we if num_hi >= 0 else num_hi / (we + mue)
    return lprime, uprime, lower, upper


def relative_metrics(enclosure: GradientEnclosure, alpha_prime_ref: float):
    """``(lower_rel, upper_rel, gap_rel)`` of the gradient interval against a reference."""
    if alpha_prime_ref == 0:
        raise ValueError("relative metrics are undefined for a zero reference")
    s = abs(alpha_prime_ref)
    lo, hi = enclosure.dalpha_lo, enclosure.dalpha_hi
    return (alpha_prime_ref - lo) / s, (hi - alpha_prime_ref) / s, (hi - lo) / s


def midpoint_estimate(q_r: CycleQuantities, q_e: CycleQuantities) -> float:
    return (q_r.w_tilde_prime - (q_r.w_tilde / q_e.w_tilde) * q_e.w_tilde_prime) / q_e.w_tilde


@dataclass
class CertifiedRun:
    """Cycle quantities with radii for several rewards on one truncation."""

    n: int
    state_count: int
    quantities: dict[str, CycleQuantities]
    radii: dict[str, ErrorRadii]
    drift: dict[str, DriftReport]

    @property
    def contraction(self) -> float:
        return max((r.contraction for r in self.radii.values()), default=0.0)

    def validity(self) -> dict:
        return {
            "contraction": {k: r.contraction for k, r in self.radii.items()},
            "drift_certified": all(d.certified for d in self.drift.values()),
            "drift_min_margin": {k: dict(d.min_margin) for k, d in self.drift.items()},
        }


def certified_run(
    chain: ParametricChain,
    n: int,
    labels,
    *,
    ring_depth: int = 2,
    include_exit_jump: bool = True,
) -> CertifiedRun:
    """Truncate at level ``n``, verify drift and bound every reward in ``labels``.

    Raises a :class:`~truncgrad.errors.HypothesisError` subclass when a
    hypothesis fails, and :class:`~truncgrad.errors.ConfigurationError` when
    ``K`` does not fit in ``A``.
    """
    lyap = chain.lyapunov
    if not lyap.analytic_certificate:
        raise UncertifiedDrift(
            "drift inequalities are only checked on a finite region; "
            "set analytic_certificate once they are established analytically"
        )
    part = chain.partition(n)
    blocks = build_blocks(chain, part)
    region = checkable_region(chain, part, ring_depth)
    F = factorize(blocks)
    quantities, radii, drift = {}, {}, {}
    for label in labels:
        f = chain.rewards[label]
        v = lyap.v_for(label)
        drift[label] = verify_drift(chain, part, f, v, ring_depth, lyap.vt, lyap.nut, region=region)
        q = cycle_quantities(blocks, f, label, F)
        radii[label] = error_radii(
            blocks, F, q, blocks.values_on_A(f), v, lyap.vt, lyap.nut,
            include_exit_jump=include_exit_jump,
        )
        quantities[label] = q
    return CertifiedRun(n, part.size, quantities, radii, drift)


def dtmc_enclosure(
    chain: ParametricChain,
    n: int,
    *,
    reward: str = "r",
    ring_depth: int = 2,
    include_exit_jump: bool = True,
) -> GradientEnclosure:
    run = certified_run(
        chain, n, (reward, "e"), ring_depth=ring_depth, include_exit_jump=include_exit_jump
    )
    q_r, q_e = run.quantities[reward], run.quantities["e"]
    alpha = alpha_interval(q_r, q_e)
    lp, up, lo, hi = alpha_prime_interval(q_r, q_e, alpha)
    validity = run.validity()
    validity["state_count"] = run.state_count
    return GradientEnclosure(alpha[0], alpha[1], lp, up, lo, hi, validity, run.quantities)


def finite_difference(fn, theta: float, h: float) -> float:
    return (fn(theta + h) - fn(theta - h)) / (2.0 * h)


def exact_quotient(w_r: float, w_e: float, dw_r: float, dw_e: float) -> tuple[float, float]:
    alpha = w_r / w_e
    return alpha, (dw_r - alpha * dw_e) / w_e

