"""Markov jump processes through their embedded jump chain.

For a rate matrix ``Q(theta)`` with holding rates ``lambda(x) = -Q(x,x)``
the jump chain has ``R(x,y) = Q(x,y) / lambda(x)`` and the equilibrium
reward of a rate reward ``rt`` is ``w(r1) / w(r2)`` with holding-time
weighted rewards ``r1 = rt / lambda`` and ``r2 = 1 / lambda``.  Differentiating,

    alpha' = (w'(r1) + w(r1') - alpha (w'(r2) + w(r2'))) / w(r2).

Every cycle quantity gets a certified interval and the combination is done
in outward-rounded interval arithmetic.  Signed reward derivatives are split
into positive and negative parts, each bounded separately.
"""

from __future__ import annotations

import abc
from collections.abc import Mapping

from .chain_model import LyapunovSet, ParametricChain, StateFunction, one
from .errors import ModelError
from .gradient_interval import GradientEnclosure, Interval, certified_run
from .state_codec import Partition, State

RATE_TOL = 1e-12


class RateModel(abc.ABC):
    """A parametrised rate matrix observed at ``theta0``."""

    theta0: float
    lyapunov: LyapunovSet
    #: set when ``sum_y Q'(theta0, x, y) = 0`` for every state, so the
    #: holding-time rewards do not depend on theta
    holding_rates_theta_free: bool = False

    @abc.abstractmethod
    def rates(self, x: State) -> list[tuple[State, float, float]]:
        """Off-diagonal ``(target, Q(theta0,x,y), Q'(theta0,x,y))`` triples."""

    @abc.abstractmethod
    def reward(self, x: State) -> float:
        """Non-negative reward rate ``rt(x)``."""

    @abc.abstractmethod
    def partition(self, n: int) -> Partition: ...

    def at_theta(self, theta: float) -> "RateModel":
        raise NotImplementedError


def _holding(model: RateModel, x: State) -> tuple[float, float, list]:
    entries = model.rates(x)
    lam = 0.0
    dlam = 0.0
    for y, q, dq in entries:
        if y == x:
            raise ModelError(f"self-transition supplied for state {x}")
        if q < 0:
            raise ModelError(f"negative rate {q} for {x} -> {y}")
        lam += q
        dlam += dq
    if not lam > 0:
        raise ModelError(f"state {x} has holding rate {lam}; absorbing states are not allowed")
    return lam, dlam, entries


class EmbeddedChain(ParametricChain):
    """Jump chain of a :class:`RateModel` with holding-time weighted rewards.

    Reward labels: ``r1``, ``r2`` and ``e``; unless the holding rates are
    theta-free, also ``dr1+``, ``dr1-``, ``dr2+``, ``dr2-`` for the positive
    and negative parts of ``r1'`` and ``r2'``.
    """

    def __init__(self, model: RateModel):
        self.model = model
        self.theta0 = model.theta0
        self.lyapunov = model.lyapunov
        rewards = {"r1": self.r1, "r2": self.r2, "e": one}
        if not model.holding_rates_theta_free:
            rewards.update({
                "dr1+": lambda x: max(self.dr1(x), 0.0),
                "dr1-": lambda x: max(-self.dr1(x), 0.0),
                "dr2+": lambda x: max(self.dr2(x), 0.0),
                "dr2-": lambda x: max(-self.dr2(x), 0.0),
            })
        self._rewards = rewards

    @property
    def rewards(self) -> Mapping[str, StateFunction]:
        return self._rewards

    def transitions(self, x: State):
        lam, dlam, entries = _holding(self.model, x)
        return [(y, q / lam, (dq * lam - q * dlam) / lam**2) for y, q, dq in entries]

    def holding_rate(self, x: State) -> tuple[float, float]:
        lam, dlam, _ = _holding(self.model, x)
        return lam, dlam

    def r1(self, x: State) -> float:
        return self.model.reward(x) / self.holding_rate(x)[0]

    def r2(self, x: State) -> float:
        return 1.0 / self.holding_rate(x)[0]

    def dr1(self, x: State) -> float:
        lam, dlam = self.holding_rate(x)
        return -self.model.reward(x) * dlam / lam**2

    def dr2(self, x: State) -> float:
        lam, dlam = self.holding_rate(x)
        return -dlam / lam**2

    def partition(self, n: int) -> Partition:
        return self.model.partition(n)

    def at_theta(self, theta: float) -> "EmbeddedChain":
        return EmbeddedChain(self.model.at_theta(theta))


def embed(model: RateModel) -> EmbeddedChain:
    return EmbeddedChain(model)


def ctmc_alpha_prime_interval(
    model: RateModel | EmbeddedChain,
    n: int,
    *,
    ring_depth: int = 2,
) -> GradientEnclosure:
    """Certified intervals for ``alpha`` and ``alpha'`` of a jump process."""
    chain = model if isinstance(model, EmbeddedChain) else embed(model)
    labels = ["r1", "r2"]
    signed = "dr1+" in chain.rewards
    if signed:
        labels += ["dr1+", "dr1-", "dr2+", "dr2-"]
    run = certified_run(chain, n, labels, ring_depth=ring_depth)
    q = run.quantities

    def level(label):
        return Interval._out(q[label].w_tilde, q[label].w_tilde + q[label].mu1)

    def deriv(label):
        return Interval.radius(q[label].w_tilde_prime, q[label].mu1_prime)

    w1, w2 = level("r1"), level("r2")
    n1, n2 = deriv("r1"), deriv("r2")
    if signed:
        n1 = n1 + (level("dr1+") - level("dr1-"))
        n2 = n2 + (level("dr2+") - level("dr2-"))
    alpha = w1 / w2
    product = alpha * n2
    dalpha = (n1 - product) / w2
    validity = run.validity()
    validity["state_count"] = run.state_count
    return GradientEnclosure(
        alpha.lo, alpha.hi, product.lo, product.hi, dalpha.lo, dalpha.hi, validity, q
    )
