"""G/M/1 queue seen at arrival epochs, with uniform interarrival times.

``X_{n+1} = [X_n + 1 - Z_{n+1}]^+`` where ``Z`` counts service completions
during an interarrival time ``T ~ U[0, b]``; given ``T``, ``Z`` is Poisson
with mean ``mu T``.  The parameter is the service rate ``mu`` and the reward
is the queue length ``r(x) = x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize, stats

from ..chain_model import LyapunovSet, ParametricChain, one
from ..errors import ModelError
from ..state_codec import Partition, State


@dataclass(frozen=True)
class GM1Params:
    b: float = 1.5
    mu: float = 2.0

    def __post_init__(self):
        if self.b <= 0 or self.mu <= 0:
            raise ModelError("b and mu must be positive")
        if not self.mu * self.b > 2:
            raise ModelError(f"unstable queue: mu*b = {self.mu * self.b} <= 2")

    @property
    def s(self) -> float:
        return self.mu * self.b


@lru_cache(maxsize=64)
def _xi_table(mu: float, b: float, kmax: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    s = mu * b
    k = np.arange(kmax + 1)
    sf = stats.poisson.sf(k, s)
    pmf = stats.poisson.pmf(k, s)
    xi = sf / s
    dxi = b * (pmf - xi) / s
    # underflow guard: tails below 1e-300 are flushed to exact zeros
    xi[sf < 1e-300] = 0.0
    dxi[(sf < 1e-300) & (pmf < 1e-300)] = 0.0
    for a in (sf, xi, dxi):
        a.setflags(write=False)
    return xi, dxi, sf


def _table(mu: float, b: float, k: int):
    size = 256
    while size < k + 2:
        size *= 2
    return _xi_table(float(mu), float(b), size)


def gm1_tail(m: int, mu: float, b: float) -> float:
    """``P(Z >= m) = E[(N - m)^+] / s`` with ``N ~ Poisson(s)``."""
    if m <= 0:
        return 1.0
    s = mu * b
    sf = _table(mu, b, m)[2]
    return max(float((s * sf[m - 1] - m * sf[m]) / s), 0.0)


def gm1_xi(k: int, mu: float, b: float) -> tuple[float, float]:
    """``P(Z = k)`` and its derivative in ``mu``.

    ``P(Z = k) = P(N > k) / s`` with ``N ~ Poisson(s)``, ``s = mu b``; since
    ``d/ds P(N > k) = P(N = k)``, the derivative is ``b (P(N=k) - xi_k) / s``.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    xi, dxi, _ = _table(mu, b, int(k))
    return float(xi[k]), float(dxi[k])


def gm1_xi_quadrature(k: int, mu: float, b: float) -> float:
    """Independent check of ``xi_k`` by numerical integration over ``T``."""
    from scipy import integrate

    val, _ = integrate.quad(
        lambda t: math.exp(-mu * t) * (mu * t) ** k / math.factorial(k) / b, 0.0, b,
        epsabs=1e-15, epsrel=1e-13,
    )
    return val


class GM1Chain(ParametricChain):
    """Embedded G/M/1 chain parametrised by the service rate.

    Default Lyapunov functions: ``v(x) = 2 x^2`` for both rewards,
    ``vt(x) = nut(x) = x^4``; default core set ``K = {0..k_max}`` with ``k_max = 9`` and ``z = 0``.
    """

    def __init__(
        self,
        params: GM1Params = GM1Params(),
        *,
        k_max: int = 9,
        z: int = 0,
        v_coef: float = 2.0,
        v_pow: int = 2,
        vt_coef: float = 1.0,
        vt_pow: int = 4,
        nut_coef: float = 1.0,
        nut_pow: int = 4,
        analytic_certificate: bool = True,
    ):
        self.params = params
        self.theta0 = params.mu
        self.k_max = k_max
        self.z = int(z)
        self._lyap_args = dict(
            v_coef=v_coef, v_pow=v_pow, vt_coef=vt_coef, vt_pow=vt_pow,
            nut_coef=nut_coef, nut_pow=nut_pow,
        )
        self._certificate = analytic_certificate

        def v(x):
            return v_coef * float(x[0]) ** v_pow

        def vt(x):
            return vt_coef * float(x[0]) ** vt_pow

        def nut(x):
            return nut_coef * float(x[0]) ** nut_pow

        self.lyapunov = LyapunovSet({}, vt, nut, v_default=v, analytic_certificate=analytic_certificate)
        self._rewards = {"r": lambda x: float(x[0]), "e": one}

    @property
    def rewards(self):
        return self._rewards

    def transitions(self, x: State):
        (n,) = x
        if n < 0:
            raise ModelError(f"invalid state {x}")
        mu, b = self.params.mu, self.params.b
        xi, dxi, _ = _table(mu, b, n)
        row = [((n + 1 - k,), float(xi[k]), float(dxi[k])) for k in range(n + 1)]
        # Z >= n + 1 empties the queue
        row.append(((0,), gm1_tail(n + 1, mu, b), -math.fsum(dxi[: n + 1])))
        return row

    def partition(self, n: int) -> Partition:
        return Partition((self.z,), frozenset((i,) for i in range(self.k_max + 1)),
                         frozenset((i,) for i in range(n + 1)))

    def at_theta(self, theta: float) -> "GM1Chain":
        return GM1Chain(
            GM1Params(self.params.b, theta), k_max=self.k_max, z=self.z,
            analytic_certificate=self._certificate, **self._lyap_args,
        )


@dataclass(frozen=True)
class GM1Analytic:
    phi: float
    beta: float
    alpha: float
    alpha_prime: float
    dphi: float
    dbeta: float


def _phi_equation(phi: float, mu: float, b: float) -> float:
    return 1.0 - phi / mu - (-math.expm1(-phi * b)) / (phi * b)


def gm1_analytic(params: GM1Params = GM1Params()) -> GM1Analytic:
    """Closed-form ``alpha`` and ``alpha'`` in ``mu`` from the geometric law."""
    mu, b = params.mu, params.b
    eps = 1e-9 * mu
    lo, hi = eps, mu - eps
    glo, ghi = _phi_equation(lo, mu, b), _phi_equation(hi, mu, b)
    if glo * ghi > 0:
        raise ModelError("no root of the phi equation in (0, mu); queue unstable")
    phi = optimize.bisect(_phi_equation, lo, hi, args=(mu, b), xtol=1e-15, rtol=1e-15, maxiter=500)
    if abs(_phi_equation(phi, mu, b)) > 1e-13:
        raise ModelError("phi bisection did not converge")
    beta = 1.0 - phi / mu
    dphi = (b * math.exp(-phi * b) + 2 * b * phi / mu - b) ** -1 * b * phi**2 / mu**2
    dbeta = (phi - mu * dphi) / mu**2
    alpha = beta / (1.0 - beta)
    alpha_prime = dbeta / (1.0 - beta) ** 2
    return GM1Analytic(phi, beta, alpha, alpha_prime, dphi, dbeta)


def gm1_moments(params: GM1Params = GM1Params()) -> tuple[float, float]:
    """``E Z`` and ``E Z^2`` for the Poisson mixture: ``s/2`` and ``s/2 + s^2/3``."""
    s = params.s
    return s / 2.0, s / 2.0 + s * s / 3.0
