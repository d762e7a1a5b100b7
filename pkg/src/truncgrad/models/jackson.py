"""Two-station Jackson network with a routing probability as parameter.

Routing matrix ``[[R11, theta], [R21, R22]]``; customers leave the network
after station ``i`` with probability ``1 - sum_j R_ij``.  Self-routing does
not change the state, so it never shows up as a jump of the rate matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..chain_model import LyapunovSet
from ..errors import ModelError
from ..jump_embed import EmbeddedChain, RateModel
from ..state_codec import Partition, State


@dataclass(frozen=True)
class JacksonParams:
    r11: float = 0.2
    r21: float = 0.25
    r22: float = 0.125
    mu1: float = 3.0
    mu2: float = 3.0
    lam1: float = 2.0 / 3.0
    lam2: float = 1.0
    theta0: float = 0.4

    def __post_init__(self):
        if self.theta0 < 0 or self.theta0 > 1.0 - self.r11:
            raise ModelError(
                f"invalid routing: theta={self.theta0} outside [0, {1.0 - self.r11}]"
            )
        if self.r21 + self.r22 > 1.0:
            raise ModelError("row 2 of the routing matrix exceeds one")

    def routing(self, theta: float | None = None) -> np.ndarray:
        t = self.theta0 if theta is None else theta
        return np.array([[self.r11, t], [self.r21, self.r22]])


@dataclass(frozen=True)
class JacksonAnalytic:
    gamma: np.ndarray
    dgamma: np.ndarray
    rho: np.ndarray
    alpha: float
    alpha_prime: float


def jackson_analytic(params: JacksonParams = JacksonParams()) -> JacksonAnalytic:
    """Traffic equations ``gamma = lam + R^T gamma`` and the product-form reward."""
    R = params.routing()
    M = np.eye(2) - R.T
    lam = np.array([params.lam1, params.lam2])
    gamma = np.linalg.solve(M, lam)
    dR = np.array([[0.0, 1.0], [0.0, 0.0]])
    dgamma = np.linalg.solve(M, dR.T @ gamma)
    mu = np.array([params.mu1, params.mu2])
    rho = gamma / mu
    if np.any(rho >= 1):
        raise ModelError(f"unstable network: rho = {rho}")
    drho = dgamma / mu
    alpha = float(np.sum(rho / (1 - rho)))
    alpha_prime = float(np.sum(drho / (1 - rho) ** 2))
    return JacksonAnalytic(gamma, dgamma, rho, alpha, alpha_prime)


class JacksonRates(RateModel):
    """Rate model with reward ``x1 + x2`` and the default drift certificates.

    ``K = {c1 x1 + c2 x2 <= bound}``, ``A_n = {x1 <= n, x2 <= n}``, ``z = (0,0)``;
    one Lyapunov triple serves both holding-time rewards.
    """

    holding_rates_theta_free = True

    def __init__(
        self,
        params: JacksonParams = JacksonParams(),
        *,
        k_coeffs: tuple[float, float] = (0.9667, 0.6999),
        k_bound: float = 13.4666,
        z: tuple[int, int] = (0, 0),
        v_coeffs: tuple[float, float] = (1.0, 2.0),
        vt_coeffs: tuple[float, float] = (60.0, 60.0),
        nut_coeffs: tuple[float, float] = (60.0, 60.0),
        analytic_certificate: bool = True,
    ):
        self.params = params
        self.theta0 = params.theta0
        self.k_coeffs = tuple(k_coeffs)
        self.k_bound = k_bound
        self.z = tuple(int(c) for c in z)
        self._opts = dict(
            k_coeffs=k_coeffs, k_bound=k_bound, z=z, v_coeffs=v_coeffs, vt_coeffs=vt_coeffs,
            nut_coeffs=nut_coeffs, analytic_certificate=analytic_certificate,
        )
        a1, a2 = v_coeffs
        b1, b2 = vt_coeffs
        c1, c2 = nut_coeffs

        def v(x):
            return a1 * x[0] ** 2 + a2 * x[1] ** 2

        def vt(x):
            return b1 * x[0] ** 3 + b2 * x[1] ** 3

        def nut(x):
            return c1 * x[0] ** 3 + c2 * x[1] ** 3

        self.lyapunov = LyapunovSet({}, vt, nut, v_default=v, analytic_certificate=analytic_certificate)
        self._K = self._core_set()

    def _core_set(self) -> frozenset:
        c1, c2 = self.k_coeffs
        if c1 <= 0 or c2 <= 0 or self.k_bound < 0:
            raise ModelError("K must be a bounded region containing (0, 0)")
        n1 = math.floor(self.k_bound / c1)
        n2 = math.floor(self.k_bound / c2)
        return frozenset(
            (i, j) for i in range(n1 + 1) for j in range(n2 + 1) if c1 * i + c2 * j <= self.k_bound
        )

    def in_K(self, x: State) -> bool:
        return self.k_coeffs[0] * x[0] + self.k_coeffs[1] * x[1] <= self.k_bound

    def rates(self, x: State):
        x1, x2 = x
        p = self.params
        t = self.theta0
        out = [((x1 + 1, x2), p.lam1, 0.0), ((x1, x2 + 1), p.lam2, 0.0)]
        if x1 > 0:
            out.append(((x1 - 1, x2 + 1), p.mu1 * t, p.mu1))
            out.append(((x1 - 1, x2), p.mu1 * (1.0 - p.r11 - t), -p.mu1))
        if x2 > 0:
            out.append(((x1 + 1, x2 - 1), p.mu2 * p.r21, 0.0))
            out.append(((x1, x2 - 1), p.mu2 * (1.0 - p.r22 - p.r21), 0.0))
        return out

    def reward(self, x: State) -> float:
        return float(x[0] + x[1])

    def partition(self, n: int) -> Partition:
        A = frozenset((i, j) for i in range(n + 1) for j in range(n + 1))
        return Partition(self.z, self._K, A)

    def at_theta(self, theta: float) -> "JacksonRates":
        p = self.params
        return JacksonRates(
            JacksonParams(p.r11, p.r21, p.r22, p.mu1, p.mu2, p.lam1, p.lam2, theta), **self._opts
        )


def jackson_chain(params: JacksonParams = JacksonParams(), **kwargs) -> EmbeddedChain:
    return EmbeddedChain(JacksonRates(params, **kwargs))
