"""Synthetic test systems with exact reference values.

Everything here works on small dense matrices and deliberately avoids the
sparse pipeline it is used to check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..chain_model import LyapunovSet, ParametricChain, one
from ..errors import ConfigurationError
from ..linsys import NonnegSystem
from ..state_codec import Partition, State


@dataclass(frozen=True, eq=False)
class RandomSystem:
    """A substochastic ``G`` on ``Lambda = K' + Atilde + A^c`` with its exact solution."""

    system: NonnegSystem
    G: np.ndarray
    h: np.ndarray
    v: np.ndarray
    u_star: np.ndarray
    split: tuple[int, int, int]

    @property
    def n_kappa(self) -> int:
        return self.split[0] + self.split[1]


def neumann_solution(G: np.ndarray, h: np.ndarray, tol: float = 1e-14, max_iter: int = 100_000):
    """``sum_n G^n h`` summed until the increment drops below ``tol``."""
    u = np.array(h, dtype=float)
    term = u.copy()
    for _ in range(max_iter):
        term = G @ term
        u += term
        if np.max(np.abs(term)) < tol:
            return u
    raise RuntimeError("Neumann series did not converge")


def random_substochastic(rng: np.random.Generator, size: int, cap: float = 0.95, density: float = 0.5):
    G = rng.random((size, size)) * (rng.random((size, size)) < density)
    rows = G.sum(axis=1)
    target = cap * rng.uniform(0.3, 1.0, size)
    scale = np.where(rows > 0, target / np.where(rows > 0, rows, 1.0), 0.0)
    return G * scale[:, None]


def random_nonneg_system(seed: int, size: int, split: tuple[int, int] | None = None,
                         cap: float = 0.95, slack: float = 0.0) -> RandomSystem:
    """Reproducible substochastic system with designated ``K'``/``Atilde``/``A^c``.

    ``split = (|K'|, |Atilde|)``; the remainder of ``size`` is ``A^c``.  The
    level Lyapunov function is the exact minimal one, ``(I - G_bb)^{-1} h_b``,
    inflated by ``1 + slack``; ``nu`` is the all-ones function.
    """
    if size > 50:
        raise ValueError("size must be at most 50")
    rng = np.random.default_rng(seed)
    if split is None:
        if size < 2:
            raise ValueError("a random split needs at least two states")
        nk = int(rng.integers(1, max(1, size // 3) + 1))
        na = int(rng.integers(0, size - nk))
        split = (nk, na)
    nk, na = split
    n4 = size - nk - na
    if n4 < 0 or nk < 0 or na < 0:
        raise ValueError("split does not fit in size")
    G = random_substochastic(rng, size, cap)
    h = rng.random(size) * (rng.random(size) < 0.8)
    beta = np.arange(nk, size)
    Gbb = G[np.ix_(beta, beta)]
    v_beta = np.linalg.solve(np.eye(len(beta)) - Gbb, h[beta]) * (1.0 + slack)
    v = np.zeros(size)
    v[beta] = v_beta
    kap = np.arange(nk + na)
    tail = np.arange(nk + na, size)
    G_k4 = G[np.ix_(kap, tail)]
    system = NonnegSystem(
        G=G[np.ix_(kap, kap)],
        h=h[kap],
        tail_v=G_k4 @ v[tail],
        tail_nu=G_k4 @ np.ones(len(tail)),
        n_kprime=nk,
    )
    u_star = neumann_solution(G, h)
    return RandomSystem(system, G, h, v, u_star, (nk, na, n4))


class FiniteChain(ParametricChain):
    """Finite chain on ``{0..N-1}`` given by dense ``P(theta0)`` and ``P'(theta0)``.

    ``P(theta) = diag(1/s) (B + theta C)`` row-normalised, so the model is
    smooth in theta and :meth:`at_theta` re-evaluates it exactly.
    """

    def __init__(self, B, C, theta0: float, rewards: dict, *, z: int = 0,
                 K=None, A=None, lyapunov: LyapunovSet | None = None):
        self.B = np.asarray(B, dtype=float)
        self.C = np.asarray(C, dtype=float)
        self.theta0 = float(theta0)
        N = self.B.shape[0]
        self.N = N
        M = self.B + self.theta0 * self.C
        s = M.sum(axis=1)
        c = self.C.sum(axis=1)
        if np.any(M < 0) or np.any(s <= 0):
            raise ValueError("B + theta C must be non-negative with positive row sums")
        self.Pm = M / s[:, None]
        self.dPm = (self.C * s[:, None] - M * c[:, None]) / (s**2)[:, None]
        self._reward_arrays = {k: np.asarray(val, dtype=float) for k, val in rewards.items()}
        r = {k: (lambda x, a=a: float(a[x[0]])) for k, a in self._reward_arrays.items()}
        r.setdefault("e", one)
        self._rewards = r
        self.z = z
        self.K = frozenset(range(N)) if K is None else frozenset(K)
        self.A_levels = A
        self.lyapunov = lyapunov

    @property
    def rewards(self):
        return self._rewards

    def reward_array(self, label: str) -> np.ndarray:
        if label == "e":
            return np.ones(self.N)
        return self._reward_arrays[label]

    def transitions(self, x: State):
        (i,) = x
        if not 0 <= i < self.N:
            raise ValueError(f"state {x} outside the finite chain")
        row = []
        for j in range(self.N):
            p, dp = self.Pm[i, j], self.dPm[i, j]
            if p != 0.0 or dp != 0.0:
                row.append(((j,), float(p), float(dp)))
        return row

    def partition(self, n: int) -> Partition:
        if self.A_levels is None:
            A = range(self.N)
        else:
            A = self.A_levels[n]
        return Partition((self.z,), frozenset((k,) for k in self.K), frozenset((a,) for a in A))

    def at_theta(self, theta: float) -> "FiniteChain":
        labels = {k: a for k, a in self._reward_arrays.items()}
        return FiniteChain(self.B, self.C, theta, labels, z=self.z, K=self.K,
                           A=self.A_levels, lyapunov=self.lyapunov)


def exact_lyapunov(chain: FiniteChain, labels, slack: float = 0.0, certificate: bool = True) -> LyapunovSet:
    """Minimal Lyapunov functions for ``chain`` on ``beta = S - K``.

    ``v_f = (I - P_bb)^{-1} f_b``, ``vt = (I - P_bb)^{-1} |P'_bb| max_f v_f`` and
    ``nut = (I - P_bb)^{-1} |P'_{b S}| e``, each inflated by ``1 + slack``.
    The inequalities then hold with equality (``slack = 0``) on all of ``beta``.
    """
    N = chain.N
    beta = np.array([i for i in range(N) if i not in chain.K], dtype=int)
    I = np.eye(len(beta))
    Pbb = chain.Pm[np.ix_(beta, beta)]
    absd = np.abs(chain.dPm)
    inv = np.linalg.inv(I - Pbb) if len(beta) else np.zeros((0, 0))

    def lift(vals):
        full = np.zeros(N)
        full[beta] = vals
        return full

    vs = {}
    for label in labels:
        f = chain.reward_array(label)
        vs[label] = lift(inv @ f[beta] * (1 + slack)) if len(beta) else np.zeros(N)
    vmax = np.max(np.stack(list(vs.values())), axis=0)
    vt = lift(inv @ (absd[np.ix_(beta, beta)] @ vmax[beta]) * (1 + slack)) if len(beta) else np.zeros(N)
    nut = lift(inv @ absd[beta].sum(axis=1) * (1 + slack)) if len(beta) else np.zeros(N)

    def fn(a):
        return lambda x: float(a[x[0]])

    return LyapunovSet({k: fn(a) for k, a in vs.items()}, fn(vt), fn(nut),
                       analytic_certificate=certificate)


@dataclass(frozen=True)
class ExactCycle:
    w: float
    dw: float
    w_lambda: np.ndarray
    dw_lambda: np.ndarray


def exact_cycle(chain: FiniteChain, label: str) -> ExactCycle:
    """Exact ``w(z)`` and ``w'(z)`` by dense inversion over ``S - {z}``."""
    z = chain.z
    lam = np.array([i for i in range(chain.N) if i != z])
    P, dP = chain.Pm, chain.dPm
    f = chain.reward_array(label)
    inv = np.linalg.inv(np.eye(len(lam)) - P[np.ix_(lam, lam)])
    wl = inv @ f[lam]
    dwl = inv @ (dP[np.ix_(lam, lam)] @ wl)
    w = f[z] + P[z, lam] @ wl
    dw = dP[z, lam] @ wl + P[z, lam] @ dwl
    return ExactCycle(float(w), float(dw), wl, dwl)


def finite_chain_oracle(chain: FiniteChain, reward: str = "r", cap: int = 2000):
    """Exact ``(w_r, w_e, dw_r, dw_e, alpha, alpha')`` of a finite chain."""
    if chain.N > cap:
        raise ConfigurationError(f"finite chain with {chain.N} states exceeds cap {cap}")
    cr = exact_cycle(chain, reward)
    ce = exact_cycle(chain, "e")
    alpha = cr.w / ce.w
    return {
        "w_r": cr.w, "w_e": ce.w, "dw_r": cr.dw, "dw_e": ce.dw,
        "alpha": alpha, "alpha_prime": (cr.dw - alpha * ce.dw) / ce.w,
    }


def birth_death_chain(theta0: float = 0.3, size: int = 6, down: float = 0.4) -> FiniteChain:
    """Birth-death chain on ``{0..size-1}`` with up-probability ``theta``.

    ``P(i, i+1) = theta``, ``P(i, i-1) = down``, the rest stays put; at the
    boundaries the blocked move is folded into the holding probability.
    """
    B = np.zeros((size, size))
    C = np.zeros((size, size))
    for i in range(size):
        if i > 0:
            B[i, i - 1] = down
        B[i, i] = 1.0 - (down if i > 0 else 0.0)
        if i + 1 < size:
            C[i, i + 1] = 1.0
            C[i, i] = -1.0
    return FiniteChain(B, C, theta0, {"r": np.arange(size, dtype=float)})


def random_finite_chain(seed: int, size: int = 12, density: float = 0.4, theta0: float = 0.5):
    """Random smooth chain: ``B``, ``C`` non-negative with irreducible support."""
    rng = np.random.default_rng(seed)
    B = rng.random((size, size)) * (rng.random((size, size)) < density)
    # cycle through all states for irreducibility
    for i in range(size):
        B[i, (i + 1) % size] += 0.2 + rng.random()
    C = rng.random((size, size)) * (rng.random((size, size)) < density)
    r = rng.random(size) * 3
    return FiniteChain(B, C, theta0, {"r": r})
