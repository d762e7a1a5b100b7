"""Finite sections of non-negative linear systems ``u = h + G u``.

The finite section over ``kappa = K' + Atilde`` is solved by a sparse LU
factorisation of ``I - G_kk`` that is computed once and reused for every
right-hand side.  :func:`theorem1_bounds` turns Lyapunov information about
the excluded part ``A^c`` into componentwise error bounds for the section.

Ordering convention: within ``kappa`` the first ``n_kprime`` entries belong
to ``K'``.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import HypothesisFailure, SolverError

CLIP_TOL = 1e-12
RESIDUAL_TOL = 1e-10


class Factorization:
    """LU factorisation of ``I - G`` shared across many right-hand sides."""

    def __init__(self, G):
        G = sp.csc_matrix(G, dtype=float)
        n = G.shape[0]
        if G.shape != (n, n):
            raise ValueError("G must be square")
        self.n = n
        self.G = G
        self._M = (sp.identity(n, format="csc") - G).tocsc()
        self._lu = None
        if n:
            try:
                self._lu = spla.splu(self._M)
            except RuntimeError as exc:
                raise SolverError(f"I - G is singular: {exc}") from exc

    def solve(self, rhs, *, nonneg: bool | None = None) -> np.ndarray:
        """Solve ``(I - G) u = rhs`` for a vector or a stack of columns.

        For non-negative right-hand sides, round-off negatives above
        ``-CLIP_TOL * scale`` are clipped to zero.
        """
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.n:
            raise ValueError(f"rhs has {rhs.shape[0]} rows, expected {self.n}")
        if self.n == 0:
            return np.zeros_like(rhs)
        u = self._lu.solve(rhs)
        if not np.all(np.isfinite(u)):
            raise SolverError("solution is not finite; I - G is numerically singular")
        res = rhs - self._M @ u
        scale = 1.0 + np.max(np.abs(rhs), axis=0)
        if np.any(np.max(np.abs(res), axis=0) > RESIDUAL_TOL * scale):
            raise SolverError(
                f"residual {np.max(np.abs(res)):.3g} exceeds tolerance"
            )
        if nonneg is None:
            nonneg = bool(np.all(rhs >= 0.0))
        if nonneg:
            thresh = CLIP_TOL * np.maximum(1.0, np.max(np.abs(u), axis=0))
            if np.any(u < -thresh):
                raise SolverError(
                    "negative solution for a non-negative system; "
                    "G is not a convergent non-negative matrix"
                )
            u = np.maximum(u, 0.0)
        return u


def solve_I_minus_G(G, rhs) -> np.ndarray:
    return Factorization(G).solve(rhs)


def restrict_to_kprime(u: np.ndarray, n_kprime: int) -> np.ndarray:
    return np.asarray(u)[:n_kprime]


def weighted_sup_norm(g, weight=None) -> float:
    g = np.asarray(g, dtype=float)
    if g.size == 0:
        return 0.0
    if weight is None:
        return float(np.max(np.abs(g)))
    weight = np.asarray(weight, dtype=float)
    if np.any(weight <= 0):
        raise ValueError("norm weight must be positive")
    return float(np.max(np.abs(g) / weight))


@dataclass(frozen=True)
class TailBound:
    """Affine bound ``sum_g coeffs[g] * g(y) + const`` for states ``y`` in ``A^c``.

    The keys of ``coeffs`` name Lyapunov functions (``"v"``, ``"vt"``,
    ``"nut"``); ``const`` multiplies the all-ones function.
    """

    coeffs: Mapping[str, float] = field(default_factory=dict)
    const: float = 0.0

    def __post_init__(self):
        if self.const < 0 or any(c < 0 for c in self.coeffs.values()):
            raise ValueError("tail bound coefficients must be non-negative")

    def evaluate(self, y, functions: Mapping) -> float:
        return self.const + sum(c * functions[k](y) for k, c in self.coeffs.items())

    def contract(self, aggregates: Mapping[str, np.ndarray], ones: np.ndarray) -> np.ndarray:
        """Apply tail weights: ``aggregates[g]`` is the weighted tail sum of ``g``."""
        out = self.const * np.asarray(ones, dtype=float)
        for k, c in self.coeffs.items():
            if c:
                out = out + c * aggregates[k]
        return out


@dataclass(frozen=True, eq=False)
class NonnegSystem:
    """Finite section data of ``u = h + G u`` with bounds on the excluded tail.

    ``tail_v`` and ``tail_nu`` are ``G_k4 v_4`` and ``G_k4 nu_4`` on ``kappa``.
    With the default ``nu = e`` (substochastic ``G``), ``tail_nu`` is the
    one-step exit probability into ``A^c``.
    """

    G: object
    h: np.ndarray
    tail_v: np.ndarray
    tail_nu: np.ndarray
    n_kprime: int
    weight: np.ndarray | None = None
    factorization: Factorization | None = None

    def factor(self) -> Factorization:
        return self.factorization if self.factorization is not None else Factorization(self.G)


@dataclass(frozen=True)
class Theorem1Result:
    m: float
    contraction: float
    u_tilde: np.ndarray
    eps_kappa: np.ndarray
    tail: TailBound
    solve_v: np.ndarray
    solve_nu: np.ndarray

    def eps_kprime(self, n_kprime: int) -> np.ndarray:
        return self.eps_kappa[:n_kprime]

    def eps_atilde(self, n_kprime: int) -> np.ndarray:
        return self.eps_kappa[n_kprime:]


def theorem1_bounds(sys: NonnegSystem) -> Theorem1Result:
    """Componentwise bounds on ``|u* - u_tilde|`` over ``kappa`` and ``A^c``.

    ``u_tilde`` is the finite-section solution (zero on ``A^c``).  With
    ``t_v = (I-G_kk)^{-1} G_k4 v_4`` and ``t_nu`` likewise, the contraction is
    ``c = ||t_nu|K'||_w``; if ``c < 1`` then ``||u*|K'||_w <= m`` with
    ``m = ||t_v|K' + (I-G_kk)^{-1}|h|  |K'||_w / (1 - c)`` and
    ``|eps_kappa| <= t_v + t_nu m``, ``|eps_4| <= v_4 + nu_4 m``.
    """
    F = sys.factor()
    nk = sys.n_kprime
    t_v, t_nu, u_abs = F.solve(np.column_stack([sys.tail_v, sys.tail_nu, np.abs(sys.h)])).T
    u_tilde = F.solve(sys.h, nonneg=bool(np.all(np.asarray(sys.h) >= 0)))
    c = weighted_sup_norm(t_nu[:nk], None if sys.weight is None else sys.weight)
    if not c < 1.0:
        raise HypothesisFailure(c)
    m = weighted_sup_norm((t_v + u_abs)[:nk], sys.weight) / (1.0 - c)
    eps = t_v + t_nu * m
    return Theorem1Result(
        m=m,
        contraction=c,
        u_tilde=u_tilde,
        eps_kappa=eps,
        tail=TailBound({"v": 1.0, "nu": m}),
        solve_v=t_v,
        solve_nu=t_nu,
    )
