"""A posteriori radii for the truncated cycle sums and their derivatives.

Level bound: the generic Lyapunov bound of :mod:`truncgrad.linsys` applied
with ``G = P_{Lambda Lambda}``, ``h = f`` and ``nu = e`` gives radii ``mu`` on
``kappa`` and ``A^c`` and, through the ``z`` row, ``|w - w_tilde| <= mu1``.

Derivative bound: the derivative error on ``kappa`` splits into five
non-negative pieces, one per excursion segment of a path that leaves ``A``
before returning to ``z``:

* ``a``  -- likelihood-ratio mass accrued before the exit times the
  ``f``-sum from the exit state back to ``K`` (bounded by ``v``);
* ``at`` -- the same mass times the remaining cycle sum after re-entering
  ``K'`` (bounded by ``W = max_{K'} (w_tilde + mu)``);
* ``b``  -- likelihood-ratio mass accrued outside ``K`` weighted by ``v``
  (bounded by ``vt``);
* ``bt`` -- that mass alone (bounded by ``nut``) times ``W``;
* ``c``  -- the truncated derivative at the re-entry state, at most
  ``C = max_{K'} |w_tilde'|`` on the event of leaving ``A``.

The likelihood-ratio sums before the exit time include the exit jump
itself (``kappa -> A^c``), so ``a`` and ``at`` carry an ``|P'_k4|`` term in
addition to the ``|P'_kk|`` term.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chain_model import PartitionedBlocks, StateFunction, one
from .cycle_values import CycleQuantities
from .linsys import (
    Factorization,
    HypothesisFailure,
    NonnegSystem,
    TailBound,
    theorem1_bounds,
    weighted_sup_norm,
)


@dataclass
class Prop2Radii:
    m: float
    contraction: float
    mu_kappa: np.ndarray = field(repr=False)
    mu4: TailBound
    mu1: float
    solve_v: np.ndarray = field(repr=False)
    solve_e: np.ndarray = field(repr=False)

    def mu2(self, n_kprime: int) -> np.ndarray:
        return self.mu_kappa[:n_kprime]

    def mu3(self, n_kprime: int) -> np.ndarray:
        return self.mu_kappa[n_kprime:]


@dataclass
class Thm2Terms:
    a: np.ndarray = field(repr=False)
    at: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    bt: np.ndarray = field(repr=False)
    c: np.ndarray = field(repr=False)
    w_upper_max: float = 0.0
    dw_abs_max: float = 0.0
    tail: TailBound = field(default_factory=TailBound)

    @property
    def total(self) -> np.ndarray:
        return self.a + self.at + self.b + self.bt + self.c

    def scaled(self, lam: float) -> "Thm2Terms":
        return Thm2Terms(
            self.a * lam, self.at * lam, self.b * lam, self.bt * lam, self.c * lam,
            self.w_upper_max, self.dw_abs_max,
            TailBound({k: c * lam for k, c in self.tail.coeffs.items()}, self.tail.const * lam),
        )


@dataclass
class ErrorRadii:
    label: str
    prop2: Prop2Radii
    terms: Thm2Terms
    m_tilde: float
    mu_tilde_kappa: np.ndarray = field(repr=False)
    mu_tilde_4: TailBound
    mu1_prime: float

    @property
    def mu1(self) -> float:
        return self.prop2.mu1

    @property
    def contraction(self) -> float:
        return self.prop2.contraction


def _max0(x: np.ndarray) -> float:
    return float(np.max(x)) if x.size else 0.0


def prop2_radii(
    blocks: PartitionedBlocks, F: Factorization, f_values: np.ndarray, v: StateFunction
) -> Prop2Radii:
    """Level radii ``mu`` for a non-negative reward with level Lyapunov ``v``."""
    nk = blocks.partition.n_kprime
    s_v = blocks.tail_aggregate(v)
    s_e = blocks.tail_aggregate(one)
    sys = NonnegSystem(
        G=blocks.P_kk,
        h=np.asarray(f_values, dtype=float)[1:],
        tail_v=s_v[1:],
        tail_nu=s_e[1:],
        n_kprime=nk,
        factorization=F,
    )
    th = theorem1_bounds(sys)
    mu4 = TailBound({"v": 1.0}, th.m)
    mu1 = float(blocks.P_1k @ th.eps_kappa + s_v[0] + th.m * s_e[0])
    return Prop2Radii(th.m, th.contraction, th.eps_kappa, mu4, mu1, th.solve_v, th.solve_nu)


def thm2_terms(
    blocks: PartitionedBlocks,
    F: Factorization,
    q: CycleQuantities,
    prop2: Prop2Radii,
    v: StateFunction,
    vt: StateFunction,
    nut: StateFunction,
    *,
    include_exit_jump: bool = True,
) -> Thm2Terms:
    """The five derivative-error pieces on ``kappa`` and their ``A^c`` tail form.

    ``include_exit_jump=False`` drops the ``|P'_k4|`` contribution of the
    exit jump from ``a`` and ``at``; that variant is not a valid bound in
    general and exists only for comparison.
    """
    nk = blocks.partition.n_kprime
    W = _max0(q.kappa_values[:nk] + prop2.mu_kappa[:nk])
    C = _max0(np.abs(q.kappa_derivs[:nk]))
    absdP = blocks.abs_dP_kk
    rhs_a = absdP @ prop2.solve_v
    rhs_at = absdP @ prop2.solve_e
    if include_exit_jump:
        rhs_a = rhs_a + blocks.tail_aggregate(v, derivative=True)[1:]
        rhs_at = rhs_at + blocks.tail_aggregate(one, derivative=True)[1:]
    rhs = np.column_stack(
        [
            rhs_a,
            rhs_at,
            blocks.tail_aggregate(vt)[1:],
            blocks.tail_aggregate(nut)[1:],
        ]
    )
    a, at_unit, b, bt_unit = F.solve(rhs, nonneg=True).T
    return Thm2Terms(
        a=a,
        at=at_unit * W,
        b=b,
        bt=bt_unit * W,
        c=prop2.solve_e * C,
        w_upper_max=W,
        dw_abs_max=C,
        tail=TailBound({"vt": 1.0, "nut": W}, C),
    )


def m_tilde_and_mu_tilde(terms: Thm2Terms, prop2: Prop2Radii, n_kprime: int):
    """Return ``(m_tilde, mu_tilde_kappa, mu_tilde_4)``."""
    c = prop2.contraction
    if not c < 1.0:
        raise HypothesisFailure(c)
    total = terms.total
    m_tilde = weighted_sup_norm(total[:n_kprime]) / (1.0 - c)
    mu_kappa = total + m_tilde * prop2.solve_e
    mu4 = TailBound(dict(terms.tail.coeffs), terms.tail.const + m_tilde)
    return m_tilde, mu_kappa, mu4


def mu1_prime(
    blocks: PartitionedBlocks,
    prop2: Prop2Radii,
    mu_tilde_kappa: np.ndarray,
    mu_tilde_4: TailBound,
    v: StateFunction,
    vt: StateFunction,
    nut: StateFunction,
) -> float:
    """Derivative radius at ``z`` from the ``z`` row of ``P`` and ``|P'|``."""
    agg = {
        "v": blocks.tail_aggregate(v)[:1],
        "vt": blocks.tail_aggregate(vt)[:1],
        "nut": blocks.tail_aggregate(nut)[:1],
    }
    dagg = {"v": blocks.tail_aggregate(v, derivative=True)[:1]}
    ones = blocks.tail_aggregate(one)[:1]
    dones = blocks.tail_aggregate(one, derivative=True)[:1]
    level_part = blocks.P_1k @ mu_tilde_kappa + mu_tilde_4.contract(agg, ones)[0]
    deriv_part = np.abs(blocks.dP_1k) @ prop2.mu_kappa + prop2.mu4.contract(dagg, dones)[0]
    return float(level_part + deriv_part)


def error_radii(
    blocks: PartitionedBlocks,
    F: Factorization,
    q: CycleQuantities,
    f_values: np.ndarray,
    v: StateFunction,
    vt: StateFunction,
    nut: StateFunction,
    *,
    include_exit_jump: bool = True,
) -> ErrorRadii:
    """Run the level and derivative bounds for one reward; fills ``q.mu1*``."""
    nk = blocks.partition.n_kprime
    p2 = prop2_radii(blocks, F, f_values, v)
    terms = thm2_terms(blocks, F, q, p2, v, vt, nut, include_exit_jump=include_exit_jump)
    m_t, mu_k, mu_4 = m_tilde_and_mu_tilde(terms, p2, nk)
    mp = mu1_prime(blocks, p2, mu_k, mu_4, v, vt, nut)
    q.mu1 = p2.mu1
    q.mu1_prime = mp
    return ErrorRadii(q.label, p2, terms, m_t, mu_k, mu_4, mp)
