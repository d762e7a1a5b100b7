"""Parametrised chain contract, block assembly and drift verification.

A model supplies, for every state ``x``, its finitely many one-step targets
together with ``P(theta0, x, y)`` and the derivative ``P'(theta0, x, y)``.
:func:`build_blocks` turns that into sparse matrices over the truncation set
``A`` plus the (finite) list of ``A^c`` states reachable in one step.  The
infinite part of the state space only ever enters through contractions of
those tail columns against a state function, see
:meth:`PartitionedBlocks.tail_aggregate`.
"""

from __future__ import annotations

import abc
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DriftViolation, ModelError
from .state_codec import Partition, State

StateFunction = Callable[[State], float]

ROW_SUM_TOL = 1e-12
DERIV_ROW_SUM_TOL = 1e-10
DRIFT_TOL = 1e-12


def one(x: State) -> float:
    return 1.0


@dataclass(frozen=True)
class LyapunovSet:
    """Lyapunov functions used by the error bounds.

    ``v`` maps a reward label to the function certifying the level drift for
    that reward; labels without an entry fall back to ``v_default``.  ``vt``
    and ``nut`` certify the two derivative drift conditions.  Since the
    inequalities are only checked on a finite region,
    ``analytic_certificate`` records that the caller has established them on
    the rest of the state space.
    """

    v: Mapping[str, StateFunction]
    vt: StateFunction
    nut: StateFunction
    v_default: StateFunction | None = None
    analytic_certificate: bool = False

    def v_for(self, label: str) -> StateFunction:
        if label in self.v:
            return self.v[label]
        if self.v_default is None:
            raise KeyError(f"no Lyapunov function configured for reward {label!r}")
        return self.v_default


class ParametricChain(abc.ABC):
    """A Markov chain ``P(theta)`` observed at ``theta0``.

    Implementations must be pure functions of the state so that a single
    instance can be shared across worker threads.
    """

    theta0: float
    lyapunov: LyapunovSet

    @abc.abstractmethod
    def transitions(self, x: State) -> list[tuple[State, float, float]]:
        """Return ``(target, P(theta0,x,target), P'(theta0,x,target))`` triples."""

    @property
    @abc.abstractmethod
    def rewards(self) -> Mapping[str, StateFunction]:
        """Named non-negative reward functions, always including ``"e"``."""

    @abc.abstractmethod
    def partition(self, n: int) -> Partition:
        """Truncation at level ``n``."""

    def at_theta(self, theta: float) -> "ParametricChain":
        raise NotImplementedError(f"{type(self).__name__} cannot be re-parametrised")


@dataclass(frozen=True, eq=False)
class PartitionedBlocks:
    """Sparse blocks of ``P(theta0)`` and ``P'(theta0)`` over ``A``.

    ``P`` and ``dP`` are ``|A| x |A|`` in the index order of ``partition``;
    ``P_tail`` and ``dP_tail`` hold the columns of the one-step reachable
    ``A^c`` states listed in ``tail_states``.
    """

    partition: Partition
    P: sp.csr_matrix
    dP: sp.csr_matrix
    tail_states: tuple
    P_tail: sp.csr_matrix
    dP_tail: sp.csr_matrix
    _cache: dict = field(default_factory=dict, repr=False)

    @cached_property
    def P_kk(self) -> sp.csr_matrix:
        return self.P[1:, 1:].tocsr()

    @cached_property
    def dP_kk(self) -> sp.csr_matrix:
        return self.dP[1:, 1:].tocsr()

    @cached_property
    def abs_dP_kk(self) -> sp.csr_matrix:
        return abs(self.dP_kk).tocsr()

    @cached_property
    def P_1k(self) -> np.ndarray:
        return self.P[0, 1:].toarray().ravel()

    @cached_property
    def dP_1k(self) -> np.ndarray:
        return self.dP[0, 1:].toarray().ravel()

    def values_on_A(self, g: StateFunction) -> np.ndarray:
        return np.array([g(x) for x in self.partition.states], dtype=float)

    def tail_values(self, g: StateFunction) -> np.ndarray:
        return np.array([g(y) for y in self.tail_states], dtype=float)

    def tail_aggregate(self, g: StateFunction, *, derivative: bool = False) -> np.ndarray:
        """``sum_{y in A^c} P(x,y) g(y)`` for every ``x`` in ``A``.

        With ``derivative=True`` the weights are ``|P'(x,y)|`` instead.
        Results are cached per function object.
        """
        key = (id(g), derivative)
        hit = self._cache.get(key)
        if hit is not None and hit[0] is g:
            return hit[1]
        if not self.tail_states:
            out = np.zeros(self.partition.size)
        else:
            M = abs(self.dP_tail) if derivative else self.P_tail
            out = M @ self.tail_values(g)
        self._cache[key] = (g, out)
        return out

    def signed_tail_derivative(self) -> np.ndarray:
        return np.asarray(self.dP_tail.sum(axis=1)).ravel()

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.P.sum(axis=1)).ravel() + np.asarray(
            self.P_tail.sum(axis=1)
        ).ravel()

    def derivative_row_sums(self) -> np.ndarray:
        return np.asarray(self.dP.sum(axis=1)).ravel() + self.signed_tail_derivative()


def check_row(x: State, row: list[tuple[State, float, float]]) -> None:
    if not row:
        raise ModelError(f"state {x} has no transitions")
    total = 0.0
    dtotal = 0.0
    for y, p, dp in row:
        if p < 0.0:
            raise ModelError(f"negative probability {p} for {x} -> {y}")
        total += p
        dtotal += dp
    if abs(total - 1.0) > ROW_SUM_TOL:
        raise ModelError(f"row {x} sums to {total!r}, deviation {total - 1.0:.3g}")
    if abs(dtotal) > DERIV_ROW_SUM_TOL:
        raise ModelError(f"derivative row {x} sums to {dtotal!r}")


def build_blocks(chain: ParametricChain, partition: Partition) -> PartitionedBlocks:
    """Assemble the sparse blocks of ``P`` and ``P'`` over ``partition.A``."""
    n = partition.size
    rows, cols, vals, dvals = [], [], [], []
    trows, tcols, tvals, tdvals = [], [], [], []
    tail_index: dict[State, int] = {}
    for i, x in enumerate(partition.states):
        row = chain.transitions(x)
        check_row(x, row)
        for y, p, dp in row:
            if p == 0.0 and dp == 0.0:
                continue
            if partition.in_A(y):
                rows.append(i)
                cols.append(partition.encode(y))
                vals.append(p)
                dvals.append(dp)
            else:
                j = tail_index.setdefault(y, len(tail_index))
                trows.append(i)
                tcols.append(j)
                tvals.append(p)
                tdvals.append(dp)
    m = len(tail_index)
    P = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    dP = sp.csr_matrix((dvals, (rows, cols)), shape=(n, n))
    P_tail = sp.csr_matrix((tvals, (trows, tcols)), shape=(n, m))
    dP_tail = sp.csr_matrix((tdvals, (trows, tcols)), shape=(n, m))
    tail_states = tuple(sorted(tail_index, key=tail_index.get))
    return PartitionedBlocks(partition, P, dP, tail_states, P_tail, dP_tail)


@dataclass
class DriftReport:
    """Minimum margins of the drift inequalities over the checked region.

    Keys of ``min_margin`` are ``"level"`` (``P_bb v <= v - f``), ``"vt"``
    (``P_bb vt <= vt - |P'_bb| v``) and ``"nut"`` (``P_bb nut <= nut - |P'| e``).
    """

    checked_states: int
    min_margin: dict[str, float]
    argmin: dict[str, State]
    certified: bool

    @property
    def ok(self) -> bool:
        return all(m >= 0.0 for m in self.min_margin.values())


def checkable_region(chain: ParametricChain, partition: Partition, ring_depth: int) -> list[State]:
    """``Atilde`` plus the ``A^c`` states reachable from ``A`` within ``ring_depth`` steps."""
    region = list(partition.states[1 + partition.n_kprime:])
    seen: set[State] = set()
    frontier = set()
    for x in partition.states:
        for y, p, _ in chain.transitions(x):
            if p > 0.0 and not partition.in_A(y):
                frontier.add(y)
    for _ in range(ring_depth):
        frontier -= seen
        if not frontier:
            break
        seen |= frontier
        nxt = set()
        for x in frontier:
            for y, p, _ in chain.transitions(x):
                if p > 0.0 and not partition.in_A(y) and y not in seen:
                    nxt.add(y)
        frontier = nxt
    region.extend(sorted(seen))
    return region


def verify_drift(
    chain: ParametricChain,
    partition: Partition,
    f: StateFunction,
    v: StateFunction,
    check_ring_depth: int,
    vt: StateFunction | None = None,
    nut: StateFunction | None = None,
    *,
    raise_on_violation: bool = True,
    region: list[State] | None = None,
) -> DriftReport:
    """Check the drift inequalities on ``Atilde`` and a ring of ``A^c``.

    Lyapunov functions live on ``beta = S - K``; transitions into ``K`` do not
    contribute to the ``P_bb`` products.  The ``nut`` inequality uses the
    full row ``sum_y |P'(x,y)|`` because the likelihood ratio of the jump
    that re-enters ``K`` also has to be paid for.
    """
    if region is None:
        region = checkable_region(chain, partition, check_ring_depth)
    margins = {"level": np.inf}
    argmin: dict[str, State] = {}
    if vt is not None:
        margins["vt"] = np.inf
    if nut is not None:
        margins["nut"] = np.inf
    in_beta = partition.in_beta
    for x in region:
        row = chain.transitions(x)
        pv = pvt = pnut = 0.0
        dv = de = 0.0
        for y, p, dp in row:
            de += abs(dp)
            if not in_beta(y):
                continue
            vy = v(y)
            pv += p * vy
            dv += abs(dp) * vy
            if vt is not None:
                pvt += p * vt(y)
            if nut is not None:
                pnut += p * nut(y)
        vx = v(x)
        fx = f(x)
        checks = {"level": (vx - fx - pv, abs(vx) + abs(fx) + pv)}
        if vt is not None:
            vtx = vt(x)
            checks["vt"] = (vtx - dv - pvt, abs(vtx) + dv + pvt)
        if nut is not None:
            nx = nut(x)
            checks["nut"] = (nx - de - pnut, abs(nx) + de + pnut)
        for name, (margin, scale) in checks.items():
            if margin < -DRIFT_TOL * (1.0 + scale):
                if raise_on_violation:
                    raise DriftViolation(name, x, margin)
            elif margin < 0.0:
                margin = 0.0
            if margin < margins[name]:
                margins[name] = margin
                argmin[name] = x
    return DriftReport(
        checked_states=len(region),
        min_margin=margins,
        argmin=argmin,
        certified=bool(getattr(chain.lyapunov, "analytic_certificate", False)),
    )


def dominated_on(g: StateFunction, f: StateFunction, states) -> bool:
    """``g <= f`` on ``states``; a ``v`` certified for ``f`` then serves ``g``."""
    return all(g(x) <= f(x) for x in states)
