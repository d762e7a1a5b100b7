"""Truncation approximations of cycle sums and their theta-derivatives.

For a reward ``f``, ``w(theta, z, f)`` is the expected ``f``-sum over one
regenerative cycle from ``z``.  Killing the chain on its first visit to
``A^c`` gives the computable under-approximation

    w_kappa  = (I - P_kk)^{-1} f_kappa
    w(z)     = f(z) + P_1k w_kappa

and differentiating at ``theta0``

    w'_kappa = (I - P_kk)^{-1} P'_kk w_kappa
    w'(z)    = P'_1k w_kappa + P_1k w'_kappa.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chain_model import ParametricChain, PartitionedBlocks, StateFunction, build_blocks
from .linsys import Factorization


@dataclass
class CycleQuantities:
    label: str
    w_tilde: float
    w_tilde_prime: float
    kappa_values: np.ndarray = field(repr=False)
    kappa_derivs: np.ndarray = field(repr=False)
    mu1: float | None = None
    mu1_prime: float | None = None

    @property
    def w_interval(self) -> tuple[float, float]:
        return self.w_tilde, self.w_tilde + self.mu1

    @property
    def w_prime_interval(self) -> tuple[float, float]:
        return self.w_tilde_prime - self.mu1_prime, self.w_tilde_prime + self.mu1_prime


def factorize(blocks: PartitionedBlocks) -> Factorization:
    return Factorization(blocks.P_kk)


def w_tilde(blocks: PartitionedBlocks, f_values: np.ndarray, F: Factorization | None = None):
    """Return ``(w_tilde(z), w_tilde_kappa)`` for reward values ``f_values`` on ``A``."""
    F = F or factorize(blocks)
    f_values = np.asarray(f_values, dtype=float)
    wk = F.solve(f_values[1:])
    return float(f_values[0] + blocks.P_1k @ wk), wk


def w_tilde_prime(blocks: PartitionedBlocks, kappa_values: np.ndarray, F: Factorization | None = None):
    F = F or factorize(blocks)
    dwk = F.solve(blocks.dP_kk @ kappa_values, nonneg=False)
    return float(blocks.dP_1k @ kappa_values + blocks.P_1k @ dwk), dwk


def cycle_quantities(
    blocks: PartitionedBlocks, f: StateFunction, label: str, F: Factorization | None = None
) -> CycleQuantities:
    F = F or factorize(blocks)
    fv = blocks.values_on_A(f)
    if np.any(fv < 0):
        raise ValueError(f"reward {label!r} takes negative values on A")
    w, wk = w_tilde(blocks, fv, F)
    dw, dwk = w_tilde_prime(blocks, wk, F)
    return CycleQuantities(label, w, dw, wk, dwk)


def convergence_sweep(chain: ParametricChain, ns, label: str) -> list[CycleQuantities]:
    f = chain.rewards[label]
    out = []
    for n in ns:
        blocks = build_blocks(chain, chain.partition(n))
        out.append(cycle_quantities(blocks, f, label))
    return out
