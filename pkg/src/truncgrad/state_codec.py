"""Dense indexing of a finite truncation set and block classification.

States are integer tuples.  A truncation is described by a return state
``z``, a finite core set ``K`` containing ``z`` and a finite truncation set
``A`` containing ``K``.  Every state falls into exactly one of the blocks
``{z}``, ``K' = K - {z}``, ``Atilde = A - K`` or ``A^c``.

Indices are contiguous over ``A`` and ordered block-wise: ``z`` gets index 0,
then ``K'`` and then ``Atilde``, each in lexicographic order.  The
sub-vector of indices ``1..|A|-1`` is the set ``kappa = A - {z}`` used by the
linear algebra; inside ``kappa`` the first ``|K'|`` entries are ``K'``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable

from .errors import ConfigurationError

State = tuple[int, ...]


class Block(enum.IntEnum):
    Z = 0
    KPRIME = 1
    ATILDE = 2
    AC = 3


def as_state(x: int | Iterable[int]) -> State:
    if isinstance(x, (int,)) or hasattr(x, "__index__"):
        return (int(x),)
    return tuple(int(c) for c in x)


@dataclass(frozen=True, eq=False)
class Partition:
    """Ordered partition ``{z}, K', Atilde, A^c`` with a dense index map on ``A``."""

    z: State
    K: frozenset
    A: frozenset
    states: tuple = field(init=False, repr=False)
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        z = as_state(self.z)
        K = frozenset(as_state(x) for x in self.K)
        A = frozenset(as_state(x) for x in self.A)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "A", A)
        if z not in K:
            raise ConfigurationError(f"return state {z} is not in K")
        missing = K - A
        if missing:
            raise ConfigurationError(
                f"K is not contained in A: {len(missing)} core states outside "
                f"the truncation set, e.g. {min(missing)}"
            )
        kprime = sorted(K - {z})
        atilde = sorted(A - K)
        states = (z, *kprime, *atilde)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "_index", {x: i for i, x in enumerate(states)})

    @property
    def size(self) -> int:
        return len(self.states)

    @property
    def n_kprime(self) -> int:
        return len(self.K) - 1

    @property
    def n_atilde(self) -> int:
        return len(self.A) - len(self.K)

    @property
    def n_kappa(self) -> int:
        return self.size - 1

    def classify(self, x) -> Block:
        x = as_state(x)
        if x == self.z:
            return Block.Z
        if x in self.K:
            return Block.KPRIME
        if x in self.A:
            return Block.ATILDE
        return Block.AC

    def in_A(self, x: State) -> bool:
        return x in self._index

    def in_beta(self, x: State) -> bool:
        """True for states outside ``K`` (the set ``Atilde + A^c``)."""
        return x not in self.K

    def encode(self, x) -> int:
        x = as_state(x)
        try:
            return self._index[x]
        except KeyError:
            raise KeyError(f"state {x} is not in the truncation set") from None

    def decode(self, i: int) -> State:
        return self.states[i]

    def enumerate_A(self) -> list[State]:
        return list(self.states)
