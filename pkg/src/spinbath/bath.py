"""Diagonal bath distributions over binary spin configurations.

A configuration ``b = (b_1, ..., b_N)`` has ordinal ``sum_n b_n 2**(N-1-n)``,
i.e. the first spin is the most significant bit, matching the tensor-product
order ``|b_1 ... b_N>``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

#: largest bath for which the 2**N configurations are enumerated
MAX_ENUMERATED_SPINS = 24

NORMALIZATION_TOL = 1e-12


class CapacityError(ValueError):
    """The requested enumeration exceeds :data:`MAX_ENUMERATED_SPINS`."""


def check_capacity(n_spins: int, limit: int = MAX_ENUMERATED_SPINS) -> None:
    if n_spins > limit:
        raise CapacityError(
            f"exact enumeration needs 2**{n_spins} bath configurations; "
            f"the limit is {limit} spins (reduce the number of bath spins or "
            f"use the factorized product path)"
        )


@lru_cache(maxsize=8)
def _configurations(n_spins: int) -> np.ndarray:
    ordinals = np.arange(2**n_spins, dtype=np.int64)
    shifts = np.arange(n_spins - 1, -1, -1, dtype=np.int64)
    bits = ((ordinals[:, None] >> shifts[None, :]) & 1).astype(np.uint8)
    bits.setflags(write=False)
    return bits


def configurations(n_spins: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """All binary configurations of ``n_spins`` spins as a ``(2**n, n)`` uint8 array.

    ``start``/``stop`` select a block of ordinals without building the full
    table, which keeps memory bounded for large baths.
    """
    check_capacity(n_spins)
    if start == 0 and stop is None and n_spins <= 20:
        return _configurations(n_spins)
    stop = 2**n_spins if stop is None else stop
    ordinals = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(n_spins - 1, -1, -1, dtype=np.int64)
    return ((ordinals[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


@dataclass(frozen=True)
class DiagonalDistribution:
    """Probabilities ``p(b)`` of the bath configurations.

    Exactly one of ``table`` (length ``2**n_spins``) and ``marginals``
    (``P(b_n = 1)`` for independent spins) is set; ``marginals=None`` with
    ``table=None`` is the uniform distribution.
    """

    n_spins: int
    table: np.ndarray | None = None
    marginals: np.ndarray | None = None

    def __post_init__(self):
        if self.n_spins < 0:
            raise ValueError("n_spins must be nonnegative")
        if self.table is not None and self.marginals is not None:
            raise ValueError("give either an explicit table or product marginals, not both")
        if self.table is not None:
            t = np.asarray(self.table, dtype=float)
            if t.shape != (2**self.n_spins,):
                raise ValueError(f"table must have length 2**{self.n_spins}, got {t.shape}")
            if np.any(t < 0):
                raise ValueError("probabilities must be nonnegative")
            if abs(t.sum() - 1.0) > NORMALIZATION_TOL:
                raise ValueError(f"probabilities sum to {t.sum()!r}, not 1")
            object.__setattr__(self, "table", t)
        if self.marginals is not None:
            m = np.asarray(self.marginals, dtype=float)
            if m.shape != (self.n_spins,):
                raise ValueError(f"marginals must have length {self.n_spins}, got {m.shape}")
            if np.any((m < 0) | (m > 1)):
                raise ValueError("marginal probabilities must lie in [0, 1]")
            object.__setattr__(self, "marginals", m)

    @classmethod
    def uniform(cls, n_spins: int) -> "DiagonalDistribution":
        return cls(n_spins)

    @classmethod
    def explicit(cls, table) -> "DiagonalDistribution":
        table = np.asarray(table, dtype=float)
        n = int(round(np.log2(table.size)))
        return cls(n, table=table)

    @classmethod
    def product(cls, marginals) -> "DiagonalDistribution":
        marginals = np.asarray(marginals, dtype=float)
        return cls(marginals.size, marginals=marginals)

    @classmethod
    def point(cls, n_spins: int, ordinal: int) -> "DiagonalDistribution":
        t = np.zeros(2**n_spins)
        t[ordinal] = 1.0
        return cls(n_spins, table=t)

    @property
    def is_uniform(self) -> bool:
        return self.table is None and self.marginals is None

    @property
    def is_product(self) -> bool:
        return self.table is None

    def excitation_probabilities(self) -> np.ndarray:
        """``P(b_n = 1)`` for every spin (only defined for product forms)."""
        if self.is_uniform:
            return np.full(self.n_spins, 0.5)
        if self.marginals is not None:
            return self.marginals
        raise ValueError("explicit tables have no product marginals")

    def probabilities(self, start: int = 0, stop: int | None = None) -> np.ndarray:
        """Explicit ``p(b)`` for a block of ordinals (default: all of them)."""
        check_capacity(self.n_spins)
        stop = 2**self.n_spins if stop is None else stop
        if self.table is not None:
            return self.table[start:stop]
        if self.is_uniform:
            return np.full(stop - start, 2.0**-self.n_spins)
        f = self.marginals
        if start == 0 and stop == 2**self.n_spins:
            p = np.ones(1)
            for fn in f:  # first spin is the most significant bit
                p = np.outer(p, (1.0 - fn, fn)).ravel()
            return p
        bits = configurations(self.n_spins, start, stop)
        return np.prod(np.where(bits == 1, f, 1.0 - f), axis=1)
