"""Strictly Markovian collision-model reference for the lattice dephasing.

In every step both system spins interact with a fresh batch of ``n_b``
maximally mixed environment spins; the reduced dynamics is an elementwise
multiplication of the density matrix by a fixed coefficient matrix, which
already contains the controlled-phase gate increment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .states import check_state


@dataclass(frozen=True)
class CollisionParams:
    g_aa_dt: float = 0.05
    g_ab_dt: float = 0.025
    n_b: int = 8

    def __post_init__(self):
        if self.n_b < 0:
            raise ValueError(f"n_b must be nonnegative, got {self.n_b}")


def collision_coefficients(params: CollisionParams) -> np.ndarray:
    """One-step coefficient matrix ``C_M`` in the (00, 01, 10, 11) basis."""
    n, g, gab = params.n_b, params.g_aa_dt, params.g_ab_dt
    single = np.exp(0.5j * n * gab) * np.cos(0.5 * gab) ** n
    double = np.exp(1j * (g + n * gab)) * np.cos(gab) ** n
    C = np.ones((4, 4), dtype=complex)
    C[0, 1] = C[0, 2] = single
    C[0, 3] = double
    C[1, 2] = 1.0
    C[1, 3] = C[2, 3] = np.exp(1j * g) * single
    upper = np.triu_indices(4, 1)
    C[upper[1], upper[0]] = np.conj(C[upper])
    return C


def evolve_collision(rho0, params: CollisionParams, n_steps: int) -> np.ndarray:
    """States ``rho_0 .. rho_{n_steps}`` as an ``(n_steps + 1, 4, 4)`` array."""
    rho0 = check_state(rho0)
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    C = collision_coefficients(params)
    j = np.arange(n_steps + 1)[:, None, None]
    return rho0[None] * C[None] ** j
