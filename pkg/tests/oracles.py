"""Independent reference implementations used by the test suite.

Nothing here imports the package internals it checks; each oracle works from
explicit matrices, loops, or full joint-state evolution.
"""

from __future__ import annotations

import itertools

import numpy as np


def negativity_oracle(rho: np.ndarray) -> float:
    """Negativity from an index-by-index partial transpose and general eigvals."""
    pt = np.zeros((4, 4), dtype=complex)
    for a1, a2, b1, b2 in itertools.product(range(2), repeat=4):
        # transpose the first spin: swap a1 <-> b1
        pt[2 * b1 + a2, 2 * a1 + b2] = rho[2 * a1 + a2, 2 * b1 + b2]
    eig = np.linalg.eigvals(pt)
    trace_norm = np.abs(eig).sum()
    return float((trace_norm - 1.0) / 2.0)


def torus_adjacent(p, q, width: int, height: int) -> bool:
    """Same site or one of the eight surrounding sites, with periodic wrap."""
    dx = abs(int(p[0]) - int(q[0])) % width
    dy = abs(int(p[1]) - int(q[1])) % height
    return min(dx, width - dx) <= 1 and min(dy, height - dy) <= 1


def _bits(n: int) -> np.ndarray:
    """All ``2**n`` bit strings with the first spin as the most significant bit."""
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=float)


def step_energy(sys_pos, env_pos, width, height, g_ab, h) -> np.ndarray:
    """Per-step phases ``phi(a, b)`` of the joint basis, shape ``(4, 2**n)``.

    Pair terms couple each system spin to each adjacent bath spin. Three-body
    terms follow the accumulated-phase form: both system spins with one bath
    spin adjacent to either of them, and one system spin with an adjacent bath
    spin ``n`` and a bath spin ``m`` adjacent to ``n``.
    """
    n = len(env_pos)
    lam_ab = np.array([[torus_adjacent(s, e, width, height) for e in env_pos] for s in sys_pos], float)
    lam_bb = np.array(
        [[(i != j) and torus_adjacent(env_pos[i], env_pos[j], width, height) for j in range(n)] for i in range(n)],
        float,
    )
    sys_bits = _bits(2)
    env_bits = _bits(n)
    phi = np.zeros((4, 2**n))
    for ia, a in enumerate(sys_bits):
        for ib, b in enumerate(env_bits):
            total = g_ab * a @ lam_ab @ b
            total += h * a[0] * a[1] * (lam_ab[0] + lam_ab[1]) @ b
            total += h * sum(a[k] * (lam_ab[k] * b) @ (lam_bb @ b) for k in range(2))
            phi[ia, ib] = total
    return phi


def full_state_evolution(rho_a, bath_probs, sys_positions, env_positions, width, height, g_aa, g_ab, h):
    """Reduced two-spin states from exact joint evolution under a diagonal unitary.

    ``sys_positions[s]``/``env_positions[s]`` are the positions during the
    interval from step ``s`` to ``s + 1``. The joint state starts as
    ``rho_a (x) diag(bath_probs)``; the bath is traced out after each step.
    """
    n = env_positions.shape[1]
    dim = 4 * 2**n
    rho = np.kron(rho_a, np.diag(bath_probs)).astype(complex)
    total_phase = np.zeros(dim)
    double = np.kron(np.array([0.0, 0.0, 0.0, 1.0]), np.ones(2**n))
    out = [rho_a.astype(complex).copy()]
    for s in range(len(sys_positions) - 1):
        phi = step_energy(sys_positions[s], env_positions[s], width, height, g_ab, h)
        total_phase += phi.reshape(dim) + g_aa * double
        u = np.exp(-1j * total_phase)
        joint = u[:, None] * rho * np.conj(u)[None, :]
        reduced = np.einsum("aibi->ab", joint.reshape(4, 2**n, 4, 2**n))
        out.append(reduced)
    return np.array(out)


def collision_step_oracle(g_aa, g_ab, n_b) -> np.ndarray:
    """One collision step by explicit trace over ``n_b`` fresh maximally mixed spins.

    Every bath spin couples to both system spins with strength ``g_ab``.
    """
    sys_bits = _bits(2)
    env_bits = _bits(n_b)
    C = np.zeros((4, 4), dtype=complex)
    for i, a in enumerate(sys_bits):
        for j, ap in enumerate(sys_bits):
            phases = []
            for b in env_bits:
                e = g_aa * a[0] * a[1] + g_ab * (a[0] + a[1]) * b.sum()
                ep = g_aa * ap[0] * ap[1] + g_ab * (ap[0] + ap[1]) * b.sum()
                phases.append(np.exp(-1j * (e - ep)))
            C[i, j] = np.mean(phases)
    return C


def thermal_factor_oracle(t, omega_tilde, g_ab, g_bb, beta):
    """Decoherence factor of the molecular model by direct Gibbs enumeration.

    The bath energy of ``b`` is ``omega_tilde . b + sum_{k<n} g_bb[k,n] b_k b_n``;
    the system phase of ``(a, b)`` is ``t * a . g_ab . b``.
    """
    n = len(omega_tilde)
    bits = _bits(n)
    energy = bits @ omega_tilde + 0.5 * np.einsum("bk,kn,bn->b", bits, g_bb, bits)
    w = np.exp(-beta * (energy - energy.min()))
    p = w / w.sum()
    sys_bits = _bits(2)
    C = np.zeros((4, 4), dtype=complex)
    for i, a in enumerate(sys_bits):
        for j, ap in enumerate(sys_bits):
            C[i, j] = p @ np.exp(1j * t * ((ap - a) @ g_ab @ bits.T))
    return C
