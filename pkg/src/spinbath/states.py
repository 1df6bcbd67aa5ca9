"""Two-spin density matrices, dephasing, and negativity.

All 4x4 matrices use the computational basis ordered as
``(|00>, |01>, |10>, |11>)``; the basis index of ``|a1 a2>`` is ``2*a1 + a2``.
A coherence factor matrix ``C`` multiplies the density matrix elementwise, so
``C[i, j]`` suppresses (and rotates) the coherence between basis states
``i`` and ``j``.
"""

from __future__ import annotations

import numpy as np

#: basis labels (a1, a2) in index order
BASIS = ((0, 0), (0, 1), (1, 0), (1, 1))

#: a1 * a2 for each basis index, the occupation of |11>
DOUBLE_EXCITATION = np.array([0.0, 0.0, 0.0, 1.0])

#: (a1, a2) as a (4, 2) array
BASIS_BITS = np.array(BASIS, dtype=float)

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
NORM_TOL = 1e-12


class StateError(ValueError):
    """Raised when a matrix violates a density-matrix or coefficient contract."""


def basis_index(a1: int, a2: int) -> int:
    """Index of ``|a1 a2>`` in the fixed basis ordering."""
    if a1 not in (0, 1) or a2 not in (0, 1):
        raise StateError(f"basis bits must be 0 or 1, got ({a1}, {a2})")
    return 2 * a1 + a2


def basis_label(index: int) -> tuple[int, int]:
    """Inverse of :func:`basis_index`."""
    if index not in (0, 1, 2, 3):
        raise StateError(f"basis index must be in 0..3, got {index}")
    return BASIS[index]


def check_state(rho, *, psd_tol: float = PSD_TOL) -> np.ndarray:
    """Validate a two-spin density matrix and return it as a complex array.

    Accepts a single ``(4, 4)`` matrix or a stack ``(..., 4, 4)``.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape[-2:] != (4, 4):
        raise StateError(f"expected (..., 4, 4) density matrix, got shape {rho.shape}")
    herm = np.abs(rho - np.conj(np.swapaxes(rho, -1, -2))).max()
    if herm > HERMITIAN_TOL:
        raise StateError(f"density matrix not Hermitian (max deviation {herm:.3g})")
    tr = np.trace(rho, axis1=-2, axis2=-1)
    if np.abs(tr - 1.0).max() > TRACE_TOL:
        raise StateError(f"density matrix trace deviates from 1 (trace {tr})")
    lowest = np.linalg.eigvalsh(rho)[..., 0].min()
    if lowest < -psd_tol:
        raise StateError(f"density matrix has negative eigenvalue {lowest:.3g}")
    return rho


def check_coherence(C) -> np.ndarray:
    """Validate a coherence factor matrix (or a stack of them)."""
    C = np.asarray(C, dtype=complex)
    if C.shape[-2:] != (4, 4):
        raise StateError(f"expected (..., 4, 4) coherence matrix, got shape {C.shape}")
    diag = np.diagonal(C, axis1=-2, axis2=-1)
    if np.any(diag != 1.0):
        raise StateError("coherence matrix diagonal must be exactly 1")
    herm = np.abs(C - np.conj(np.swapaxes(C, -1, -2))).max()
    if herm > HERMITIAN_TOL:
        raise StateError(f"coherence matrix not Hermitian (max deviation {herm:.3g})")
    if np.abs(C).max() > 1.0 + 1e-12:
        raise StateError("coherence matrix entries exceed unit modulus")
    return C


def pure_state(amplitudes) -> np.ndarray:
    """Density matrix ``|psi><psi|`` of a normalized two-spin state vector."""
    psi = np.asarray(amplitudes, dtype=complex).reshape(-1)
    if psi.shape != (4,):
        raise StateError(f"expected 4 amplitudes, got {psi.size}")
    norm = np.vdot(psi, psi).real
    if abs(norm - 1.0) > NORM_TOL:
        raise StateError(f"state vector is not normalized (norm^2 = {norm!r})")
    return np.outer(psi, np.conj(psi))


def product_state(psi1, psi2) -> np.ndarray:
    """Density matrix of the product of two normalized single-spin states."""
    return pure_state(np.kron(np.asarray(psi1, complex), np.asarray(psi2, complex)))


def plus_plus() -> np.ndarray:
    """``|++><++|``."""
    return pure_state(np.full(4, 0.5))


def bell_state() -> np.ndarray:
    """``(|00> + |11>)/sqrt(2)`` as a density matrix."""
    return pure_state(np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2.0))


def gate_phases(gate_phase) -> np.ndarray:
    """Elementwise factors ``exp(i*phi*(a1'a2' - a1a2))`` of the controlled-phase gate.

    ``gate_phase`` may be a scalar or an array; the result has shape
    ``np.shape(gate_phase) + (4, 4)``.
    """
    phi = np.asarray(gate_phase, dtype=float)[..., None, None]
    diff = DOUBLE_EXCITATION[None, :] - DOUBLE_EXCITATION[:, None]
    return np.exp(1j * phi * diff)


def apply_dephasing(rho0, C, gate_phase: float = 0.0, *, validate: bool = True) -> np.ndarray:
    """Apply a coherence factor matrix and the controlled-phase gate to ``rho0``.

    Element ``(a, a')`` of the result is
    ``rho0[a, a'] * C[a, a'] * exp(i * gate_phase * (a1'a2' - a1a2))``.
    Stacks of ``C`` (and matching stacks of ``gate_phase``) broadcast.
    """
    if validate:
        rho0 = check_state(rho0)
        C = check_coherence(C)
    return np.asarray(rho0) * np.asarray(C) * gate_phases(gate_phase)


def partial_transpose(rho, spin: int = 0) -> np.ndarray:
    """Partial transpose on ``spin`` (0 = first, 1 = second); stacks allowed."""
    rho = np.asarray(rho)
    lead = rho.shape[:-2]
    r = rho.reshape(lead + (2, 2, 2, 2))
    if spin == 0:
        r = np.swapaxes(r, -4, -2)
    elif spin == 1:
        r = np.swapaxes(r, -3, -1)
    else:
        raise StateError(f"spin must be 0 or 1, got {spin}")
    return r.reshape(lead + (4, 4))


def negativity(rho, *, spin: int = 0, validate: bool = True):
    """Entanglement negativity ``(||rho^T_A||_1 - 1) / 2``.

    Computed as the magnitude of the sum of negative eigenvalues of the partial
    transpose; eigenvalues above ``-1e-10`` count as roundoff and are dropped.
    Works on stacks and returns an array of matching leading shape.
    """
    rho = np.asarray(rho, dtype=complex)
    if validate:
        herm = np.abs(rho - np.conj(np.swapaxes(rho, -1, -2))).max()
        if herm > HERMITIAN_TOL:
            raise StateError(f"density matrix not Hermitian (max deviation {herm:.3g})")
    w = np.linalg.eigvalsh(partial_transpose(rho, spin))
    neg = np.abs(np.where(w < -PSD_TOL, w, 0.0).sum(axis=-1))
    return float(neg) if neg.ndim == 0 else neg
