"""Dense linear-algebra helpers shared across the package.

Single-qubit operator conventions live here so every module agrees on them.
The computational basis is ordered |0>, |1> with |1> the spin-up state of the
two-spin problem.  sigma_z is diagonal (-1, +1) so that |1> carries spin
projection +1; the sign of sigma_y then follows from sigma_x sigma_y = i sigma_z
with sigma_x kept in its usual off-diagonal form.
"""

from __future__ import annotations

import numpy as np

SIGMA_I = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, 1.0j], [-1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)

PAULIS = {"I": SIGMA_I, "X": SIGMA_X, "Y": SIGMA_Y, "Z": SIGMA_Z}


class NumericalError(RuntimeError):
    """A numerical routine left its guaranteed accuracy envelope."""


def two_qubit_pauli(a: str, b: str) -> np.ndarray:
    """Product operator sigma^a on qubit 0 tensor sigma^b on qubit 1."""
    return np.kron(PAULIS[a], PAULIS[b])


def expm_hermitian(h: np.ndarray, scale: complex = -1.0j) -> np.ndarray:
    """exp(scale * h) for Hermitian h via eigendecomposition."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(scale * w)) @ v.conj().T


def mhz_to_rad_per_ns(f_mhz):
    """Convert a linear frequency in MHz to angular rad/ns.

    This is the only place the 2 pi and the unit prefactor appear; every
    Hamiltonian assembled from MHz-valued couplings goes through it.
    """
    return 2.0e-3 * np.pi * np.asarray(f_mhz, dtype=float)


def phase_fixed(v: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the largest-magnitude entry is real positive."""
    k = int(np.argmax(np.abs(v)))
    a = v[k]
    if abs(a) == 0.0:
        return v
    return v * (abs(a) / a)


def global_phase_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Frobenius distance between two matrices minimized over a global phase."""
    t = abs(np.trace(u.conj().T @ v))
    gap = np.linalg.norm(u) ** 2 + np.linalg.norm(v) ** 2 - 2.0 * t
    return float(np.sqrt(max(gap, 0.0)))


def check_unitary(u: np.ndarray, tol: float = 1e-10, what: str = "matrix") -> None:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"{what} must be square, got shape {u.shape}")
    err = np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0]))
    if err > tol:
        raise ValueError(f"{what} is not unitary: deviation {err:.3e} exceeds {tol:.1e}")
