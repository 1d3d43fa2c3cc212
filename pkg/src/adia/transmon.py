"""Rotating-frame model of two coupled fixed-frequency transmons.

Each transmon keeps its lowest levels_per_transmon Fock states.  With three
levels apiece the joint space is 9-dimensional; the four states with at most
one quantum per transmon form the computational subspace.  Device parameters
are quoted in MHz (linear frequency) and converted to angular rad/ns in one
place only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import check_unitary, mhz_to_rad_per_ns


@dataclass(frozen=True)
class DeviceParams:
    """Anharmonicity alpha and exchange coupling g in MHz; relaxation and
    dephasing times t1, t2 per transmon in microseconds (inf = noiseless)."""

    alpha: float = 200.0
    g: float = 3.0
    levels_per_transmon: int = 3
    t1: tuple = (np.inf, np.inf)
    t2: tuple = (np.inf, np.inf)

    def __post_init__(self):
        if not self.alpha > 0.0:
            raise ValueError("alpha must be positive")
        if self.g < 0.0:
            raise ValueError("g must be nonnegative")
        if self.levels_per_transmon < 2:
            raise ValueError("need at least 2 levels per transmon")
        for name, pair in (("t1", self.t1), ("t2", self.t2)):
            if len(pair) != 2 or any(not (x > 0.0) for x in pair):
                raise ValueError(f"{name} must be two positive (or inf) times")

    @property
    def dim(self) -> int:
        return self.levels_per_transmon**2


def computational_indices(levels: int = 3) -> tuple:
    """Row-major joint indices of |00>, |01>, |10>, |11> (Fock <= 1 each)."""
    return (0, 1, levels, levels + 1)


@dataclass(frozen=True)
class EmbeddedTarget:
    """A device-space unitary acting as a given 4x4 gate on the computational
    indices and as identity on the leakage complement."""

    unitary: np.ndarray
    computational_indices: tuple

    def restriction(self) -> np.ndarray:
        idx = np.array(self.computational_indices)
        return self.unitary[np.ix_(idx, idx)]


def lowering_operator(levels: int) -> np.ndarray:
    """Truncated annihilation operator, a |n> = sqrt(n) |n-1>."""
    if levels < 2:
        raise ValueError("need at least 2 levels")
    return np.diag(np.sqrt(np.arange(1, levels, dtype=float)), k=1).astype(complex)


def _site_operators(levels: int) -> tuple[np.ndarray, np.ndarray]:
    a = lowering_operator(levels)
    eye = np.eye(levels, dtype=complex)
    a1 = np.kron(a, eye)
    a2 = np.kron(eye, a)
    return a1, a2


def drift_hamiltonian(p: DeviceParams) -> np.ndarray:
    """Static device Hamiltonian in rad/ns.

    Anharmonic self-energy -alpha (a_i^dag a_i)^2 on each transmon plus the
    exchange coupling -g (a_1^dag a_2 + h.c.), both converted from MHz.
    """
    a1, a2 = _site_operators(p.levels_per_transmon)
    n1 = a1.conj().T @ a1
    n2 = a2.conj().T @ a2
    anh = mhz_to_rad_per_ns(p.alpha)
    coup = mhz_to_rad_per_ns(p.g)
    h = -anh * (n1 @ n1 + n2 @ n2) - coup * (a1.conj().T @ a2 + a2.conj().T @ a1)
    return 0.5 * (h + h.conj().T)


def control_generators(p: DeviceParams) -> list[np.ndarray]:
    """Dimensionless drive generators [G_I1, G_Q1, G_I2, G_Q2].

    The control Hamiltonian is sum_c convert(eps_c(t)) G_c with channel
    amplitudes eps_c in MHz; the MHz-to-angular conversion happens where the
    Hamiltonian is assembled, not here.
    """
    a1, a2 = _site_operators(p.levels_per_transmon)
    out = []
    for a in (a1, a2):
        out.append(a.conj().T + a)
        out.append(-1.0j * (a.conj().T - a))
    return [out[0], out[1], out[2], out[3]]


def embed_target(u: np.ndarray, levels: int = 3) -> EmbeddedTarget:
    """Lift a 4x4 computational-subspace gate to the full device space,
    acting as identity on every leakage state."""
    u = np.asarray(u, dtype=complex)
    check_unitary(u, 1e-10, "target gate")
    if u.shape != (4, 4):
        raise ValueError(f"target must be 4x4, got {u.shape}")
    dim = levels**2
    idx = np.array(computational_indices(levels))
    big = np.eye(dim, dtype=complex)
    big[np.ix_(idx, idx)] = u
    return EmbeddedTarget(unitary=big, computational_indices=tuple(int(i) for i in idx))
