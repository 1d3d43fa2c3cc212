"""Two-spin problem definition: Hamiltonians, schedule, exact spectra.

The preparation task interpolates H(t) = f(t) H0 + g(t) HT between a trivial
transverse-field Hamiltonian H0 and a target Hamiltonian HT whose ground state
is entangled.  Energies are angular frequencies in rad/ns throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._linalg import phase_fixed, two_qubit_pauli

# Exact ground energy of the target Hamiltonian, used as a construction-time
# self-check: (1 - 4 sqrt(2)) / 2.
TARGET_GROUND_ENERGY = (1.0 - 4.0 * np.sqrt(2.0)) / 2.0

_AXES = ("I", "X", "Y", "Z")


@dataclass(frozen=True)
class PauliSum:
    """Real linear combination of two-qubit Pauli products.

    coeffs maps (axis0, axis1) pairs such as ("X", "X") to real coefficients
    in rad/ns.  The matrix is Hermitian by construction.
    """

    coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        for key, c in self.coeffs.items():
            if (
                not isinstance(key, tuple)
                or len(key) != 2
                or key[0] not in _AXES
                or key[1] not in _AXES
            ):
                raise ValueError(f"bad Pauli term key {key!r}")
            if not np.isfinite(c):
                raise ValueError(f"non-finite coefficient for term {key!r}")

    def matrix(self) -> np.ndarray:
        m = np.zeros((4, 4), dtype=complex)
        for (a, b), c in self.coeffs.items():
            m += c * two_qubit_pauli(a, b)
        return m


@dataclass(frozen=True)
class Schedule:
    """Interpolation schedule on t in [0, T].

    f(t) weights the trivial Hamiltonian and g(t) = 1 - f(t) the target one,
    so f + g = 1 holds identically.  Supported forms:

      cos2      f = cos^2(pi t / 2T), smooth with vanishing endpoint slope
      linear    f = 1 - t / T
      constant  f = 1, a frozen family used to exercise degenerate paths
    """

    total_time: float
    form: str = "cos2"

    def __post_init__(self):
        if not (np.isfinite(self.total_time) and self.total_time > 0.0):
            raise ValueError(f"total_time must be positive, got {self.total_time}")
        if self.form not in ("cos2", "linear", "constant"):
            raise ValueError(f"unknown schedule form {self.form!r}")

    def weights(self, t: float) -> tuple[float, float]:
        if not 0.0 <= t <= self.total_time * (1.0 + 1e-12):
            raise ValueError(f"t={t} outside [0, {self.total_time}]")
        s = min(t / self.total_time, 1.0)
        if self.form == "cos2":
            f = float(np.cos(0.5 * np.pi * s) ** 2)
        elif self.form == "linear":
            f = 1.0 - s
        else:
            f = 1.0
        return f, 1.0 - f

    def weight_slope(self, s: float) -> float:
        """d f / d s at dimensionless s = t / T, analytic per form."""
        if self.form == "cos2":
            return float(-0.5 * np.pi * np.sin(np.pi * s))
        if self.form == "linear":
            return -1.0
        return 0.0


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues ascending; eigenvectors as matching columns, each with its
    largest-magnitude component rotated to be real positive."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def ground(self) -> tuple[float, np.ndarray]:
        return float(self.eigenvalues[0]), self.eigenvectors[:, 0]


def build_h0() -> PauliSum:
    """Transverse-field start Hamiltonian: sum of sigma^x on each spin."""
    return PauliSum({("X", "I"): 1.0, ("I", "X"): 1.0})


def build_ht() -> PauliSum:
    """Target Hamiltonian with an entangled ground state.

    In the spin-operator convention of this package the couplings read
    -XX + YY + ZZ/2 with a -Z field on each spin, all at unit base rate.
    Construction validates the known ground energy to 1e-12 before returning.
    """
    ht = PauliSum(
        {
            ("X", "X"): -1.0,
            ("Y", "Y"): 1.0,
            ("Z", "Z"): 0.5,
            ("Z", "I"): -1.0,
            ("I", "Z"): -1.0,
        }
    )
    e0 = float(np.linalg.eigvalsh(ht.matrix())[0])
    if abs(e0 - TARGET_GROUND_ENERGY) > 1e-12:
        raise AssertionError(
            f"target ground energy {e0!r} deviates from {TARGET_GROUND_ENERGY!r}"
        )
    return ht


def interpolate(sched: Schedule, t: float) -> tuple[float, float]:
    """Schedule weights (f, g) at time t; raises ValueError outside [0, T]."""
    return sched.weights(t)


def hamiltonian_at(sched: Schedule, t: float) -> np.ndarray:
    """Dense 4x4 interpolated Hamiltonian f(t) H0 + g(t) HT."""
    f, g = sched.weights(t)
    return f * build_h0().matrix() + g * build_ht().matrix()


def spectrum_at(sched: Schedule, t: float) -> Spectrum:
    h = hamiltonian_at(sched, t)
    w, v = np.linalg.eigh(h)
    v = np.column_stack([phase_fixed(v[:, j]) for j in range(v.shape[1])])
    return Spectrum(eigenvalues=w, eigenvectors=v)


def min_gap(sched: Schedule, grid_points: int = 2001) -> tuple[float, float]:
    """Smallest gap between the two lowest levels over a uniform s grid.

    Returns (gap, t_at_min).  The frozen constant form keeps a twofold
    degeneracy in the upper levels but the lowest gap stays positive.
    """
    if grid_points < 2:
        raise ValueError("grid_points must be at least 2")
    ts = np.linspace(0.0, sched.total_time, grid_points)
    best = (np.inf, 0.0)
    for t in ts:
        w = np.linalg.eigvalsh(hamiltonian_at(sched, t))
        gap = float(w[1] - w[0])
        if gap < best[0]:
            best = (gap, float(t))
    return best


def adiabatic_time_scale(sched: Schedule, grid_points: int = 2001) -> float:
    """Heuristic runtime scale max_s ||dH/ds|| / gap_min^2.

    The schedule derivative is analytic; the operator norm of
    dH/ds = f'(s) (H0 - HT) is its largest singular value.
    """
    h0 = build_h0().matrix()
    ht = build_ht().matrix()
    diff = h0 - ht
    diff_norm = float(np.max(np.abs(np.linalg.eigvalsh(diff))))
    ss = np.linspace(0.0, 1.0, grid_points)
    slope_max = float(np.max(np.abs([sched.weight_slope(s) for s in ss])))
    gap, _ = min_gap(sched, grid_points)
    if gap <= 0.0:
        raise ZeroDivisionError("vanishing gap, no finite adiabatic time scale")
    return slope_max * diff_norm / gap**2
