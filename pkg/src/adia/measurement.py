"""Shot sampling, expectation estimation, and readout-error mitigation.

Measurement happens in the computational basis after an optional basis
rotation supplied by the circuit layer.  Readout error is modeled per
qubit by flip probabilities p01 (1 read as 0) and p10 (0 read as 1); the
two-qubit confusion matrix is their tensor product and acts on probability
vectors ordered 00, 01, 10, 11.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ReadoutModel",
    "Counts",
    "ConfusionMatrix",
    "CalibrationError",
    "MitigationError",
    "ideal_probabilities",
    "sample_counts",
    "estimate_pauli",
    "estimate_ht",
    "estimate_fidelity",
    "build_confusion",
    "mitigate",
    "error_vs_shots",
]

_OUTCOMES = ("00", "01", "10", "11")

# weights of the target Hamiltonian on its five measured components
_HT_WEIGHTS = {"xx": -1.0, "yy": 1.0, "zz": 0.5, "zi": -1.0, "iz": -1.0}

DEFAULT_SHOTS = 2500


class CalibrationError(ValueError):
    """Calibration counts cannot determine the confusion matrix."""


class MitigationError(ValueError):
    """Confusion matrix cannot be inverted."""


@dataclass(frozen=True)
class ReadoutModel:
    """Per-qubit flip probabilities; index 0 is the first qubit.

    p01[i] is the probability of reading 0 when qubit i holds 1, p10[i]
    the reverse.  Defaults give the plateau structure of a typical
    calibrated device readout.
    """

    p01: tuple = (0.06, 0.06)
    p10: tuple = (0.008, 0.008)

    def __post_init__(self) -> None:
        for name in ("p01", "p10"):
            vals = tuple(float(v) for v in getattr(self, name))
            if len(vals) != 2 or any(not 0.0 <= v <= 1.0 for v in vals):
                raise ValueError("%s needs two probabilities in [0, 1]" % name)
            object.__setattr__(self, name, vals)

    @classmethod
    def error_free(cls) -> "ReadoutModel":
        return cls(p01=(0.0, 0.0), p10=(0.0, 0.0))

    def single_qubit_matrix(self, i: int) -> np.ndarray:
        # columns indexed by prepared state, rows by measured state
        return np.array(
            [
                [1.0 - self.p10[i], self.p01[i]],
                [self.p10[i], 1.0 - self.p01[i]],
            ]
        )

    def confusion_matrix(self) -> "ConfusionMatrix":
        p = np.kron(self.single_qubit_matrix(0), self.single_qubit_matrix(1))
        return ConfusionMatrix(matrix=p)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Column-stochastic 4x4 map from true to measured probabilities."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.matrix, dtype=float)
        if p.shape != (4, 4):
            raise ValueError("confusion matrix must be 4x4")
        if p.min() < -1.0e-12 or p.max() > 1.0 + 1.0e-12:
            raise ValueError("confusion matrix entries must lie in [0, 1]")
        if np.abs(p.sum(axis=0) - 1.0).max() > 1.0e-12:
            raise ValueError("confusion matrix columns must sum to 1")
        object.__setattr__(self, "matrix", p)

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.matrix))


@dataclass(frozen=True)
class Counts:
    """Outcome counts of one measured circuit."""

    shots: dict
    total: int

    def __post_init__(self) -> None:
        shots = {k: int(self.shots.get(k, 0)) for k in _OUTCOMES}
        if any(v < 0 for v in shots.values()):
            raise ValueError("counts must be nonnegative")
        if sum(shots.values()) != self.total or self.total <= 0:
            raise ValueError("counts must sum to a positive total")
        object.__setattr__(self, "shots", shots)

    def frequencies(self) -> np.ndarray:
        return np.array([self.shots[k] for k in _OUTCOMES]) / self.total

    def to_json(self) -> str:
        payload = dict(self.shots)
        payload["total"] = self.total
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Counts":
        payload = json.loads(text)
        total = payload.pop("total")
        return cls(shots=payload, total=total)

    @classmethod
    def from_probabilities(cls, probs: np.ndarray, total: int = 10**12) -> "Counts":
        """Exact-probability stand-in: counts proportional to probs.

        Rounding puts the remainder on the largest entry so the total is
        exact; with the default huge total the quantization error is
        negligible against analytic tolerances of 1e-10.
        """
        probs = np.asarray(probs, dtype=float)
        raw = probs * total
        counts = np.floor(raw).astype(int)
        counts[np.argmax(raw)] += total - counts.sum()
        return cls(shots=dict(zip(_OUTCOMES, counts.tolist())), total=total)


def ideal_probabilities(state_or_rho: np.ndarray) -> np.ndarray:
    """Computational-basis probabilities of a 4-dim state or density matrix."""
    arr = np.asarray(state_or_rho, dtype=complex)
    if arr.ndim == 1:
        if arr.shape[0] != 4:
            raise ValueError("state must have dimension 4")
        probs = np.abs(arr) ** 2
    elif arr.shape == (4, 4):
        probs = np.real(np.diag(arr)).copy()
    else:
        raise ValueError("expected a 4-dim state or 4x4 density matrix")
    probs = np.clip(probs, 0.0, None)
    s = probs.sum()
    if s <= 0.0:
        raise ValueError("probabilities must sum to a positive value")
    return probs / s


def sample_counts(
    state_or_rho: np.ndarray,
    total: int,
    model: ReadoutModel | None = None,
    seed: int = 0,
) -> Counts:
    """Multinomial draw from readout-corrupted basis probabilities."""
    if total < 1:
        raise ValueError("need at least one shot")
    model = model or ReadoutModel.error_free()
    probs = ideal_probabilities(state_or_rho)
    corrupted = model.confusion_matrix().matrix @ probs
    rng = np.random.default_rng(seed)
    draw = rng.multinomial(total, corrupted)
    return Counts(shots=dict(zip(_OUTCOMES, draw.tolist())), total=total)


def _frequencies_of(counts) -> np.ndarray:
    if isinstance(counts, Counts):
        return counts.frequencies()
    freqs = np.asarray(counts, dtype=float)
    if freqs.shape != (4,):
        raise ValueError("expected Counts or a 4-entry probability vector")
    return freqs


def _pair_expectation(freqs: np.ndarray) -> float:
    # eigenvalue pattern of a product of single-qubit observables
    return float(freqs[0] - freqs[1] - freqs[2] + freqs[3])


def _single_expectation(freqs: np.ndarray, qubit: int, axis: str) -> float:
    if qubit == 0:
        m0, m1 = freqs[0] + freqs[1], freqs[2] + freqs[3]
    else:
        m0, m1 = freqs[0] + freqs[2], freqs[1] + freqs[3]
    # spin convention: the up state (bit 1) carries z eigenvalue +1, and the
    # x rotation maps eigenvalue +1 to bit 0
    if axis == "x":
        return float(m0 - m1)
    return float(m1 - m0)


def estimate_pauli(counts, a: str, b: str) -> float:
    """Expectation of a two-qubit component from counts in its own basis.

    a, b name the measured axis per qubit ("x", "y", "z") or "i" for
    identity; identity slots marginalize the same counts.  counts may be a
    Counts record or an already-mitigated probability vector.
    """
    a = a.lower()
    b = b.lower()
    for axis in (a, b):
        if axis not in ("i", "x", "y", "z"):
            raise ValueError("axis must be one of i, x, y, z")
    freqs = _frequencies_of(counts)
    if a == "i" and b == "i":
        return 1.0
    if a != "i" and b != "i":
        if a == "x":
            value = _pair_expectation(freqs)
            return value if b == "x" else -value
        if b == "x":
            return -_pair_expectation(freqs)
        return _pair_expectation(freqs)
    if a == "i":
        return _single_expectation(freqs, 1, b)
    return _single_expectation(freqs, 0, a)


def estimate_ht(counts_z: Counts, counts_x: Counts, counts_y: Counts) -> float:
    """Energy of the target Hamiltonian from three measured bases."""
    return (
        _HT_WEIGHTS["xx"] * estimate_pauli(counts_x, "x", "x")
        + _HT_WEIGHTS["yy"] * estimate_pauli(counts_y, "y", "y")
        + _HT_WEIGHTS["zz"] * estimate_pauli(counts_z, "z", "z")
        + _HT_WEIGHTS["zi"] * estimate_pauli(counts_z, "z", "i")
        + _HT_WEIGHTS["iz"] * estimate_pauli(counts_z, "i", "z")
    )


def estimate_fidelity(counts) -> float:
    """sqrt of the 00-outcome frequency of a fidelity probe circuit."""
    return float(np.sqrt(_frequencies_of(counts)[0]))


def build_confusion(cal00: Counts, cal11: Counts) -> ConfusionMatrix:
    """Per-qubit flip rates from two calibration runs, assembled 4x4.

    cal00 measures a prepared 00 state (its 1-reads give p10 per qubit),
    cal11 a prepared 11 state (its 0-reads give p01 per qubit).
    """
    f00 = cal00.frequencies()
    f11 = cal11.frequencies()
    p10 = (f00[2] + f00[3], f00[1] + f00[3])
    p01 = (f11[0] + f11[1], f11[0] + f11[2])
    if any(v >= 1.0 - 1.0e-12 for v in p10) or any(v >= 1.0 - 1.0e-12 for v in p01):
        raise CalibrationError("calibration counts leave a basis state unidentifiable")
    model = ReadoutModel(p01=p01, p10=p10)
    return model.confusion_matrix()


def mitigate(counts, confusion: ConfusionMatrix) -> np.ndarray:
    """Invert the confusion matrix on measured frequencies.

    counts may be a Counts record or a bare probability vector.  Negative
    entries of the solution are clipped to zero and the vector
    renormalized; callers needing the clip magnitude can compare against
    the unclipped solve.
    """
    p = confusion.matrix
    if abs(np.linalg.det(p)) < 1.0e-12:
        raise MitigationError("confusion matrix is singular")
    solved = np.linalg.solve(p, _frequencies_of(counts))
    clipped = np.clip(solved, 0.0, None)
    s = clipped.sum()
    if s <= 0.0:
        raise MitigationError("mitigated vector vanished after clipping")
    return clipped / s


def error_vs_shots(
    state: np.ndarray | None,
    model: ReadoutModel | None,
    shot_grid: list,
    seeds: list,
) -> list:
    """Mean |frequency - 1/4| against shot count, averaged over seeds.

    Rows are (N, mean_deviation).  The statistical part decays as 1/sqrt(N)
    and a biased readout model adds a floor where the corrupted
    probabilities differ from 1/4.
    """
    if state is None:
        state = np.full(4, 0.5)  # both qubits in the equal superposition
    model = model or ReadoutModel.error_free()
    rows = []
    for total in shot_grid:
        devs = []
        for seed in seeds:
            counts = sample_counts(state, int(total), model, seed)
            devs.append(float(np.mean(np.abs(counts.frequencies() - 0.25))))
        rows.append((int(total), float(np.mean(devs))))
    return rows
