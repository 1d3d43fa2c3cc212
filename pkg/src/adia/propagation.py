"""Closed-system evolution of the two-spin problem.

Two routes to the same endpoint: dense fixed-step integration of the
Schrodinger equation, and a product of short-time propagators on a coarse
grid.  Both record fidelity against the instantaneous ground state and the
target-Hamiltonian expectation along the way.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ._linalg import NumericalError, expm_hermitian
from .spin_system import PauliSum, Schedule, build_ht, hamiltonian_at, spectrum_at

_NODE_RULES = ("left", "midpoint", "right")


@dataclass(frozen=True)
class Trajectory:
    """Time series of states with fidelity and energy readouts.

    times are ns, strictly increasing; states holds one 4-vector per time;
    fidelities are |<ground(t)|psi(t)>|; energies are <H_target> in rad/ns.
    """

    times: np.ndarray
    states: np.ndarray
    fidelities: np.ndarray
    energies: np.ndarray

    def __post_init__(self):
        n = len(self.times)
        if not (len(self.states) == len(self.fidelities) == len(self.energies) == n):
            raise ValueError("trajectory columns must have equal length")
        if n > 1 and not np.all(np.diff(self.times) > 0.0):
            raise ValueError("trajectory times must be strictly increasing")

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_ns", "fidelity", "energy"])
            for t, f, e in zip(self.times, self.fidelities, self.energies):
                w.writerow([f"{t:.9g}", f"{f:.12g}", f"{e:.12g}"])


@dataclass(frozen=True)
class TrotterPlan:
    """Coarse time grid: n steps of length T/n with a node rule that picks
    where inside each step the Hamiltonian is frozen."""

    n: int
    total_time: float
    node_rule: str = "midpoint"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"step count must be >= 1, got {self.n}")
        if self.total_time <= 0.0:
            raise ValueError("total_time must be positive")
        if self.node_rule not in _NODE_RULES:
            raise ValueError(f"node_rule must be one of {_NODE_RULES}")

    @property
    def dt(self) -> float:
        return self.total_time / self.n

    def node_time(self, k: int) -> float:
        """Hamiltonian evaluation time for step k in 1..n."""
        if not 1 <= k <= self.n:
            raise ValueError(f"step index {k} outside 1..{self.n}")
        if self.node_rule == "left":
            return (k - 1) * self.dt
        if self.node_rule == "right":
            return k * self.dt
        return (k - 0.5) * self.dt


def _check_normalized(psi: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if abs(np.linalg.norm(psi) - 1.0) > tol:
        raise ValueError("state vector is not normalized")
    return psi


def fidelity_pure(psi: np.ndarray, phi: np.ndarray) -> float:
    """Overlap magnitude |<phi|psi>| of two normalized pure states."""
    return float(min(abs(np.vdot(phi, psi)), 1.0))


def expectation(psi: np.ndarray, h: PauliSum) -> float:
    """Real expectation <psi|H|psi> for a Hermitian Pauli combination."""
    val = np.vdot(psi, h.matrix() @ psi)
    return float(val.real)


def projector_distance(psi: np.ndarray, phi: np.ndarray) -> float:
    """Operator-norm distance of the rank-1 projectors, sqrt(1 - overlap^2)."""
    f = fidelity_pure(psi, phi)
    return float(np.sqrt(max(1.0 - f * f, 0.0)))


def _record(sched: Schedule, t: float, psi: np.ndarray, ht: PauliSum):
    _, ground = spectrum_at(sched, t).ground()
    return fidelity_pure(psi, ground), expectation(psi, ht)


def evolve_exact(sched: Schedule, psi0: np.ndarray, dt_fine: float | None = None) -> Trajectory:
    """Integrate i d psi/dt = H(t) psi with classic fixed-step RK4.

    dt_fine defaults to T/2000 and must not exceed T/100.  The trajectory
    records every integration node, including t=0.  Norm drift beyond 1e-6
    raises NumericalError.
    """
    psi = _check_normalized(psi0)
    T = sched.total_time
    if dt_fine is None:
        dt_fine = T / 2000.0
    if dt_fine > T / 100.0:
        raise ValueError(f"dt_fine={dt_fine} exceeds T/100={T / 100.0}")
    steps = max(int(round(T / dt_fine)), 100)
    dt = T / steps

    ht = build_ht()
    times = [0.0]
    states = [psi.copy()]
    recs = [_record(sched, 0.0, psi, ht)]

    def rhs(t, v):
        return -1.0j * (hamiltonian_at(sched, t) @ v)

    for k in range(steps):
        t = k * dt
        k1 = rhs(t, psi)
        k2 = rhs(t + 0.5 * dt, psi + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, psi + 0.5 * dt * k2)
        k4 = rhs(t + dt, psi + dt * k3)
        psi = psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        norm = np.linalg.norm(psi)
        if abs(norm - 1.0) > 1e-6:
            raise NumericalError(f"norm drifted to {norm} at t={t + dt}")
        t_next = (k + 1) * dt
        times.append(t_next)
        states.append(psi.copy())
        recs.append(_record(sched, t_next, psi, ht))

    fids, eners = zip(*recs)
    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        fidelities=np.array(fids),
        energies=np.array(eners),
    )


def short_time_propagator(sched: Schedule, plan: TrotterPlan, k: int) -> np.ndarray:
    """exp(-i H(t_k) dt) for step k, via eigendecomposition of H(t_k)."""
    t_k = plan.node_time(k)
    return expm_hermitian(hamiltonian_at(sched, t_k), -1.0j * plan.dt)


def trotter_evolve(sched: Schedule, plan: TrotterPlan, psi0: np.ndarray) -> Trajectory:
    """Apply the n short-time propagators in order, recording after each."""
    psi = _check_normalized(psi0)
    ht = build_ht()
    times = [0.0]
    states = [psi.copy()]
    recs = [_record(sched, 0.0, psi, ht)]
    for k in range(1, plan.n + 1):
        psi = short_time_propagator(sched, plan, k) @ psi
        t = k * plan.dt
        times.append(t)
        states.append(psi.copy())
        recs.append(_record(sched, t, psi, ht))
    fids, eners = zip(*recs)
    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        fidelities=np.array(fids),
        energies=np.array(eners),
    )
