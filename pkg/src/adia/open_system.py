"""Density-matrix evolution of the driven two-transmon system with loss.

Each transmon couples to its environment through amplitude damping (rate
1/T1) and dephasing (rate 1/T2).  Evolution under a pulse schedule uses a
splitting integrator: within every pulse sample the coherent flow is exact
(spectral propagator of the piecewise-constant Hamiltonian) and the
dissipative flow is exact (precomputed superoperator exponential), composed
in a symmetric second-order pattern over fixed substeps.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._linalg import NumericalError
from .spin_system import Schedule, build_ht, spectrum_at
from .propagation import TrotterPlan
from .transmon import DeviceParams, computational_indices, lowering_operator
from .pulse_control import PulseSequence, _segment_propagators, _segment_spectra

__all__ = [
    "DensityMatrix",
    "NoiseParams",
    "DeviceTrajectory",
    "collapse_operators",
    "evolve_density",
    "run_schedule",
    "mixed_fidelity",
    "dominant_component",
]

# 4 dissipative substeps per 1/8 ns pulse sample
_SUBSTEPS_PER_SAMPLE = 4


@dataclass(frozen=True)
class NoiseParams:
    """Per-transmon relaxation and dephasing times in microseconds."""

    t1: tuple = (np.inf, np.inf)
    t2: tuple = (np.inf, np.inf)

    def __post_init__(self) -> None:
        for name in ("t1", "t2"):
            vals = tuple(float(v) for v in getattr(self, name))
            if len(vals) != 2 or any(not v > 0.0 for v in vals):
                raise ValueError("%s needs two positive (or inf) entries" % name)
            object.__setattr__(self, name, vals)

    @property
    def trivial(self) -> bool:
        return all(np.isinf(v) for v in self.t1 + self.t2)


@dataclass(frozen=True)
class DensityMatrix:
    """Validated density matrix, either full 9-dim or reduced 4-dim.

    A reduced computational block may carry trace below one; the missing
    weight is leakage outside the block.
    """

    elements: np.ndarray
    subnormalized: bool = False

    def __post_init__(self) -> None:
        rho = np.asarray(self.elements, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError("density matrix must be square")
        if np.abs(rho - rho.conj().T).max() > 1.0e-10:
            raise ValueError("density matrix must be Hermitian to 1e-10")
        tr = float(np.trace(rho).real)
        if self.subnormalized:
            if not -1.0e-8 < tr <= 1.0 + 1.0e-8:
                raise ValueError("reduced trace must lie in [0, 1]")
        elif abs(tr - 1.0) > 1.0e-8:
            raise ValueError("trace must equal 1 within 1e-8")
        if np.linalg.eigvalsh(rho).min() < -1.0e-8:
            raise ValueError("density matrix must be positive within 1e-8")
        object.__setattr__(self, "elements", rho)

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    @classmethod
    def pure(cls, psi: np.ndarray, subnormalized: bool = False) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        return cls(elements=np.outer(psi, psi.conj()), subnormalized=subnormalized)


@dataclass(frozen=True)
class DeviceTrajectory:
    """Per-propagator record of a noisy schedule run.

    densities hold the reduced 4-dim computational blocks; fidelities and
    energies refer to the instantaneous target ground state and the problem
    Hamiltonian on that block.  leakage is the population outside the
    block; dominant_weight the largest eigenvalue of the full state.
    """

    step_times: np.ndarray
    densities: tuple
    fidelities: np.ndarray
    energies: np.ndarray
    leakage: np.ndarray
    dominant_weights: np.ndarray

    def __post_init__(self) -> None:
        times = np.asarray(self.step_times, dtype=float)
        fids = np.asarray(self.fidelities, dtype=float)
        ens = np.asarray(self.energies, dtype=float)
        leak = np.asarray(self.leakage, dtype=float)
        dom = np.asarray(self.dominant_weights, dtype=float)
        n = times.size
        if not (len(self.densities) == fids.size == ens.size == leak.size == dom.size == n):
            raise ValueError("trajectory fields must share one length")
        if n and np.any(np.diff(times) <= 0.0):
            raise ValueError("step times must increase")
        object.__setattr__(self, "step_times", times)
        object.__setattr__(self, "densities", tuple(self.densities))
        object.__setattr__(self, "fidelities", fids)
        object.__setattr__(self, "energies", ens)
        object.__setattr__(self, "leakage", leak)
        object.__setattr__(self, "dominant_weights", dom)

    @property
    def final_density(self) -> DensityMatrix:
        return self.densities[-1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t_ns,fidelity,energy,leakage,dominant_weight\n")
        for i in range(self.step_times.size):
            buf.write(
                "%.9g,%.12g,%.12g,%.12g,%.12g\n"
                % (
                    self.step_times[i],
                    self.fidelities[i],
                    self.energies[i],
                    self.leakage[i],
                    self.dominant_weights[i],
                )
            )
        return buf.getvalue()


def _times_us(source) -> tuple:
    t1 = tuple(float(v) for v in source.t1)
    t2 = tuple(float(v) for v in source.t2)
    return t1, t2


def collapse_operators(params, dephasing_from_t2_directly: bool = True) -> list:
    """(rate per ns, 9x9 operator) pairs for both transmons.

    Accepts DeviceParams or NoiseParams; infinite times contribute nothing.
    T1 drives the lowering operator a_i, T2 the number operator a_i^dag a_i.
    With dephasing_from_t2_directly=False the dephasing rate is the pure
    rate 1/T2 - 1/(2 T1) instead of the plain 1/T2.
    """
    t1, t2 = _times_us(params)
    levels = getattr(params, "levels_per_transmon", 3)
    low = lowering_operator(levels)
    eye = np.eye(levels)
    site_ops = [np.kron(low, eye), np.kron(eye, low)]
    out = []
    for i in range(2):
        a = site_ops[i]
        if np.isfinite(t1[i]):
            out.append((1.0 / (1000.0 * t1[i]), a))
        rate2 = 0.0
        if np.isfinite(t2[i]):
            rate2 = 1.0 / (1000.0 * t2[i])
            if not dephasing_from_t2_directly:
                if np.isfinite(t1[i]):
                    rate2 -= 1.0 / (2000.0 * t1[i])
                if rate2 < 0.0:
                    raise ValueError("pure dephasing rate is negative for T2 > 2 T1")
        if rate2 > 0.0:
            out.append((rate2, a.conj().T @ a))
    return out


def _dissipator_superoperator(ops: list, dim: int, swapped_order: bool = False) -> np.ndarray:
    """Superoperator of sum_k rate_k D[L_k] acting on row-major vec(rho).

    vec(A rho B) = (A kron B^T) vec(rho).  swapped_order reproduces a
    variant with the anticommutator built from L L^dag instead of L^dag L;
    that generator does not preserve trace and exists only for comparison.
    """
    eye = np.eye(dim)
    total = np.zeros((dim * dim, dim * dim), dtype=complex)
    for rate, op in ops:
        ldl = op.conj().T @ op
        if swapped_order:
            ldl = op @ op.conj().T
        total += rate * (
            np.kron(op, op.conj())
            - 0.5 * np.kron(ldl, eye)
            - 0.5 * np.kron(eye, ldl.T)
        )
    return total


def _noise_source(params: DeviceParams, noise):
    if noise is None:
        return params
    return noise


def evolve_density(
    rho0: np.ndarray,
    pulse: PulseSequence,
    params: DeviceParams,
    noise: NoiseParams | None = None,
    dephasing_from_t2_directly: bool = True,
    swapped_dissipator_order: bool = False,
) -> np.ndarray:
    """Propagate a 9x9 density matrix through one pulse.

    Coherent and dissipative flows are each applied exactly per substep and
    interleaved symmetrically, so the noise-free limit reduces to exact
    unitary conjugation.  Trace drift beyond 1e-6 raises NumericalError.
    """
    rho = np.array(rho0, dtype=complex)
    if rho.shape != (params.dim, params.dim):
        raise ValueError("density matrix must match the device dimension")
    props = _segment_propagators(pulse, params)

    source = _noise_source(params, noise)
    ops = collapse_operators(source, dephasing_from_t2_directly)
    if not ops:
        for s in range(props.shape[0]):
            u = props[s]
            rho = u @ rho @ u.conj().T
        return rho

    # one dissipative substep exponential, reused for every sample
    dt_sub = 1.0 / (pulse.sample_rate * _SUBSTEPS_PER_SAMPLE)
    lind = _dissipator_superoperator(ops, params.dim, swapped_dissipator_order)
    e_full = scipy.linalg.expm(lind * dt_sub)
    e_half = scipy.linalg.expm(lind * (0.5 * dt_sub))

    # exact coherent substep propagators, u_sub^4 = full-sample propagator
    lam, vec = _segment_spectra(pulse, params)
    phase = np.exp(-1.0j * lam * dt_sub)
    subs = (vec * phase[:, None, :]) @ vec.conj().transpose(0, 2, 1)

    # symmetric splitting; half dissipative steps at the pulse edges merge
    # into full steps between coherent substeps
    dim = params.dim
    v = e_half @ rho.reshape(dim * dim)
    nseg = subs.shape[0]
    for s in range(nseg):
        u = subs[s]
        udag = u.conj().T
        for j in range(_SUBSTEPS_PER_SAMPLE):
            rho = u @ v.reshape(dim, dim) @ udag
            if s == nseg - 1 and j == _SUBSTEPS_PER_SAMPLE - 1:
                v = e_half @ rho.reshape(dim * dim)
            else:
                v = e_full @ rho.reshape(dim * dim)
    rho = v.reshape(dim, dim)
    rho = 0.5 * (rho + rho.conj().T)
    if abs(np.trace(rho).real - 1.0) > 1.0e-6:
        raise NumericalError("density matrix trace drifted beyond 1e-6")
    return rho


def run_schedule(
    pulses: list,
    params: DeviceParams,
    noise: NoiseParams | None = None,
    rho0=None,
    *,
    sched: Schedule,
    plan: TrotterPlan,
    pulses_per_step: int = 1,
    dephasing_from_t2_directly: bool = True,
) -> DeviceTrajectory:
    """Run a pulse schedule and record the state after every propagator.

    pulses holds pulses_per_step entries per short-time propagator, in
    execution order.  Records use the algorithmic time grid k*T/n: fidelity
    against the embedded instantaneous ground state, energy of the reduced
    computational block, leakage, and the dominant eigenvalue weight.
    """
    if plan.n * pulses_per_step != len(pulses):
        raise ValueError(
            "expected %d pulses (%d per step), got %d"
            % (plan.n * pulses_per_step, pulses_per_step, len(pulses))
        )
    idx = computational_indices(params.levels_per_transmon)
    if rho0 is None:
        _, ground0 = spectrum_at(sched, 0.0).ground()
        psi = np.zeros(params.dim, dtype=complex)
        psi[list(idx)] = ground0
        rho = np.outer(psi, psi.conj())
    elif isinstance(rho0, DensityMatrix):
        rho = np.array(rho0.elements, dtype=complex)
    else:
        rho = np.array(rho0, dtype=complex)
    if rho.shape != (params.dim, params.dim):
        raise ValueError("initial state must live on the full device space")

    ht = build_ht().matrix()
    dt_step = plan.total_time / plan.n
    times = []
    dens = []
    fids = []
    ens = []
    leaks = []
    doms = []

    def record(step: int, rho_now: np.ndarray) -> None:
        t = step * dt_step
        _, phi = spectrum_at(sched, t).ground()
        reduced = rho_now[np.ix_(idx, idx)]
        tr_red = float(np.trace(reduced).real)
        times.append(t)
        dens.append(DensityMatrix(elements=reduced, subnormalized=True))
        fids.append(mixed_fidelity(rho_now, phi))
        ens.append(float(np.real(np.trace(reduced @ ht)) / max(tr_red, 1.0e-12)))
        leaks.append(1.0 - tr_red)
        doms.append(dominant_component(rho_now)[0])

    record(0, rho)
    for k in range(plan.n):
        for pulse in pulses[k * pulses_per_step : (k + 1) * pulses_per_step]:
            rho = evolve_density(
                rho, pulse, params, noise,
                dephasing_from_t2_directly=dephasing_from_t2_directly,
            )
        record(k + 1, rho)
    return DeviceTrajectory(
        step_times=np.array(times),
        densities=tuple(dens),
        fidelities=np.array(fids),
        energies=np.array(ens),
        leakage=np.array(leaks),
        dominant_weights=np.array(doms),
    )


def mixed_fidelity(rho: np.ndarray, phi: np.ndarray) -> float:
    """sqrt(<phi|rho|phi>); equals |<phi|psi>| when rho is pure psi.

    A 4-dim phi is embedded into the computational block when rho lives on
    the full device space.
    """
    rho = np.asarray(rho, dtype=complex)
    phi = np.asarray(phi, dtype=complex)
    if phi.shape[0] == 4 and rho.shape[0] == 9:
        full = np.zeros(9, dtype=complex)
        full[list(computational_indices(3))] = phi
        phi = full
    if phi.shape[0] != rho.shape[0]:
        raise ValueError("state dimension must match the density matrix")
    val = float(np.real(phi.conj() @ rho @ phi))
    return float(np.sqrt(max(val, 0.0)))


def dominant_component(rho: np.ndarray) -> tuple:
    """Largest eigenvalue of rho and its (phase-fixed) eigenvector."""
    rho = np.asarray(rho, dtype=complex)
    vals, vecs = np.linalg.eigh(rho)
    state = vecs[:, -1]
    pivot = np.argmax(np.abs(state))
    state = state * np.exp(-1.0j * np.angle(state[pivot]))
    return float(vals[-1]), state
