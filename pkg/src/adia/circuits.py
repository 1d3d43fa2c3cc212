"""Gate algebra on two qubits and decomposition into elementary gates.

Any 4x4 unitary is rewritten as a fixed-shape circuit of exactly three CNOTs
(all control 0, target 1) interleaved with four layers of one-qubit U3 gates,
eight U3 gates in total.  The algorithm works in the Bell (magic) basis: the
invariant spectrum of M M^T pins the entangling content, a three-CNOT interior
circuit is built to carry that content, and the one-qubit factors connecting
the target to the interior come out of a pair of simultaneous real-orthogonal
diagonalizations.  All equalities are up to global phase.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from ._linalg import NumericalError, check_unitary, global_phase_distance
from .propagation import TrotterPlan, short_time_propagator
from .spin_system import Schedule


class StructureError(ValueError):
    """A circuit does not have the gate pattern an operation requires."""


def _wrap_angle(x: float) -> float:
    """Map an angle to the half-open interval (-pi, pi]."""
    return float(np.pi - (np.pi - x) % (2.0 * np.pi))


@dataclass(frozen=True)
class U3Gate:
    theta: float
    phi: float
    lam: float
    qubit: int

    def __post_init__(self):
        for a in (self.theta, self.phi, self.lam):
            if not np.isfinite(a):
                raise ValueError("U3 angles must be finite")
        if self.qubit not in (0, 1):
            raise ValueError(f"qubit must be 0 or 1, got {self.qubit}")
        object.__setattr__(self, "theta", _wrap_angle(self.theta))
        object.__setattr__(self, "phi", _wrap_angle(self.phi))
        object.__setattr__(self, "lam", _wrap_angle(self.lam))


@dataclass(frozen=True)
class CnotGate:
    control: int = 0
    target: int = 1

    def __post_init__(self):
        if {self.control, self.target} != {0, 1}:
            raise ValueError("CNOT needs distinct qubits 0 and 1")


@dataclass(frozen=True)
class RxxGate:
    angle: float

    def __post_init__(self):
        if not np.isfinite(self.angle):
            raise ValueError("RXX angle must be finite")


class OpaqueGate:
    """A two-qubit gate carried as its raw 4x4 unitary."""

    def __init__(self, unitary):
        u = np.array(unitary, dtype=complex)
        check_unitary(u, 1e-10, "opaque gate")
        if u.shape != (4, 4):
            raise ValueError("opaque gate must be 4x4")
        u.setflags(write=False)
        self.unitary = u

    def __repr__(self):
        return "OpaqueGate(4x4)"


@dataclass(frozen=True)
class Circuit:
    gates: tuple
    qubit_count: int = 2

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if isinstance(g, U3Gate) and g.qubit >= self.qubit_count:
                raise ValueError("gate qubit index out of range")

    def __len__(self):
        return len(self.gates)

    def count(self, kind) -> int:
        return sum(1 for g in self.gates if isinstance(g, kind))


# ---------------------------------------------------------------------------
# gate matrices

_ID2 = np.eye(2, dtype=complex)
_SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_HAD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)
_CNOT01 = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
_CNOT10 = np.array(
    [[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex
)
_SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)

# Bell-state (magic) basis columns; conjugation by it turns one-qubit gate
# pairs into real orthogonal matrices.
_MAGIC = (
    np.array(
        [[1, 1j, 0, 0], [0, 0, 1j, 1], [0, 0, 1j, -1], [1, -1j, 0, 0]],
        dtype=complex,
    )
    / np.sqrt(2.0)
)

# Mixing angles used to pick a generic real combination when diagonalizing a
# complex symmetric unitary; retried in order until the residual is clean.
_PHI_SEQUENCE = (0.7431, 2.219, 1.03, 2.87, 0.414)


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    """One-qubit gate with three Euler-style angles.

    Columns: cos(theta/2) on the diagonal up to phases e^{i phi}, e^{i lam};
    (pi/2, 0, pi) is the Hadamard gate exactly, (pi, 0, pi) the X flip.
    """
    c = np.cos(0.5 * theta)
    s = np.sin(0.5 * theta)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
        ],
        dtype=complex,
    )


def _one_qubit_embed(u: np.ndarray, qubit: int) -> np.ndarray:
    if qubit == 0:
        return np.kron(u, _ID2)
    return np.kron(_ID2, u)


def gate_matrix(g) -> np.ndarray:
    """Dense 4x4 matrix of a single gate (qubit 0 is the left tensor factor)."""
    if isinstance(g, U3Gate):
        return _one_qubit_embed(u3_matrix(g.theta, g.phi, g.lam), g.qubit)
    if isinstance(g, CnotGate):
        return _CNOT01 if g.control == 0 else _CNOT10
    if isinstance(g, RxxGate):
        half = 0.5 * g.angle
        return np.cos(half) * np.eye(4, dtype=complex) - 1j * np.sin(half) * np.kron(
            _SX, _SX
        )
    if isinstance(g, OpaqueGate):
        return g.unitary
    raise TypeError(f"unknown gate {g!r}")


def circuit_unitary(c: Circuit) -> np.ndarray:
    """Ordered product of the gate matrices; the first listed gate acts first."""
    u = np.eye(4, dtype=complex)
    for g in c.gates:
        u = gate_matrix(g) @ u
    return u


# ---------------------------------------------------------------------------
# serialization

def circuit_to_text(c: Circuit) -> str:
    """Line format: `U3 q theta phi lambda`, `CNOT c t`, `RXX theta`."""
    lines = []
    for g in c.gates:
        if isinstance(g, U3Gate):
            lines.append(f"U3 {g.qubit} {g.theta:.12g} {g.phi:.12g} {g.lam:.12g}")
        elif isinstance(g, CnotGate):
            lines.append(f"CNOT {g.control} {g.target}")
        elif isinstance(g, RxxGate):
            lines.append(f"RXX {g.angle:.12g}")
        else:
            raise ValueError("opaque gates have no text form")
    return "\n".join(lines) + ("\n" if lines else "")


def circuit_from_text(text: str) -> Circuit:
    gates = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            if parts[0] == "U3" and len(parts) == 5:
                gates.append(
                    U3Gate(
                        qubit=int(parts[1]),
                        theta=float(parts[2]),
                        phi=float(parts[3]),
                        lam=float(parts[4]),
                    )
                )
            elif parts[0] == "CNOT" and len(parts) == 3:
                gates.append(CnotGate(control=int(parts[1]), target=int(parts[2])))
            elif parts[0] == "RXX" and len(parts) == 2:
                gates.append(RxxGate(angle=float(parts[1])))
            else:
                raise ValueError("unrecognized gate line")
        except (ValueError, IndexError) as exc:
            raise ValueError(f"bad circuit line {ln}: {raw!r}") from exc
    return Circuit(gates=tuple(gates))


# ---------------------------------------------------------------------------
# decomposition internals

def _to_su4(u: np.ndarray):
    det = np.linalg.det(u)
    phase = np.angle(det) / 4.0
    return u * np.exp(-1j * phase), phase


def _diag_complex_symmetric(s: np.ndarray) -> np.ndarray:
    """Real orthogonal P with P^T s P diagonal, for unitary symmetric s.

    The real and imaginary parts commute, so a generic real mix of the two has
    the same eigenvectors; a short list of mixing angles guards against an
    unlucky eigenvalue collision in the mix.
    """
    xr, yi = s.real, s.imag
    best = None
    for phi in _PHI_SEQUENCE:
        z = np.cos(phi) * xr + np.sin(phi) * yi
        _, p = np.linalg.eigh(z)
        d = p.T @ s @ p
        off = np.linalg.norm(d - np.diag(np.diag(d)))
        if best is None or off < best[0]:
            best = (off, p)
        if off < 1e-11:
            break
    off, p = best
    if off > 1e-9:
        raise NumericalError(f"joint diagonalization residual {off:.2e}")
    return p


def _split_tensor_product(m: np.ndarray, tol: float = 1e-9):
    """Factor m = e^{i phase} a (x) b with det a = det b = 1."""
    r = m.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3)
    norms = np.linalg.norm(r, axis=(2, 3))
    i0, j0 = np.unravel_index(int(np.argmax(norms)), (2, 2))
    b = r[i0, j0]
    db = np.linalg.det(b)
    if abs(db) < tol:
        raise NumericalError("degenerate block in tensor-product split")
    b = b / np.sqrt(db)
    a = np.array(
        [[np.trace(b.conj().T @ r[i, j]) / 2.0 for j in (0, 1)] for i in (0, 1)]
    )
    da = np.linalg.det(a)
    if abs(da) < tol:
        raise NumericalError("degenerate factor in tensor-product split")
    a = a / np.sqrt(da)
    phase = np.angle(np.trace(np.kron(a, b).conj().T @ m) / 4.0)
    err = np.linalg.norm(m - np.exp(1j * phase) * np.kron(a, b))
    if err > tol:
        raise NumericalError(f"matrix is not a tensor product (residual {err:.2e})")
    return a, b, phase


def _magic_side(m: np.ndarray):
    """Magic-basis representative, its symmetric-square diagonalizer, and the
    invariant diagonal."""
    w = _MAGIC.conj().T @ m @ _MAGIC
    ww = w @ w.T
    p = _diag_complex_symmetric(ww)
    return w, p, np.diag(p.T @ ww @ p)


_PERM4 = tuple(permutations(range(4)))


def _match_spectra(dp: np.ndarray, dq: np.ndarray, tol: float):
    best, bperm = None, None
    for perm in _PERM4:
        d = max(abs(dp[i] - dq[perm[i]]) for i in range(4))
        if best is None or d < best:
            best, bperm = d, perm
    if best > tol:
        return None
    return list(bperm)


def _connect_locals(u, p, dp, v, q, dq, order):
    """Solve su = (a1 x a2) sv (b1 x b2) given matched invariant spectra."""
    q = q[:, order]
    dq = dq[np.array(order)]
    if np.linalg.det(p) < 0:
        p = p.copy()
        p[:, 0] = -p[:, 0]
    if np.linalg.det(q) < 0:
        q = q.copy()
        q[:, 0] = -q[:, 0]
    d = (dp + dq) / 2.0
    d = d / np.abs(d)
    half = np.exp(-1j * np.angle(d) / 2.0)
    ox = half[:, None] * (p.T @ u)
    oy = half[:, None] * (q.T @ v)
    if max(np.linalg.norm(ox.imag), np.linalg.norm(oy.imag)) > 1e-7:
        raise NumericalError("orthogonal factor has an imaginary residue")
    ox, oy = ox.real, oy.real
    left = _MAGIC @ (p @ q.T) @ _MAGIC.conj().T
    right = _MAGIC @ (oy.T @ ox) @ _MAGIC.conj().T
    a1, a2, pl = _split_tensor_product(left)
    b1, b2, pr = _split_tensor_product(right)
    return a1, a2, b1, b2, pl + pr


def _ry(t: float) -> np.ndarray:
    c, s = np.cos(0.5 * t), np.sin(0.5 * t)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _rz(t: float) -> np.ndarray:
    return np.array(
        [[np.exp(-0.5j * t), 0.0], [0.0, np.exp(0.5j * t)]], dtype=complex
    )


def _interior_layers(alpha: float, beta: float, delta: float):
    """One-qubit layers of the three-CNOT interior circuit, in temporal order
    W1, CNOT, W2, CNOT, W3, CNOT, W4; each W is a (qubit0, qubit1) pair.

    The outer Hadamards absorb the direction flips that turn the alternating
    CNOT core into three identically oriented CNOTs.
    """
    w1 = (_HAD, _HAD)
    w2 = (_rz(delta) @ _HAD, _ry(beta) @ _HAD)
    w3 = (_HAD, _HAD @ _ry(alpha))
    w4 = (_HAD, _HAD)
    return w1, w2, w3, w4


def _layers_matrix(w1, w2, w3, w4) -> np.ndarray:
    def lay(w):
        return np.kron(w[0], w[1])

    return lay(w4) @ _CNOT01 @ lay(w3) @ _CNOT01 @ lay(w2) @ _CNOT01 @ lay(w1)


def _u3_from_unitary(w: np.ndarray, qubit: int):
    """Write a 2x2 unitary as e^{i gamma} U3(theta, phi, lam)."""
    m00, m10 = abs(w[0, 0]), abs(w[1, 0])
    theta = 2.0 * np.arctan2(m10, m00)
    if m10 < 1e-12:
        gamma = np.angle(w[0, 0])
        phi = np.angle(w[1, 1]) - gamma
        lam = 0.0
    elif m00 < 1e-12:
        gamma = 0.0
        phi = np.angle(w[1, 0])
        lam = np.angle(-w[0, 1])
    else:
        gamma = np.angle(w[0, 0])
        phi = np.angle(w[1, 0]) - gamma
        lam = np.angle(-w[0, 1]) - gamma
    return U3Gate(theta=theta, phi=phi, lam=lam, qubit=qubit), gamma


def _emit_layer(w_pair, gates: list) -> float:
    phase = 0.0
    for qubit, w in enumerate(w_pair):
        gate, gamma = _u3_from_unitary(w, qubit)
        gates.append(gate)
        phase += gamma
    return phase


def decompose_two_qubit(u: np.ndarray) -> Circuit:
    """Rewrite a 4x4 unitary as 8 U3 gates and 3 CNOTs, exact up to phase.

    The entangling content is read off the magic-basis invariant spectrum; a
    three-CNOT interior circuit carrying the same spectrum is constructed from
    half-angle combinations of the spectrum's phases, searching the finite set
    of half-angle branches until the target's invariants are matched; the
    connecting one-qubit gates then come from paired diagonalizations.  The
    result is verified against the input before being returned.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got {u.shape}")
    check_unitary(u, 1e-10, "decomposition input")

    su, g0 = _to_su4(u)
    mu, p, dp = _magic_side(su)
    gu = _MAGIC.conj().T @ (np.exp(0.25j * np.pi) * _SWAP @ su) @ _MAGIC
    evs = np.linalg.eigvals(gu @ gu.T)
    evs = evs[np.argsort(np.angle(evs))]
    ang4 = np.angle(evs)

    for omit in (3, 0, 1, 2):
        trip = [ang4[i] for i in range(4) if i != omit]
        for perm in permutations(range(3)):
            x, y, z = trip[perm[0]], trip[perm[1]], trip[perm[2]]
            base = np.array([(x + y) / 2.0, (x + z) / 2.0, (z + y) / 2.0])
            for mask in range(8):
                shift = np.array(
                    [(mask >> 2) & 1, (mask >> 1) & 1, mask & 1], dtype=float
                )
                alpha, beta, delta = base + np.pi * shift
                w1, w2, w3, w4 = _interior_layers(alpha, beta, delta)
                v_mat = _layers_matrix(w1, w2, w3, w4)
                sv, gv = _to_su4(v_mat)
                mv, q, dq = _magic_side(sv)
                order = _match_spectra(dp, dq, 1e-6)
                if order is None:
                    continue
                try:
                    a1, a2, b1, b2, ph = _connect_locals(mu, p, dp, mv, q, dq, order)
                except NumericalError:
                    continue
                first = (w1[0] @ b1, w1[1] @ b2)
                last = (a1 @ w4[0], a2 @ w4[1])
                gates: list = []
                extra = _emit_layer(first, gates)
                gates.append(CnotGate(0, 1))
                extra += _emit_layer(w2, gates)
                gates.append(CnotGate(0, 1))
                extra += _emit_layer(w3, gates)
                gates.append(CnotGate(0, 1))
                extra += _emit_layer(last, gates)
                circ = Circuit(gates=tuple(gates))
                if global_phase_distance(circuit_unitary(circ), u) < 1e-10:
                    return circ
    raise NumericalError("two-qubit decomposition exhausted its search branches")


# ---------------------------------------------------------------------------
# circuit builders

_U3_X = (np.pi, 0.0, np.pi)
_U3_H = (np.pi / 2.0, 0.0, np.pi)
_U3_Y_AXIS = (np.pi / 2.0, np.pi / 2.0, np.pi / 2.0)


def _pair(angles) -> list:
    th, ph, la = angles
    return [U3Gate(th, ph, la, qubit=0), U3Gate(th, ph, la, qubit=1)]


def state_prep_prefix() -> list:
    """X on both qubits, then Hadamard on both, as U3 gates.

    Applied to |00> this prepares the uniform-sign-alternating state that is
    the ground state of the transverse-field start Hamiltonian.
    """
    return _pair(_U3_X) + _pair(_U3_H)


def build_adiabatic_circuit(
    sched: Schedule, plan: TrotterPlan, include_state_prep: bool = True
) -> Circuit:
    """State-prep prefix followed by the n decomposed short-time propagators.

    Pulse-level emulation starts from the prepared state directly and
    passes include_state_prep=False to get the propagators alone.
    """
    gates = list(state_prep_prefix()) if include_state_prep else []
    for k in range(1, plan.n + 1):
        step = decompose_two_qubit(short_time_propagator(sched, plan, k))
        gates.extend(step.gates)
    return Circuit(gates=tuple(gates))


def build_fidelity_probe(sched: Schedule, plan: TrotterPlan, k: int) -> Circuit:
    """Inverse of the first k evolution steps plus the prefix inverse.

    Appending this circuit after step k sends the ideal trajectory state to
    |00>, so the 00 outcome probability reads out the squared overlap with the
    step-k reference state.  k = 0 gives the bare prefix inverse.
    """
    if not 0 <= k <= plan.n:
        raise ValueError(f"step index {k} outside 0..{plan.n}")
    gates = []
    for i in range(k, 0, -1):
        inv = short_time_propagator(sched, plan, i).conj().T
        gates.extend(decompose_two_qubit(inv).gates)
    gates.extend(_pair(_U3_H))
    gates.extend(_pair(_U3_X))
    return Circuit(gates=tuple(gates))


def merge_u3_pairs(c: Circuit) -> Circuit:
    """Combine each run of simultaneous one-qubit gates into one 4x4 gate.

    The input must alternate U3 layers with CNOTs (the decomposition shape);
    anything else raises StructureError.  A layer may touch one or both
    qubits; a second gate on the same qubit within a layer is a pattern
    violation.
    """
    merged: list = []
    pending: dict = {}

    def flush():
        if not pending:
            return
        u0 = pending.get(0)
        u1 = pending.get(1)
        m0 = u3_matrix(u0.theta, u0.phi, u0.lam) if u0 is not None else _ID2
        m1 = u3_matrix(u1.theta, u1.phi, u1.lam) if u1 is not None else _ID2
        merged.append(OpaqueGate(np.kron(m0, m1)))
        pending.clear()

    for g in c.gates:
        if isinstance(g, U3Gate):
            if g.qubit in pending:
                raise StructureError("two U3 gates on one qubit inside a layer")
            pending[g.qubit] = g
        elif isinstance(g, CnotGate):
            flush()
            merged.append(g)
        else:
            raise StructureError(f"unexpected gate {g!r} in U3/CNOT pattern")
    flush()
    return Circuit(gates=tuple(merged))


def basis_rotation(axis: str) -> Circuit:
    """Pre-measurement rotation mapping a Pauli product onto the z axis.

    axis "X" uses the Hadamard-equivalent U3 on both qubits, axis "Y" the
    quarter-turn U3 with all angles pi/2.
    """
    if axis == "X":
        return Circuit(gates=tuple(_pair(_U3_H)))
    if axis == "Y":
        return Circuit(gates=tuple(_pair(_U3_Y_AXIS)))
    raise ValueError(f"axis must be 'X' or 'Y', got {axis!r}")
