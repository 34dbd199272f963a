"""Statevector simulation of ansatz circuits and self-inverse terms.

Qubit ``q`` is bit ``q`` of the basis index. The system register always
occupies the lowest qubits; oracle ancillas (a copy register of the same
width and one sign qubit) and the Hadamard-test ancilla sit above it.

Self-inverse terms can be applied two ways:

* :func:`apply_term_direct` permutes amplitudes with the term's partner
  map and multiplies by its +-1/+-i entries.
* :func:`apply_term_oracle_faithful` runs the location/value oracle
  sequence on the ancilla registers and counts every oracle query.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .decompose import SignOracle, synthesize_oh
from .errors import AncillaNotZeroed, AncillaResidue, RegisterMismatch
from .sparse_core import OneSparseHermitian, PhaseClass, QueryCounter, SelfInverseTerm

MAX_TOTAL_QUBITS = 14

_R2 = 1 / math.sqrt(2)
FIXED_GATES = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "H": np.array([[_R2, _R2], [_R2, -_R2]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "SDG": np.array([[1, 0], [0, -1j]], dtype=complex),
}
ROTATIONS = {"RX", "RY", "RZ"}
TWO_QUBIT = {"CNOT", "CZ"}
GATE_KINDS = set(FIXED_GATES) | ROTATIONS | TWO_QUBIT


def rotation(kind: str, theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "RZ":
        return np.array([[complex(c, -s), 0], [0, complex(c, s)]], dtype=complex)
    raise ValueError(f"not a rotation: {kind}")


@dataclass(frozen=True)
class Gate:
    """``targets`` is ``(control, target)`` for CNOT and the qubit pair for CZ."""

    kind: str
    targets: tuple
    param: Optional[int] = None


@dataclass(frozen=True)
class AnsatzCircuit:
    num_qubits: int
    gates: tuple
    parameter_count: int

    def __post_init__(self):
        for g in self.gates:
            if g.kind not in GATE_KINDS:
                raise ValueError(f"unsupported gate {g.kind!r}")
            arity = 2 if g.kind in TWO_QUBIT else 1
            if len(g.targets) != arity or len(set(g.targets)) != arity:
                raise ValueError(f"{g.kind} needs {arity} distinct target(s), got {g.targets}")
            if any(not 0 <= q < self.num_qubits for q in g.targets):
                raise RegisterMismatch(f"{g} acts outside {self.num_qubits} qubits")
            if (g.kind in ROTATIONS) != (g.param is not None):
                raise ValueError(f"{g}: rotations take exactly one parameter slot")
            if g.param is not None and not 0 <= g.param < self.parameter_count:
                raise ValueError(f"{g}: slot outside [0, {self.parameter_count})")

    @classmethod
    def identity(cls, num_qubits: int) -> "AnsatzCircuit":
        return cls(num_qubits, (), 0)

    @classmethod
    def from_template(cls, num_qubits: int, template: dict) -> "AnsatzCircuit":
        """Layered hardware-efficient circuit.

        Each layer is a rotation on every qubit for every entry of
        ``rotations`` followed by the entangler; one more rotation layer
        closes the circuit.
        """
        layers = int(template.get("layers", 1))
        entangler = template.get("entangler", "cnot_ring")
        rots = [r.upper() for r in template.get("rotations", ["ry", "rz"])]
        if layers < 0 or any(r not in ROTATIONS for r in rots) or not rots:
            raise ValueError(f"bad ansatz template {template!r}")
        if entangler == "cnot_ring":
            pairs = [(q, (q + 1) % num_qubits) for q in range(num_qubits)]
            if num_qubits == 2:
                pairs = pairs[:1]
            kind = "CNOT"
        elif entangler == "cz_line":
            pairs = [(q, q + 1) for q in range(num_qubits - 1)]
            kind = "CZ"
        else:
            raise ValueError(f"unknown entangler {entangler!r}")
        if num_qubits < 2:
            pairs = []

        gates, slot = [], 0

        def rotation_layer():
            nonlocal slot
            for q in range(num_qubits):
                for r in rots:
                    gates.append(Gate(r, (q,), slot))
                    slot += 1

        for _ in range(layers):
            rotation_layer()
            gates.extend(Gate(kind, p) for p in pairs)
        rotation_layer()
        return cls(num_qubits, tuple(gates), slot)


@dataclass
class StateVector:
    amplitudes: np.ndarray
    layout: dict = field(default_factory=dict)

    @property
    def num_qubits(self) -> int:
        return int(self.amplitudes.size).bit_length() - 1

    @classmethod
    def zeros(cls, system: int, oracle_ancillas: bool = False, test_ancilla: bool = False):
        layout = {"system": (0, system)}
        nxt = system
        if oracle_ancillas:
            layout["ancilla_copy"] = (nxt, system)
            layout["sign_ancilla"] = (2 * system, 1)
            nxt = 2 * system + 1
        if test_ancilla:
            layout["test_ancilla"] = (nxt, 1)
            nxt += 1
        if nxt > MAX_TOTAL_QUBITS:
            raise RegisterMismatch(f"{nxt} qubits exceeds the {MAX_TOTAL_QUBITS}-qubit limit")
        amps = np.zeros(1 << nxt, dtype=complex)
        amps[0] = 1.0
        return cls(amps, layout)

    def register(self, name: str) -> tuple[int, int]:
        try:
            return self.layout[name]
        except KeyError:
            raise RegisterMismatch(f"state has no {name!r} register") from None

    def qubit(self, name: str) -> int:
        return self.register(name)[0]

    def copy(self, amplitudes: Optional[np.ndarray] = None) -> "StateVector":
        amps = self.amplitudes.copy() if amplitudes is None else amplitudes
        return StateVector(amps, dict(self.layout))

    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def system_state(self) -> np.ndarray:
        """System amplitudes with every other register in |0>."""
        _, n = self.register("system")
        return self.amplitudes[: 1 << n].copy()


@lru_cache(maxsize=4096)
def _pair_indices(num_qubits: int, target: int, controls: tuple) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(1 << num_qubits)
    mask = ((idx >> target) & 1) == 0
    for c in controls:
        mask &= ((idx >> c) & 1) == 1
    i0 = idx[mask]
    return i0, i0 | (1 << target)


def _apply_1q(amps: np.ndarray, mat: np.ndarray, target: int, controls: tuple = ()) -> None:
    i0, i1 = _pair_indices(amps.size.bit_length() - 1, target, tuple(sorted(controls)))
    a0, a1 = amps[i0], amps[i1]
    amps[i0] = mat[0, 0] * a0 + mat[0, 1] * a1
    amps[i1] = mat[1, 0] * a0 + mat[1, 1] * a1


def apply_gate(amps: np.ndarray, mat: np.ndarray, target: int, controls: Sequence[int] = ()) -> None:
    """In-place (multi-)controlled single-qubit gate."""
    _apply_1q(amps, mat, target, tuple(controls))


def _gate_action(g: Gate, theta, offset: int, adjoint: bool):
    if g.kind in TWO_QUBIT:
        a, b = (q + offset for q in g.targets)
        mat = FIXED_GATES["X"] if g.kind == "CNOT" else FIXED_GATES["Z"]
        return mat, b, (a,)
    mat = FIXED_GATES.get(g.kind)
    if mat is None:
        mat = rotation(g.kind, float(theta[g.param]))
    if adjoint:
        mat = mat.conj().T
    return mat, g.targets[0] + offset, ()


def apply_circuit(
    c: AnsatzCircuit,
    theta,
    s: StateVector,
    target_register: str = "system",
    adjoint: bool = False,
    control: Optional[int] = None,
) -> StateVector:
    offset, width = s.register(target_register)
    if width != c.num_qubits:
        raise RegisterMismatch(
            f"circuit on {c.num_qubits} qubits applied to {width}-qubit register {target_register!r}"
        )
    theta = np.asarray(theta if theta is not None else [], dtype=float)
    if theta.size != c.parameter_count:
        raise RegisterMismatch(f"expected {c.parameter_count} parameters, got {theta.size}")
    out = s.copy()
    extra = () if control is None else (control,)
    gates = reversed(c.gates) if adjoint else c.gates
    for g in gates:
        mat, target, ctrls = _gate_action(g, theta, offset, adjoint)
        _apply_1q(out.amplitudes, mat, target, ctrls + extra)
    return out


def _control_rows(s: StateVector, control: Optional[int], n: int) -> np.ndarray:
    rest = s.amplitudes.size >> n
    if control is None:
        return np.ones(rest, dtype=bool)
    if control < n:
        raise RegisterMismatch("control qubit lies inside the system register")
    return ((np.arange(rest) >> (control - n)) & 1) == 1


def apply_term_direct(
    g: SelfInverseTerm, s: StateVector, control: Optional[int] = None
) -> StateVector:
    offset, n = s.register("system")
    if offset != 0 or n != g.num_qubits:
        raise RegisterMismatch(f"term on {g.num_qubits} qubits, system register has {n}")
    perm, vals = g.table
    view = s.amplitudes.reshape(-1, 1 << n)
    rows = _control_rows(s, control, n)
    new = view.copy()
    moved = np.empty_like(view[rows])
    moved[:, perm] = view[rows] * vals[perm]
    new[rows] = moved
    return s.copy(new.reshape(-1))


def _source_cost(parent: OneSparseHermitian, fn, *args):
    """Run ``fn`` and report (O_F, O_H) queries it made to the parent's source."""
    src = parent.source
    if src is None:
        return fn(*args), None
    before = src.snapshot()
    out = fn(*args)
    after = src.snapshot()
    return out, (after[0] - before[0], after[1] - before[1])


def apply_term_oracle_faithful(
    g: SelfInverseTerm,
    s: StateVector,
    counter: QueryCounter,
    control: Optional[int] = None,
) -> StateVector:
    """Apply ``g`` through O_F, O_H, controlled phase, O_H^-1, swap, O_F^-1.

    Every oracle acts as a basis permutation over the populated branches of
    the register; a coherent query is charged once, at the largest per-branch
    cost in queries to the parent's source. With ``control`` set only the
    phase and the swap are controlled; the uncontrolled oracle pairs cancel
    on the control-off branch.
    """
    parent = g.parent
    if parent is None:
        raise RegisterMismatch("oracle-faithful application needs the term's one-sparse parent")
    sign_oracle: SignOracle = synthesize_oh(g, parent, QueryCounter())
    n = g.num_qubits
    s_off, s_w = s.register("system")
    a1_off, a1_w = s.register("ancilla_copy")
    a2 = s.qubit("sign_ancilla")
    if s_off != 0 or s_w != n or a1_w != n:
        raise RegisterMismatch("register widths do not match the term")
    mask = (1 << n) - 1
    anc_bits = (mask << a1_off) | (1 << a2)

    idx = np.arange(s.amplitudes.size)
    if np.any(s.amplitudes[(idx & anc_bits) != 0]):
        raise AncillaNotZeroed("ancilla registers must start in |0>")

    amps = s.amplitudes.copy()
    native = parent.source is None

    def permute(step):
        nonlocal amps
        support = np.flatnonzero(amps)
        new = np.zeros_like(amps)
        new[[step(int(k)) for k in support]] = amps[support]
        amps = new

    def location_query(event: str):
        cost = 0

        def step(k):
            nonlocal cost
            x = k & mask
            y, c = _source_cost(parent, parent.partner, x)
            cost = max(cost, 1 if native else c[0])
            return k ^ (y << a1_off)

        permute(step)
        counter.record(event, cost)

    def value_query(event: str):
        cost = 0
        use = sign_oracle.compute if event == "O_H" else sign_oracle.uncompute

        def step(k):
            nonlocal cost
            x, y = k & mask, (k >> a1_off) & mask
            before = sign_oracle.counter.parent_oh_queries
            sgn = use(x, y)
            cost = max(cost, sign_oracle.counter.parent_oh_queries - before)
            return k ^ ((sgn < 0) << a2)

        permute(step)
        counter.record(event, cost)

    def controlled(k: int) -> bool:
        return control is None or (k >> control) & 1 == 1

    location_query("O_F")
    value_query("O_H")

    imaginary = g.phase_class is PhaseClass.IMAGINARY
    for k in np.flatnonzero(amps):
        k = int(k)
        if not controlled(k):
            continue
        x, y, b = k & mask, (k >> a1_off) & mask, (k >> a2) & 1
        entry = (-1) ** b * (1j if imaginary and x != y else 1)
        # G|x> = G[y, x]|y>, and G[y, x] is the conjugate of the row-x entry
        amps[k] *= np.conj(entry)

    value_query("O_H_inv")

    def swap(k):
        if not controlled(k):
            return k
        x, z = k & mask, (k >> a1_off) & mask
        return (k & ~mask & ~(mask << a1_off)) | z | (x << a1_off)

    permute(swap)
    location_query("O_F_inv")

    if np.any(amps[(idx & anc_bits) != 0]):
        raise AncillaResidue("ancilla registers not restored after the oracle sequence")
    return s.copy(amps)
