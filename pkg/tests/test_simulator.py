from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparse_vqe.decompose import bit_decompose_one_sparse, decompose_sparse
from sparse_vqe.errors import AncillaNotZeroed, RegisterMismatch
from sparse_vqe.fermion import decompose_monomials, hopping
from sparse_vqe.simulator import (
    AnsatzCircuit,
    Gate,
    StateVector,
    apply_circuit,
    apply_term_direct,
    apply_term_oracle_faithful,
)
from sparse_vqe.sparse_core import (
    OneSparseHermitian,
    PhaseClass,
    QueryCounter,
    SparseOracleMatrix,
    reconstruct_dense,
)

from conftest import PAULI_X, PAULI_Y, PAULI_Z, random_one_sparse_dense, random_sparse_dense, random_state

P0 = np.diag([1, 0]).astype(complex)
P1 = np.diag([0, 1]).astype(complex)
SINGLE = {
    "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z,
    "H": np.array([[1, 1], [1, -1]]) / np.sqrt(2),
    "S": np.diag([1, 1j]), "SDG": np.diag([1, -1j]),
}


def embed(ops: dict, n: int) -> np.ndarray:
    """Kronecker product with ``ops[q]`` on qubit q (bit q of the index)."""
    return reduce(np.kron, [ops.get(q, np.eye(2)) for q in reversed(range(n))])


def dense_gate(g: Gate, theta, n: int) -> np.ndarray:
    if g.kind in ("CNOT", "CZ"):
        a, b = g.targets
        mat = PAULI_X if g.kind == "CNOT" else PAULI_Z
        return embed({a: P0}, n) + embed({a: P1, b: mat}, n)
    if g.kind in SINGLE:
        mat = SINGLE[g.kind]
    else:
        pauli = {"RX": PAULI_X, "RY": PAULI_Y, "RZ": PAULI_Z}[g.kind]
        t = theta[g.param]
        mat = np.cos(t / 2) * np.eye(2) - 1j * np.sin(t / 2) * pauli
    return embed({g.targets[0]: mat}, n)


def dense_circuit(c: AnsatzCircuit, theta) -> np.ndarray:
    u = np.eye(1 << c.num_qubits, dtype=complex)
    for g in c.gates:
        u = dense_gate(g, theta, c.num_qubits) @ u
    return u


def random_circuit(rng, n, depth=12) -> AnsatzCircuit:
    kinds = list(SINGLE) + ["RX", "RY", "RZ"] + (["CNOT", "CZ"] if n > 1 else [])
    gates, slot = [], 0
    for _ in range(depth):
        k = kinds[rng.integers(len(kinds))]
        if k in ("CNOT", "CZ"):
            a, b = rng.choice(n, size=2, replace=False)
            gates.append(Gate(k, (int(a), int(b))))
        elif k.startswith("R"):
            gates.append(Gate(k, (int(rng.integers(n)),), slot))
            slot += 1
        else:
            gates.append(Gate(k, (int(rng.integers(n)),)))
    return AnsatzCircuit(n, tuple(gates), slot)


def state_with(psi, oracle=False, test=False):
    n = int(psi.size).bit_length() - 1
    s = StateVector.zeros(n, oracle_ancillas=oracle, test_ancilla=test)
    s.amplitudes[:] = 0
    s.amplitudes[: psi.size] = psi
    return s


# --- circuits ----------------------------------------------------------------------


def test_hadamard_on_zero():
    c = AnsatzCircuit(1, (Gate("H", (0,)),), 0)
    out = apply_circuit(c, [], StateVector.zeros(1))
    assert np.allclose(out.amplitudes, [2**-0.5, 2**-0.5])


def test_zero_angle_rz_is_identity():
    c = AnsatzCircuit(1, (Gate("RZ", (0,), 0),), 1)
    psi = random_state(np.random.default_rng(1), 1)
    assert np.allclose(apply_circuit(c, [0.0], state_with(psi)).amplitudes, psi)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 4))
def test_circuit_matches_dense(seed, n):
    rng = np.random.default_rng(seed)
    c = random_circuit(rng, n)
    theta = rng.uniform(-np.pi, np.pi, c.parameter_count)
    psi = random_state(rng, n)
    out = apply_circuit(c, theta, state_with(psi))
    assert np.allclose(out.amplitudes, dense_circuit(c, theta) @ psi, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_adjoint_round_trip(seed):
    rng = np.random.default_rng(seed)
    c = random_circuit(rng, 3, depth=20)
    theta = rng.uniform(-np.pi, np.pi, c.parameter_count)
    psi = random_state(rng, 3)
    s = apply_circuit(c, theta, state_with(psi))
    back = apply_circuit(c, theta, s, adjoint=True)
    assert abs(np.vdot(psi, back.amplitudes)) ** 2 >= 1 - 1e-12


def test_controlled_circuit_matches_dense():
    rng = np.random.default_rng(7)
    c = random_circuit(rng, 2)
    theta = rng.uniform(-np.pi, np.pi, c.parameter_count)
    u = dense_circuit(c, theta)
    s = StateVector.zeros(2, test_ancilla=True)
    s.amplitudes[:] = random_state(rng, 3)
    t = s.qubit("test_ancilla")
    out = apply_circuit(c, theta, s, control=t)
    controlled = np.kron(P0, np.eye(4)) + np.kron(P1, u)
    assert np.allclose(out.amplitudes, controlled @ s.amplitudes, atol=1e-12)


def test_norm_preserved_over_long_sequence():
    rng = np.random.default_rng(3)
    c = random_circuit(rng, 4, depth=1000)
    theta = rng.uniform(-np.pi, np.pi, c.parameter_count)
    out = apply_circuit(c, theta, StateVector.zeros(4))
    assert abs(out.norm() - 1) < 1e-10


def test_circuit_validation():
    with pytest.raises(RegisterMismatch):
        AnsatzCircuit(1, (Gate("X", (1,)),), 0)
    with pytest.raises(ValueError):
        AnsatzCircuit(1, (Gate("T", (0,)),), 0)
    with pytest.raises(ValueError):
        AnsatzCircuit(1, (Gate("RY", (0,)),), 1)
    with pytest.raises(ValueError):
        AnsatzCircuit(2, (Gate("CNOT", (0, 0)),), 0)
    c = AnsatzCircuit(1, (Gate("RY", (0,), 0),), 1)
    with pytest.raises(RegisterMismatch):
        apply_circuit(c, [0.1, 0.2], StateVector.zeros(1))
    with pytest.raises(RegisterMismatch):
        apply_circuit(c, [0.1], StateVector.zeros(2))


def test_template_expansion():
    c = AnsatzCircuit.from_template(3, {"layers": 2, "entangler": "cnot_ring", "rotations": ["ry", "rz"]})
    assert c.parameter_count == 3 * 2 * 3
    assert sum(g.kind == "CNOT" for g in c.gates) == 6
    c = AnsatzCircuit.from_template(3, {"layers": 1, "entangler": "cz_line", "rotations": ["ry"]})
    assert c.parameter_count == 6
    assert [g.targets for g in c.gates if g.kind == "CZ"] == [(0, 1), (1, 2)]
    assert AnsatzCircuit.from_template(3, {"layers": 1}) == AnsatzCircuit.from_template(3, {"layers": 1})
    with pytest.raises(ValueError):
        AnsatzCircuit.from_template(2, {"entangler": "ring"})


# --- term application -----------------------------------------------------------------


def pauli_terms(mat):
    return bit_decompose_one_sparse(OneSparseHermitian.from_dense(mat), 1)


def real_plus(terms):
    return next(t for _, t in terms if t.phase_class is PhaseClass.REAL)


def test_direct_pauli_x_and_z():
    gx = real_plus(pauli_terms(PAULI_X))
    assert np.allclose(apply_term_direct(gx, state_with(np.array([1, 0j]))).amplitudes, [0, 1])
    gz = real_plus(pauli_terms(PAULI_Z))
    assert np.allclose(apply_term_direct(gz, state_with(np.array([0, 1 + 0j]))).amplitudes, [0, -1])


def test_direct_imaginary_off_diagonal():
    terms = pauli_terms(PAULI_Y)
    for _, g in terms:
        if g.phase_class is PhaseClass.IMAGINARY:
            out = apply_term_direct(g, state_with(np.array([1, 0j])))
            assert np.allclose(out.amplitudes, reconstruct_dense(g) @ [1, 0])
            assert abs(abs(out.amplitudes[1]) - 1) < 1e-15


def test_oracle_pauli_x_counts():
    g = real_plus(pauli_terms(PAULI_X))
    counter = QueryCounter()
    out = apply_term_oracle_faithful(g, StateVector.zeros(1, oracle_ancillas=True), counter)
    expect = np.zeros(8)
    expect[1] = 1
    assert np.array_equal(out.amplitudes, expect)
    assert counter.sequence_counts() == (1, 1, 1, 1)
    assert counter.events == ["O_F", "O_H", "O_H_inv", "O_F_inv"]


def check_oracle_against_direct(g, psi, control_bit=None):
    n = g.num_qubits
    s = state_with(psi, oracle=True, test=control_bit is not None)
    control = None
    if control_bit is not None:
        control = s.qubit("test_ancilla")
        base = s.amplitudes[: 1 << n].copy()
        s.amplitudes[:] = 0
        s.amplitudes[: 1 << n] = base * np.sqrt(0.5)
        s.amplitudes[(1 << control) : (1 << control) + (1 << n)] = base * np.sqrt(0.5)
    counter = QueryCounter()
    out = apply_term_oracle_faithful(g, s, counter, control=control)
    dense = reconstruct_dense(g)
    if control is None:
        expect = dense @ psi
        got = out.amplitudes[: 1 << n]
    else:
        expect = np.concatenate([psi, dense @ psi]) * np.sqrt(0.5)
        got = np.concatenate([out.amplitudes[: 1 << n], out.amplitudes[1 << control : (1 << control) + (1 << n)]])
    fid = abs(np.vdot(expect, got)) ** 2
    assert fid >= 1 - 1e-12
    assert abs(np.linalg.norm(got) - 1) < 1e-12  # nothing left in the ancillas
    assert counter.total == 4
    assert counter.sequence_counts() == (1, 1, 1, 1)
    return counter


def test_oracle_random_sparse_terms():
    rng = np.random.default_rng(12)
    h = SparseOracleMatrix.from_dense(random_sparse_dense(rng, 3, 3))
    terms = decompose_sparse(h, 0.1)
    for _, g in terms:
        counter = check_oracle_against_direct(g, random_state(rng, 3))
        assert counter.parent_total <= 6


def test_oracle_native_terms_cost_four():
    terms = decompose_monomials(hopping(0, 1), 2, 0.1)
    rng = np.random.default_rng(1)
    for _, g in terms:
        counter = check_oracle_against_direct(g, random_state(rng, 2))
        assert counter.parent_total == 4


def test_oracle_superposition():
    g = real_plus(bit_decompose_one_sparse(OneSparseHermitian.from_dense(random_one_sparse_dense(np.random.default_rng(2), 2)), 2))
    psi = np.zeros(4, dtype=complex)
    psi[[0, 3]] = 2**-0.5
    check_oracle_against_direct(g, psi)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 4))
def test_oracle_equals_direct_controlled(seed, n):
    rng = np.random.default_rng(seed)
    h = SparseOracleMatrix.from_dense(random_sparse_dense(rng, n, 2))
    terms = decompose_sparse(h, 0.3)
    _, g = terms[int(rng.integers(len(terms)))]
    check_oracle_against_direct(g, random_state(rng, n), control_bit=True)


def test_oracle_requires_zeroed_ancillas():
    g = real_plus(pauli_terms(PAULI_X))
    s = StateVector.zeros(1, oracle_ancillas=True)
    s.amplitudes[:] = 0
    s.amplitudes[2] = 1
    with pytest.raises(AncillaNotZeroed):
        apply_term_oracle_faithful(g, s, QueryCounter())


def test_oracle_needs_registers():
    g = real_plus(pauli_terms(PAULI_X))
    with pytest.raises(RegisterMismatch):
        apply_term_oracle_faithful(g, StateVector.zeros(1), QueryCounter())


def test_qubit_limit():
    with pytest.raises(RegisterMismatch):
        StateVector.zeros(7, oracle_ancillas=True, test_ancilla=True)
