"""Shared builders for random operators and brute-force reference matrices."""
from __future__ import annotations

from functools import reduce

import numpy as np
import pytest

from sparse_vqe.sparse_core import OneSparseHermitian, SparseOracleMatrix

SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|, empties a mode
PAULI_Z = np.diag([1.0, -1.0]).astype(complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)


def random_entry(rng, scale=1.0, real=False):
    v = rng.uniform(-scale, scale)
    if real:
        return v
    return complex(v, rng.uniform(-scale, scale)) / np.sqrt(2)


def random_sparse_dense(rng, n, d, scale=1.0, diag=True, real=False):
    """Dense Hermitian matrix with at most ``d`` nonzeros per row."""
    dim = 1 << n
    h = np.zeros((dim, dim), dtype=complex)
    count = np.zeros(dim, dtype=int)
    pairs = [(x, y) for x in range(dim) for y in range(x, dim)]
    rng.shuffle(pairs)
    for x, y in pairs[: dim * d]:
        if x == y:
            if diag and count[x] < d:
                h[x, x] = rng.uniform(-scale, scale)
                count[x] += 1
        elif count[x] < d and count[y] < d:
            v = random_entry(rng, scale, real)
            h[x, y], h[y, x] = v, np.conj(v)
            count[x] += 1
            count[y] += 1
    return h


def random_sparse(rng, n, d, scale=1.0, **kw) -> SparseOracleMatrix:
    return SparseOracleMatrix.from_dense(random_sparse_dense(rng, n, d, scale, **kw))


def random_one_sparse_dense(rng, n, scale=1.0):
    dim = 1 << n
    perm = rng.permutation(dim)
    h = np.zeros((dim, dim), dtype=complex)
    k = 0
    while k < dim:
        x = perm[k]
        if k + 1 < dim and rng.random() < 0.7:
            y = perm[k + 1]
            v = random_entry(rng, scale)
            h[x, y], h[y, x] = v, np.conj(v)
            k += 2
        else:
            if rng.random() < 0.7:
                h[x, x] = rng.uniform(-scale, scale)
            k += 1
    return h


def random_one_sparse(rng, n, scale=1.0) -> OneSparseHermitian:
    return OneSparseHermitian.from_dense(random_one_sparse_dense(rng, n, scale))


def jw_annihilator(p, num_modes):
    """Jordan-Wigner a_p with mode q stored in bit q of the basis index."""
    factors = []
    for q in reversed(range(num_modes)):
        if q > p:
            factors.append(np.eye(2, dtype=complex))
        elif q == p:
            factors.append(SIGMA_MINUS)
        else:
            factors.append(PAULI_Z)
    return reduce(np.kron, factors)


def jw_monomial(m, num_modes):
    """Dense matrix of a ladder monomial built from Jordan-Wigner factors."""
    dim = 1 << num_modes
    out = np.eye(dim, dtype=complex) * complex(m.coefficient)
    for op in m.ops:
        a = jw_annihilator(op.mode, num_modes)
        out = out @ (a.conj().T if op.kind.value == "+" else a)
    return out


def random_state(rng, n):
    psi = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return psi / np.linalg.norm(psi)


@pytest.fixture
def rng():
    return np.random.default_rng(20260)


# --- acceptance summary --------------------------------------------------------

ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(number: int, passed: bool, detail: str) -> str:
    line = f"[criterion {number}] {'PASS' if passed else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
