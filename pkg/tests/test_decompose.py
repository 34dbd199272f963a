import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparse_vqe.decompose import (
    bit_decompose_one_sparse,
    choose_num_bits,
    color_decompose,
    decompose_sparse,
    least_power_of_two_above,
    measured_error,
    prune_cancelling_pairs,
    synthesize_oh,
    term_count_bound,
)
from sparse_vqe.errors import InvalidTolerance, MismatchedParent
from sparse_vqe.sparse_core import (
    Branch,
    OneSparseHermitian,
    PhaseClass,
    QueryCounter,
    SparseOracleMatrix,
    reconstruct_dense,
    validate,
)

from conftest import PAULI_X, PAULI_Z, random_one_sparse_dense, random_sparse_dense


def terms_by(terms, cls, l, branch):
    (hit,) = [(c, t) for c, t in terms if t.phase_class is cls and t.bit_index == l and t.branch is branch]
    return hit


# --- bit counts --------------------------------------------------------------


def test_choose_num_bits_examples():
    assert choose_num_bits(1.5, 0.1) == 5
    assert 4 * choose_num_bits(1.5, 0.1) == 20
    assert choose_num_bits(1.0, 1.5) == 1


@pytest.mark.parametrize("gamma", [0.0, -1.0, float("inf"), float("nan")])
def test_choose_num_bits_rejects(gamma):
    with pytest.raises(InvalidTolerance):
        choose_num_bits(1.0, gamma)


def test_lambda_is_strictly_above():
    assert least_power_of_two_above(1.0) == 2.0
    assert least_power_of_two_above(1.5) == 2.0
    assert least_power_of_two_above(0.3) == 0.5
    assert least_power_of_two_above(4.0) == 8.0


@settings(max_examples=200, deadline=None)
@given(norm=st.floats(1e-3, 1e3), gamma=st.floats(1e-6, 10))
def test_choose_num_bits_formula(norm, gamma):
    L = choose_num_bits(norm, gamma)
    assert L == max(1, math.ceil(math.log2(math.sqrt(2) * norm / gamma)))


# --- one-sparse bit decomposition -------------------------------------------------


def test_one_point_five_x():
    h = OneSparseHermitian.from_dense(1.5 * PAULI_X)
    terms = bit_decompose_one_sparse(h, 2)
    assert len(terms) == 8
    assert terms.meta["Lambda"] == 2.0
    for l, coef in ((1, 0.5), (2, 0.25)):
        for b in Branch:
            c, t = terms_by(terms, PhaseClass.REAL, l, b)
            assert c == coef
            assert np.array_equal(reconstruct_dense(t), PAULI_X)
        cp, tp = terms_by(terms, PhaseClass.IMAGINARY, l, Branch.PLUS)
        cm, tm = terms_by(terms, PhaseClass.IMAGINARY, l, Branch.MINUS)
        assert not np.any(cp * reconstruct_dense(tp) + cm * reconstruct_dense(tm))
    assert np.array_equal(terms.dense(), 1.5 * PAULI_X)


def test_pauli_x_single_bit():
    terms = bit_decompose_one_sparse(OneSparseHermitian.from_dense(PAULI_X), 1)
    assert len(terms) == 4
    assert np.array_equal(terms.dense(), PAULI_X)


def test_imaginary_entry():
    y = OneSparseHermitian.from_dense(0.75 * np.array([[0, -1j], [1j, 0]]))
    terms = bit_decompose_one_sparse(y, 3)
    assert np.array_equal(terms.dense(), reconstruct_dense(y))


def test_random_one_sparse_bound():
    rng = np.random.default_rng(5)
    for _ in range(10):
        dense = random_one_sparse_dense(rng, 4)
        h = OneSparseHermitian.from_dense(dense)
        L = choose_num_bits(h.max_norm, 1e-3)
        terms = bit_decompose_one_sparse(h, L)
        assert len(terms) == 4 * L
        assert measured_error(terms, dense) <= terms.residual_error_bound
        assert measured_error(terms, dense) <= 1e-3


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 4), L=st.integers(1, 8))
def test_every_term_self_inverse_and_hermitian(seed, n, L):
    rng = np.random.default_rng(seed)
    h = OneSparseHermitian.from_dense(random_one_sparse_dense(rng, n, 1.5))
    terms = bit_decompose_one_sparse(h, L)
    eye = np.eye(1 << n)
    for c, t in terms:
        g = reconstruct_dense(t)
        assert np.array_equal(g @ g, eye)
        assert np.array_equal(g, g.conj().T)
        assert validate(t).ok
        assert c > 0


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), L=st.integers(1, 6))
def test_exact_when_representable(seed, L):
    rng = np.random.default_rng(seed)
    step = 2.0 / 2**L  # last bit weight with Lambda = 2
    dense = np.zeros((8, 8), dtype=complex)
    dense[0, 0] = 1.0  # pins Lambda at 2
    for x, y in ((1, 2), (3, 6), (4, 7)):
        # parts up to 1 keep |v| below 2
        v = complex(*rng.integers(-(2 ** (L - 1)), 2 ** (L - 1) + 1, size=2)) * step
        dense[x, y], dense[y, x] = v, v.conjugate()
    dense[5, 5] = rng.integers(-(2**L) + 1, 2**L) * step
    h = OneSparseHermitian.from_dense(dense)
    assert np.array_equal(bit_decompose_one_sparse(h, L).dense(), dense)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), L=st.integers(1, 6))
def test_branch_cancellation(seed, L):
    rng = np.random.default_rng(seed)
    dense = random_one_sparse_dense(rng, 3)
    h = OneSparseHermitian.from_dense(dense)
    terms = bit_decompose_one_sparse(h, L)
    Lam = terms.meta["Lambda"]
    for cls, part in ((PhaseClass.REAL, dense.real), (PhaseClass.IMAGINARY, dense.imag)):
        codes = np.minimum(np.floor(np.abs(part) * 2**L / Lam + 0.5), 2**L - 1).astype(int)
        for l in range(1, L + 1):
            bit = (codes >> (L - l)) & 1
            cp, tp = terms_by(terms, cls, l, Branch.PLUS)
            cm, tm = terms_by(terms, cls, l, Branch.MINUS)
            total = cp * reconstruct_dense(tp) + cm * reconstruct_dense(tm)
            stored = dense != 0
            assert np.array_equal(total[stored] != 0, bit[stored] == 1)


# --- value oracle -----------------------------------------------------------------


def test_synthesize_oh_examples():
    h = OneSparseHermitian.from_dense(1.5 * PAULI_X)
    terms = bit_decompose_one_sparse(h, 2)
    _, re_plus = terms_by(terms, PhaseClass.REAL, 1, Branch.PLUS)
    counter = QueryCounter()
    oh = synthesize_oh(re_plus, h, counter)
    assert oh(0) == 1
    assert counter.oh_queries == 2
    _, im_plus = terms_by(terms, PhaseClass.IMAGINARY, 1, Branch.PLUS)
    oh = synthesize_oh(im_plus, h, QueryCounter())
    assert oh(0) == 1
    assert oh(1) == -1


def test_synthesize_oh_agrees_with_sign():
    rng = np.random.default_rng(9)
    h = OneSparseHermitian.from_dense(random_one_sparse_dense(rng, 3))
    for _, t in bit_decompose_one_sparse(h, 4):
        counter = QueryCounter()
        oh = synthesize_oh(t, h, counter)
        assert [oh(x) for x in range(8)] == [t.sign(x) for x in range(8)]
        assert counter.oh_queries == 16


def test_synthesize_oh_mismatched_parent():
    h = OneSparseHermitian.from_dense(PAULI_X)
    other = OneSparseHermitian.from_dense(PAULI_X)
    _, t = bit_decompose_one_sparse(h, 1)[0]
    with pytest.raises(MismatchedParent):
        synthesize_oh(t, other, QueryCounter())


# --- coloring -------------------------------------------------------------------


def test_color_pauli_x_single_piece():
    pieces = color_decompose(SparseOracleMatrix.from_dense(PAULI_X))
    assert len(pieces) == 1
    assert np.array_equal(reconstruct_dense(pieces[0][1]), PAULI_X)


def test_color_star_graph():
    h = np.zeros((4, 4))
    h[0, 1] = h[1, 0] = 1.0
    h[0, 2] = h[2, 0] = 0.5
    pieces = color_decompose(SparseOracleMatrix.from_dense(h))
    assert len(pieces) <= 4
    assert np.array_equal(pieces.dense(), h)
    for _, p in pieces:
        assert validate(p).ok


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 4), real=st.booleans())
def test_color_decompose_exact(seed, d, real):
    rng = np.random.default_rng(seed)
    dense = random_sparse_dense(rng, 4, d, real=real)
    h = SparseOracleMatrix.from_dense(dense)
    pieces = color_decompose(h)
    assert np.array_equal(pieces.dense(), dense)
    assert len(pieces) <= 2 * h.sparsity**2
    assert pieces.residual_error_bound == 0
    for _, p in pieces:
        assert validate(p).ok


def test_color_piece_query_costs():
    rng = np.random.default_rng(21)
    h = SparseOracleMatrix.from_dense(random_sparse_dense(rng, 4, 4))
    for _, p in color_decompose(h):
        for x in range(16):
            before = p.source.snapshot()
            y = p.partner(x)
            mid = p.source.snapshot()
            p.element(x, y)
            after = p.source.snapshot()
            assert mid[0] - before[0] <= 2 and mid[1] == before[1]
            assert after[1] - mid[1] <= 1 and after[0] == mid[0]


# --- full pipeline ---------------------------------------------------------------


def test_decompose_pauli_z():
    terms = decompose_sparse(SparseOracleMatrix.from_dense(PAULI_Z), 0.5)
    L = choose_num_bits(1.0, 0.5)
    assert len(terms) == 4 * L
    assert np.array_equal(terms.dense(), PAULI_Z)


def test_decompose_random_d3():
    rng = np.random.default_rng(33)
    dense = random_sparse_dense(rng, 4, 3)
    h = SparseOracleMatrix.from_dense(dense)
    terms = decompose_sparse(h, 1e-3)
    err = measured_error(terms, dense)
    assert err <= 1e-3
    assert err <= terms.residual_error_bound
    L = choose_num_bits(h.max_norm, 1e-3)
    assert len(terms) <= 8 * h.sparsity**2 * L


def test_term_count_bound_example():
    assert term_count_bound(2, 1.5, 0.1) == 80


def test_prune_keeps_operator():
    rng = np.random.default_rng(4)
    dense = random_sparse_dense(rng, 3, 2, real=True)
    terms = decompose_sparse(SparseOracleMatrix.from_dense(dense), 1e-2)
    pruned = prune_cancelling_pairs(terms)
    assert len(pruned) < len(terms)
    assert np.allclose(pruned.dense(), terms.dense(), atol=1e-14)
