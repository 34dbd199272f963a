"""Decomposition of sparse Hermitian operators into self-inverse terms.

Two stages:

* :func:`color_decompose` splits a d-sparse operator into one-sparse
  Hermitian pieces by labelling each off-diagonal entry with the pair of
  neighbor slots it occupies in its row and column.
* :func:`bit_decompose_one_sparse` expands the real and imaginary parts of a
  one-sparse operator in binary and writes every bit plane as the average of
  two self-inverse operators whose entries are +-1 (or +-i).

:func:`decompose_sparse` chains the two.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidTolerance, MismatchedParent
from .sparse_core import (
    BitDecompositionPlan,
    Branch,
    OneSparseHermitian,
    PhaseClass,
    QueryCounter,
    SelfInverseTerm,
    SparseOracleMatrix,
    reconstruct_dense,
)

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class WeightedTermList:
    """Ordered ``(coefficient, term)`` pairs summing to an operator."""

    terms: tuple
    residual_error_bound: float = 0.0
    fallback_split_used: bool = False
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __getitem__(self, i):
        return self.terms[i]

    @property
    def coefficients(self) -> list[float]:
        return [c for c, _ in self.terms]

    @property
    def num_qubits(self) -> int:
        return self.terms[0][1].num_qubits

    def dense(self) -> np.ndarray:
        dim = 1 << self.num_qubits
        out = np.zeros((dim, dim), dtype=complex)
        for c, t in self.terms:
            out += c * reconstruct_dense(t)
        return out


def least_power_of_two_above(value: float) -> float:
    """Smallest power of two strictly greater than ``value`` (1.0 for zero)."""
    if value <= 0:
        return 1.0
    _, exp = math.frexp(value)
    return math.ldexp(1.0, exp)


def choose_num_bits(max_norm: float, gamma: float) -> int:
    """Bits per real/imaginary part needed for max-norm error ``gamma``."""
    if not (gamma > 0 and math.isfinite(gamma)):
        raise InvalidTolerance(f"gamma must be positive and finite, got {gamma!r}")
    if not max_norm > 0:
        return 1
    return max(1, math.ceil(math.log2(SQRT2 * max_norm / gamma)))


def _magnitude_code(magnitude: float, plan: BitDecompositionPlan) -> int:
    # Round to the nearest multiple of the last bit weight, clamped to the
    # largest L-bit code.
    L = plan.num_bits
    q = math.floor(magnitude * (1 << L) / plan.Lambda + 0.5)
    return min(q, (1 << L) - 1)


def _bit(magnitude: float, l: int, plan: BitDecompositionPlan) -> int:
    return (_magnitude_code(magnitude, plan) >> (plan.num_bits - l)) & 1


def _canonical_entry(parent: OneSparseHermitian, x: int, y: int) -> complex:
    """Entry H[min(x,y), max(x,y)] from a single value query at (x, y)."""
    v = complex(parent.element(x, y))
    return v if x <= y else v.conjugate()


def _term_sign(
    v: complex, x: int, y: int, cls: PhaseClass, l: int, branch: Branch,
    plan: BitDecompositionPlan,
) -> int:
    part = v.real if cls is PhaseClass.REAL else v.imag
    if _bit(abs(part), l, plan):
        s = 1 if part > 0 else -1
    else:
        s = 1 if branch is Branch.PLUS else -1
    if cls is PhaseClass.IMAGINARY and x > y:
        s = -s
    return s


def _make_term(parent, cls, l, branch, plan) -> SelfInverseTerm:
    def sign(x: int) -> int:
        y = parent.partner(x)
        return _term_sign(_canonical_entry(parent, x, y), x, y, cls, l, branch, plan)

    return SelfInverseTerm(
        num_qubits=parent.num_qubits,
        partner=parent.partner,
        sign=sign,
        phase_class=cls,
        bit_index=l,
        branch=branch,
        coefficient=plan.Lambda / 2 ** (l + 1),
        parent=parent,
        plan=plan,
    )


def bit_decompose_one_sparse(h: OneSparseHermitian, L: int) -> WeightedTermList:
    """Write ``h`` as 4L self-inverse terms.

    Bit ``l`` of a magnitude carries weight ``Lambda / 2**l``; each of the
    PLUS/MINUS terms at level ``l`` carries half of it.
    """
    if L < 1:
        raise ValueError(f"need at least one bit, got L={L}")
    Lam = least_power_of_two_above(h.max_norm)
    plan = BitDecompositionPlan(Lam, L)
    terms = []
    for l in range(1, L + 1):
        for cls in (PhaseClass.REAL, PhaseClass.IMAGINARY):
            for branch in (Branch.PLUS, Branch.MINUS):
                t = _make_term(h, cls, l, branch, plan)
                terms.append((t.coefficient, t))
    return WeightedTermList(
        tuple(terms),
        residual_error_bound=SQRT2 * Lam / 2**L,
        meta={"L": L, "Lambda": Lam},
    )


class SignOracle:
    """Value oracle of a self-inverse term, built on the parent's value oracle.

    ``compute`` queries the parent entry once and derives the sign bit from
    the stored sign of the real/imaginary part and its bit ``l``;
    ``uncompute`` spends the second query that erases the parent value.
    A full evaluation (``__call__``) therefore costs two parent queries.
    """

    def __init__(self, term: SelfInverseTerm, parent: OneSparseHermitian, counter: QueryCounter):
        self.term = term
        self.parent = parent
        self.counter = counter

    def _query(self, x: int, y: int) -> complex:
        src = self.parent.source
        before = src.snapshot() if src is not None else None
        v = _canonical_entry(self.parent, x, y)
        self.counter.oh_queries += 1
        if src is None:
            self.counter.parent_oh_queries += 1
        else:
            self.counter.parent_of_queries += src.parent_of_queries - before[0]
            self.counter.parent_oh_queries += src.parent_oh_queries - before[1]
        return v

    def _sign(self, v: complex, x: int, y: int) -> int:
        t = self.term
        part = v.real if t.phase_class is PhaseClass.REAL else v.imag
        # sign qubit starts at the branch default and is overwritten only
        # when bit l of the part is set
        negative = t.branch is Branch.MINUS
        if _bit(abs(part), t.bit_index, t.plan):
            negative = part < 0
        if t.phase_class is PhaseClass.IMAGINARY and x > y:
            negative = not negative
        return -1 if negative else 1

    def compute(self, x: int, y: Optional[int] = None) -> int:
        if y is None:
            y = self.parent.partner(x)
        return self._sign(self._query(x, y), x, y)

    def uncompute(self, x: int, y: Optional[int] = None) -> int:
        """Second query; returns the sign bit it clears along with the value."""
        if y is None:
            y = self.parent.partner(x)
        return self._sign(self._query(x, y), x, y)

    def __call__(self, x: int, y: Optional[int] = None) -> int:
        s = self.compute(x, y)
        self.uncompute(x, y)
        return s


def synthesize_oh(
    g: SelfInverseTerm, parent: OneSparseHermitian, counter: QueryCounter
) -> SignOracle:
    if g.parent is not parent or g.partner is not parent.partner or g.plan is None:
        raise MismatchedParent("term was not produced from this one-sparse operator")
    return SignOracle(g, parent, counter)


# --- d-sparse -> one-sparse --------------------------------------------------


def _counting_oracles(h: SparseOracleMatrix, tally: QueryCounter):
    def nbr(x: int, i: int):
        tally.parent_of_queries += 1
        return h.neighbor(x, i)

    def ent(x: int, y: int) -> complex:
        tally.parent_oh_queries += 1
        return h.entry(x, y)

    return nbr, ent


def _diagonal_piece(h: SparseOracleMatrix, norm: float) -> OneSparseHermitian:
    tally = QueryCounter()
    _, ent = _counting_oracles(h, tally)

    def partner(x: int) -> int:
        return x

    def element(x: int, y: int) -> complex:
        return ent(x, x) if x == y else 0j

    return OneSparseHermitian(h.num_qubits, partner, element, norm, tally, "diag")


def _off_diagonal_element(ent):
    def element(x: int, y: int) -> complex:
        return 0j if x == y else ent(x, y)

    return element


def _symmetric_piece(h, a: int, norm: float) -> OneSparseHermitian:
    tally = QueryCounter()
    nbr, ent = _counting_oracles(h, tally)

    def partner(x: int) -> int:
        y = nbr(x, a)
        if y is None or y == x:
            return x
        return y if nbr(y, a) == x else x

    return OneSparseHermitian(
        h.num_qubits, partner, _off_diagonal_element(ent), norm, tally, f"({a},{a})"
    )


def _oriented_piece(h, a: int, b: int, role: dict, norm: float, label: str):
    # role[x] says whether x is the smaller ("up") or larger ("down") end of
    # its edge in this piece; the slot pair then fixes the two lookups.
    tally = QueryCounter()
    nbr, ent = _counting_oracles(h, tally)

    def partner(x: int) -> int:
        r = role.get(x)
        if r is None:
            return x
        fwd, back = (a, b) if r == "up" else (b, a)
        y = nbr(x, fwd)
        if y is None:
            return x
        return y if nbr(y, back) == x else x

    return OneSparseHermitian(h.num_qubits, partner, _off_diagonal_element(ent), norm, tally, label)


def _chain_parity_split(edges: list) -> tuple[list, list]:
    """Split a set of increasing chains into two matchings."""
    up = {x: y for x, y in edges}
    down = {y: x for x, y in edges}
    halves = ([], [])
    for start in sorted(v for v in up if v not in down):
        v, k = start, 0
        while v in up:
            halves[k % 2].append((v, up[v]))
            v, k = up[v], k + 1
    return halves


def color_decompose(h: SparseOracleMatrix) -> WeightedTermList:
    """Split ``h`` into one-sparse Hermitian pieces summing to it exactly.

    An off-diagonal entry (x, y), x < y, goes to class (a, b) where y is the
    a-th neighbor of x and x the b-th neighbor of y; diagonal entries form
    their own piece. A class with a != b can hold two entries in one row, in
    which case it is split into two pieces along its chains.
    """
    dim = h.dim
    rows = {x: h.row(x) for x in range(dim)}
    slot = {x: {y: i for i, y in enumerate(cols)} for x, cols in rows.items()}
    diag_norm = 0.0
    has_diag = False
    classes: dict[tuple[int, int], list] = {}
    for x, cols in rows.items():
        for y in cols:
            if y == x:
                has_diag = True
                diag_norm = max(diag_norm, abs(h.entry(x, x)))
            elif x < y:
                classes.setdefault((slot[x][y], slot[y][x]), []).append((x, y))

    def norm_of(edges):
        return max(abs(h.entry(x, y)) for x, y in edges)

    pieces = []
    split_used = False
    if has_diag:
        pieces.append(_diagonal_piece(h, diag_norm))
    for (a, b) in sorted(classes):
        edges = classes[(a, b)]
        if a == b:
            pieces.append(_symmetric_piece(h, a, norm_of(edges)))
            continue
        ups = {x for x, _ in edges}
        downs = {y for _, y in edges}
        groups = [edges] if not (ups & downs) else list(_chain_parity_split(edges))
        split_used = split_used or len(groups) > 1
        for k, group in enumerate(groups):
            role = {x: "up" for x, _ in group}
            role.update({y: "down" for _, y in group})
            label = f"({a},{b})" if len(groups) == 1 else f"({a},{b})/{k}"
            pieces.append(_oriented_piece(h, a, b, role, norm_of(group), label))

    return WeightedTermList(
        tuple((1.0, p) for p in pieces),
        residual_error_bound=0.0,
        fallback_split_used=split_used,
        meta={"sparsity": h.sparsity, "num_pieces": len(pieces)},
    )


def bit_decompose_pieces(
    pieces: WeightedTermList, L: int, overlapping: bool = False
) -> WeightedTermList:
    """Bit-decompose every one-sparse piece with a common bit count.

    ``overlapping`` pieces may share matrix positions, so their error
    bounds add; disjoint pieces share the worst one.
    """
    terms, bounds, lambdas = [], [], []
    for k, (weight, piece) in enumerate(pieces):
        sub = bit_decompose_one_sparse(piece, L)
        bounds.append(weight * sub.residual_error_bound)
        lambdas.append(sub.meta["Lambda"])
        terms.extend((weight * c, t) for c, t in sub)
    bound = sum(bounds) if overlapping else max(bounds, default=0.0)
    return WeightedTermList(
        tuple(terms),
        residual_error_bound=bound,
        fallback_split_used=pieces.fallback_split_used,
        meta={
            **pieces.meta,
            "L": L,
            "Lambda": max(lambdas, default=1.0),
            "piece_labels": [p.label for _, p in pieces],
        },
    )


def decompose_sparse(h: SparseOracleMatrix, gamma: float) -> WeightedTermList:
    L = choose_num_bits(h.max_norm, gamma)
    out = bit_decompose_pieces(color_decompose(h), L)
    out.meta["gamma"] = gamma
    return out


def term_count_bound(sparsity: int, max_norm: float, gamma: float) -> int:
    """Generic-route bound ``4 d**2 L`` on the number of self-inverse terms."""
    return 4 * sparsity**2 * choose_num_bits(max_norm, gamma)


def measured_error(terms: WeightedTermList, target) -> float:
    """Max-norm distance between the summed terms and ``target`` (dense or oracle)."""
    if not isinstance(target, np.ndarray):
        target = reconstruct_dense(target)
    return float(np.max(np.abs(terms.dense() - target), initial=0.0))


def prune_cancelling_pairs(terms: WeightedTermList) -> WeightedTermList:
    """Drop PLUS/MINUS pairs whose weighted sum is identically zero.

    Such pairs come from all-zero bit planes. They leave the operator
    unchanged but still add shot noise. Requires dense checks, so
    desk-scale only.
    """
    index = {}
    for k, (c, t) in enumerate(terms):
        if isinstance(t, SelfInverseTerm):
            index[(id(t.parent), t.phase_class, t.bit_index, t.branch)] = k
    drop = set()
    for (pid, cls, l, branch), k in index.items():
        if branch is not Branch.PLUS:
            continue
        j = index.get((pid, cls, l, Branch.MINUS))
        if j is None:
            continue
        (ck, tk), (cj, tj) = terms[k], terms[j]
        if not np.any(ck * reconstruct_dense(tk) + cj * reconstruct_dense(tj)):
            drop.update((k, j))
    kept = tuple(item for k, item in enumerate(terms) if k not in drop)
    return WeightedTermList(
        kept,
        residual_error_bound=terms.residual_error_bound,
        fallback_split_used=terms.fallback_split_used,
        meta={**terms.meta, "pruned": len(drop)},
    )
