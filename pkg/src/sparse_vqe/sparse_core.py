"""Oracle-based sparse operators, one-sparse and self-inverse terms.

Operators are described by functions rather than arrays: a
:class:`SparseOracleMatrix` answers "which column holds the i-th nonzero of
row x" and "what is the entry at (x, y)", mirroring the location and value
oracles of the sparse access model. Dense matrices are only built for
verification, and only below :data:`MAX_DENSE_QUBITS`.

Basis indices are plain ``int`` and entries plain ``complex``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .errors import DimensionTooLarge, InputFormatError, NotOneSparse

MAX_DENSE_QUBITS = 12

NeighborFn = Callable[[int, int], Optional[int]]
EntryFn = Callable[[int, int], complex]


class PhaseClass(str, Enum):
    REAL = "REAL"
    IMAGINARY = "IMAGINARY"


class Branch(str, Enum):
    PLUS = "PLUS"
    MINUS = "MINUS"


@dataclass
class QueryCounter:
    """Tally of oracle queries.

    ``of_queries``/``oh_queries`` count queries (forward and inverse) to the
    one-sparse operator a self-inverse term was cut from. The ``parent_*``
    fields count queries to the operator that one-sparse piece was itself
    cut from; for a native one-sparse operator the two levels coincide.
    """

    of_queries: int = 0
    oh_queries: int = 0
    parent_of_queries: int = 0
    parent_oh_queries: int = 0
    events: list = field(default_factory=list)

    def record(self, event: str, parent_cost: int = 1) -> None:
        if event in ("O_F", "O_F_inv"):
            self.of_queries += 1
            self.parent_of_queries += parent_cost
        elif event in ("O_H", "O_H_inv"):
            self.oh_queries += 1
            self.parent_oh_queries += parent_cost
        else:
            raise ValueError(f"unknown oracle event {event!r}")
        self.events.append(event)

    @property
    def total(self) -> int:
        return self.of_queries + self.oh_queries

    @property
    def parent_total(self) -> int:
        return self.parent_of_queries + self.parent_oh_queries

    def sequence_counts(self) -> tuple[int, int, int, int]:
        """Counts of (O_F, O_H, O_H^-1, O_F^-1) events."""
        return tuple(self.events.count(e) for e in ("O_F", "O_H", "O_H_inv", "O_F_inv"))

    def snapshot(self) -> tuple[int, int]:
        return self.parent_of_queries, self.parent_oh_queries


def _check_dense_guard(num_qubits: int) -> None:
    if num_qubits > MAX_DENSE_QUBITS:
        raise DimensionTooLarge(
            f"dense reconstruction limited to {MAX_DENSE_QUBITS} qubits, got {num_qubits}"
        )


@dataclass(frozen=True, eq=False)
class SparseOracleMatrix:
    """A d-sparse Hermitian operator given by its location and value oracles.

    ``neighbor(x, i)`` returns the column of the i-th nonzero in row ``x``
    (increasing column order) or ``None`` past the end of the row.
    """

    num_qubits: int
    sparsity: int
    neighbor: NeighborFn
    entry: EntryFn
    max_norm: float

    @property
    def dim(self) -> int:
        return 1 << self.num_qubits

    def row(self, x: int) -> list[int]:
        cols = []
        for i in range(self.sparsity):
            y = self.neighbor(x, i)
            if y is None:
                break
            cols.append(y)
        return cols

    @classmethod
    def from_entries(
        cls, num_qubits: int, entries: dict, max_norm: Optional[float] = None
    ) -> "SparseOracleMatrix":
        """Build from a full ``{(x, y): value}`` map (both triangles present)."""
        rows: dict[int, list[int]] = {}
        table: dict[tuple[int, int], complex] = {}
        for (x, y), v in entries.items():
            v = complex(v)
            if v == 0:
                continue
            table[(int(x), int(y))] = v
            rows.setdefault(int(x), []).append(int(y))
        for cols in rows.values():
            cols.sort()
        sparsity = max((len(c) for c in rows.values()), default=0)
        scanned = max((abs(v) for v in table.values()), default=0.0)
        if max_norm is None:
            max_norm = scanned

        def neighbor(x: int, i: int) -> Optional[int]:
            cols = rows.get(x)
            if cols is None or i >= len(cols):
                return None
            return cols[i]

        def entry(x: int, y: int) -> complex:
            return table.get((x, y), 0j)

        return cls(num_qubits, max(sparsity, 1), neighbor, entry, float(max_norm))

    @classmethod
    def from_dense(cls, matrix, max_norm: Optional[float] = None) -> "SparseOracleMatrix":
        matrix = np.asarray(matrix, dtype=complex)
        n = int(round(math.log2(matrix.shape[0])))
        xs, ys = np.nonzero(matrix)
        return cls.from_entries(
            n, {(int(x), int(y)): matrix[x, y] for x, y in zip(xs, ys)}, max_norm
        )


@dataclass(frozen=True, eq=False)
class OneSparseHermitian:
    """Hermitian operator with at most one nonzero per row.

    ``partner`` is the involution x -> y_x (identity on empty rows) and
    ``element(x, y)`` is the value oracle, only meaningful at
    ``y == partner(x)``. ``source`` tallies queries this operator makes to the
    operator it was cut from; ``None`` marks a native one-sparse operator.
    """

    num_qubits: int
    partner: Callable[[int], int]
    element: EntryFn
    max_norm: float
    source: Optional[QueryCounter] = None
    label: str = ""

    @property
    def dim(self) -> int:
        return 1 << self.num_qubits

    def entry(self, x: int) -> complex:
        return self.element(x, self.partner(x))

    @cached_property
    def table(self) -> tuple[np.ndarray, np.ndarray]:
        perm = np.array([self.partner(x) for x in range(self.dim)], dtype=np.int64)
        vals = np.array([self.element(x, int(perm[x])) for x in range(self.dim)], dtype=complex)
        return perm, vals

    @classmethod
    def from_pairs(cls, num_qubits: int, pairs: dict, label: str = "") -> "OneSparseHermitian":
        """Build from ``{x: (y, value)}``; rows not listed map to themselves with 0.

        The map is taken as given, so invalid operators can be constructed
        deliberately and then checked with :func:`validate`.
        """
        pairs = {int(x): (int(y), complex(v)) for x, (y, v) in pairs.items()}
        max_norm = max((abs(v) for _, v in pairs.values()), default=0.0)

        def partner(x: int) -> int:
            return pairs[x][0] if x in pairs else x

        def element(x: int, y: int) -> complex:
            if x in pairs and pairs[x][0] == y:
                return pairs[x][1]
            return 0j

        return cls(num_qubits, partner, element, max_norm, label=label)

    @classmethod
    def from_dense(cls, matrix, label: str = "") -> "OneSparseHermitian":
        matrix = np.asarray(matrix, dtype=complex)
        n = int(round(math.log2(matrix.shape[0])))
        pairs = {}
        for x in range(matrix.shape[0]):
            cols = np.flatnonzero(matrix[x])
            if len(cols) > 1:
                raise NotOneSparse(f"row {x} has {len(cols)} nonzero entries")
            if len(cols) == 1:
                pairs[x] = (int(cols[0]), matrix[x, cols[0]])
        return cls.from_pairs(n, pairs, label)


@dataclass(frozen=True)
class BitDecompositionPlan:
    """Binary-expansion parameters shared by the terms of one one-sparse piece."""

    Lambda: float
    num_bits: int
    target_error: Optional[float] = None


@dataclass(frozen=True, eq=False)
class SelfInverseTerm:
    """One-sparse, Hermitian, self-inverse operator with entries +-1 or +-i.

    The entry at ``(x, partner(x))`` is ``sign(x)`` for REAL terms and for
    IMAGINARY terms on the diagonal, and ``sign(x) * 1j`` for IMAGINARY terms
    off the diagonal.
    """

    num_qubits: int
    partner: Callable[[int], int]
    sign: Callable[[int], int]
    phase_class: PhaseClass
    bit_index: int = 1
    branch: Branch = Branch.PLUS
    coefficient: float = 1.0
    parent: Optional[OneSparseHermitian] = None
    plan: Optional[BitDecompositionPlan] = None

    @property
    def dim(self) -> int:
        return 1 << self.num_qubits

    def value(self, x: int) -> complex:
        s = self.sign(x)
        if self.phase_class is PhaseClass.IMAGINARY and self.partner(x) != x:
            return complex(0, s)
        return complex(s)

    @cached_property
    def table(self) -> tuple[np.ndarray, np.ndarray]:
        perm = np.array([self.partner(x) for x in range(self.dim)], dtype=np.int64)
        vals = np.array([self.value(x) for x in range(self.dim)], dtype=complex)
        return perm, vals


Operator = Union[SparseOracleMatrix, OneSparseHermitian, SelfInverseTerm]


def reconstruct_dense(m: Operator) -> np.ndarray:
    """Dense ``2**n x 2**n`` matrix of an oracle-described operator."""
    _check_dense_guard(m.num_qubits)
    dim = 1 << m.num_qubits
    out = np.zeros((dim, dim), dtype=complex)
    if isinstance(m, SparseOracleMatrix):
        for x in range(dim):
            for y in m.row(x):
                out[x, y] = m.entry(x, y)
        return out
    perm, vals = m.table
    out[np.arange(dim), perm] = vals
    return out


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    counterexample: Optional[object] = None


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            c.name: {"passed": c.passed, "counterexample": c.counterexample}
            for c in self.checks
        }


def _first(pred, items):
    for item in items:
        if not pred(item):
            return item
    return None


def _check(name: str, failure) -> Check:
    return Check(name, failure is None, failure)


def validate(m: Operator) -> ValidationReport:
    """Check every structural invariant of ``m``; failures are reported, not raised."""
    _check_dense_guard(m.num_qubits)
    dim = 1 << m.num_qubits
    xs = range(dim)
    if isinstance(m, SparseOracleMatrix):
        return _validate_sparse(m, dim)

    perm, vals = m.table
    checks = [
        _check("in_range", _first(lambda x: 0 <= perm[x] < dim, xs)),
        _check("involution", _first(lambda x: 0 <= perm[x] < dim and perm[perm[x]] == x, xs)),
    ]
    invol = checks[-1].passed and checks[0].passed
    if invol:
        herm = _first(lambda x: vals[x] == np.conj(vals[perm[x]]), xs)
    else:
        dense = _dense_from_table(perm, vals, dim)
        herm = _first(lambda x: np.array_equal(dense[x], dense[:, x].conj()), xs)
    checks.append(_check("hermiticity", herm))
    checks.append(_check("one_sparsity", None if invol else checks[1].counterexample))
    if isinstance(m, SelfInverseTerm):
        unit = _first(
            lambda x: invol and vals[x] * vals[perm[x]] == 1 and vals[x] in (1, -1, 1j, -1j),
            xs,
        )
        checks.append(_check("self_inverse", unit))
    else:
        norm = _first(lambda x: abs(complex(vals[x])) <= m.max_norm, xs)
        checks.append(_check("max_norm", norm))
    checks.append(_check("finite", _first(lambda x: np.isfinite(vals[x]), xs)))
    return ValidationReport(tuple(checks))


def _dense_from_table(perm, vals, dim):
    out = np.zeros((dim, dim), dtype=complex)
    ok = (perm >= 0) & (perm < dim)
    out[np.arange(dim)[ok], perm[ok]] = vals[ok]
    return out


def _validate_sparse(m: SparseOracleMatrix, dim: int) -> ValidationReport:
    rows = {}
    order_fail = absent_fail = None
    for x in range(dim):
        cols, seen_absent = [], False
        for i in range(m.sparsity):
            y = m.neighbor(x, i)
            if y is None:
                seen_absent = True
            elif seen_absent and absent_fail is None:
                absent_fail = (x, i)
            else:
                cols.append(y)
        if order_fail is None and any(a >= b for a, b in zip(cols, cols[1:])):
            order_fail = x
        rows[x] = cols
    dense = np.zeros((dim, dim), dtype=complex)
    for x in range(dim):
        for y in range(dim):
            dense[x, y] = m.entry(x, y)
    listed = np.zeros((dim, dim), dtype=bool)
    for x, cols in rows.items():
        listed[x, [c for c in cols if 0 <= c < dim]] = True
    complete = _first(lambda x: np.array_equal(dense[x] != 0, listed[x]), range(dim))
    herm = _first(lambda x: np.array_equal(dense[x], dense[:, x].conj()), range(dim))
    checks = (
        _check("hermiticity", herm),
        _check("neighbor_order", order_fail),
        _check("neighbor_absent_tail", absent_fail),
        _check("neighbor_complete", complete),
        _check("sparsity", _first(lambda x: len(rows[x]) <= m.sparsity, range(dim))),
        _check(
            "max_norm",
            _first(lambda x: all(abs(complex(v)) <= m.max_norm for v in dense[x]), range(dim)),
        ),
        _check("finite", _first(lambda x: np.all(np.isfinite(dense[x])), range(dim))),
    )
    return ValidationReport(checks)


# --- COO text format -------------------------------------------------------


def parse_coo(doc: dict) -> SparseOracleMatrix:
    """Parse the COO document; only the upper triangle (x <= y) is stored."""
    if not isinstance(doc, dict) or "num_qubits" not in doc or "entries" not in doc:
        raise InputFormatError("COO document needs 'num_qubits' and 'entries'")
    n = doc["num_qubits"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise InputFormatError(f"num_qubits must be a positive integer, got {n!r}")
    dim = 1 << n
    upper: dict[tuple[int, int], complex] = {}
    for k, item in enumerate(doc["entries"]):
        if not isinstance(item, (list, tuple)) or len(item) != 4:
            raise InputFormatError(f"entry #{k} must be [x, y, re, im], got {item!r}")
        x, y, re, im = item
        if not all(isinstance(i, int) and not isinstance(i, bool) for i in (x, y)):
            raise InputFormatError(f"entry #{k} {item!r}: indices must be integers")
        if not (0 <= x < dim and 0 <= y < dim):
            raise InputFormatError(f"entry #{k} {item!r}: index outside [0, {dim})")
        try:
            re, im = float(re), float(im)
        except (TypeError, ValueError):
            raise InputFormatError(f"entry #{k} {item!r}: value is not numeric") from None
        if not (math.isfinite(re) and math.isfinite(im)):
            raise InputFormatError(f"entry #{k} {item!r}: non-finite value")
        if x > y:
            if (y, x) in upper:
                raise InputFormatError(
                    f"entry #{k} {item!r}: both ({y},{x}) and ({x},{y}) given; "
                    "store only x <= y"
                )
            raise InputFormatError(f"entry #{k} {item!r}: requires x <= y")
        if (x, y) in upper:
            raise InputFormatError(f"entry #{k} {item!r}: duplicate ({x},{y})")
        if x == y and im != 0:
            raise InputFormatError(f"entry #{k} {item!r}: diagonal entry must be real")
        upper[(x, y)] = complex(re, im)

    full = {}
    for (x, y), v in upper.items():
        full[(x, y)] = v
        full[(y, x)] = v.conjugate()
    scanned = max((abs(v) for v in upper.values()), default=0.0)
    max_norm = doc.get("max_norm")
    if max_norm is not None:
        max_norm = float(max_norm)
        if not math.isfinite(max_norm) or max_norm < scanned:
            raise InputFormatError(
                f"max_norm {max_norm} is below the largest entry magnitude {scanned}"
            )
    return SparseOracleMatrix.from_entries(n, full, max_norm)


def load_coo(path: Union[str, Path]) -> SparseOracleMatrix:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{path}: not valid JSON ({exc})") from None
    return parse_coo(doc)


def to_coo(m: SparseOracleMatrix) -> dict:
    entries = []
    for x in range(m.dim):
        for y in m.row(x):
            if x <= y:
                v = complex(m.entry(x, y))
                entries.append([x, y, v.real, v.imag])
    return {"num_qubits": m.num_qubits, "max_norm": m.max_norm, "entries": entries}
