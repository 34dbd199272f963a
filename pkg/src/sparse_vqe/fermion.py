"""Fermionic ladder-operator monomials acting on Fock occupation states.

Fock states are integers: bit ``p`` is the occupation of mode ``p``. A
ladder operator acting on mode ``p`` picks up the sign ``(-1)**k`` where
``k`` is the number of occupied modes below ``p``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Union

from .decompose import WeightedTermList, bit_decompose_pieces, choose_num_bits
from .errors import DuplicateMonomial, InputFormatError, NotConjugateClosed, NotOneSparse
from .sparse_core import OneSparseHermitian, SparseOracleMatrix

_COEFF_RTOL = 1e-12


class OpKind(str, Enum):
    CREATE = "+"
    ANNIHILATE = "-"


@dataclass(frozen=True)
class LadderOp:
    kind: OpKind
    mode: int

    def adjoint(self) -> "LadderOp":
        flipped = OpKind.ANNIHILATE if self.kind is OpKind.CREATE else OpKind.CREATE
        return LadderOp(flipped, self.mode)

    def __str__(self) -> str:
        return f"a{self.mode}^" if self.kind is OpKind.CREATE else f"a{self.mode}"


@dataclass(frozen=True)
class LadderMonomial:
    """``coefficient * ops[0] ops[1] ... ops[-1]``; the last op acts first."""

    coefficient: complex
    ops: tuple

    def __post_init__(self):
        if not self.ops:
            raise ValueError("a monomial needs at least one ladder operator")

    def adjoint(self) -> "LadderMonomial":
        return LadderMonomial(
            complex(self.coefficient).conjugate(),
            tuple(op.adjoint() for op in reversed(self.ops)),
        )

    @property
    def ops_self_adjoint(self) -> bool:
        return tuple(op.adjoint() for op in reversed(self.ops)) == self.ops

    def __str__(self) -> str:
        return f"({self.coefficient}) " + " ".join(str(op) for op in self.ops)


@dataclass(frozen=True)
class ConjugatePairTerm:
    monomial: LadderMonomial
    is_self_adjoint: bool


def apply_monomial(m: LadderMonomial, state: int) -> Optional[tuple[complex, int]]:
    """Act with ``m`` on a Fock state; ``None`` when the state is annihilated."""
    phase = 1
    for op in reversed(m.ops):
        bit = 1 << op.mode
        occupied = bool(state & bit)
        if occupied == (op.kind is OpKind.CREATE):
            return None
        if bin(state & (bit - 1)).count("1") & 1:
            phase = -phase
        state ^= bit
    return phase * complex(m.coefficient), state


def _close(a: complex, b: complex) -> bool:
    return abs(a - b) <= _COEFF_RTOL * max(abs(a), abs(b), 1.0)


def build_pair_terms(monomials: Sequence[LadderMonomial]) -> list[ConjugatePairTerm]:
    """Group a conjugation-closed monomial list into Hermitian pair terms.

    The representative of each pair is whichever member appears first.
    """
    by_ops: dict[tuple, int] = {}
    for k, m in enumerate(monomials):
        if m.ops in by_ops:
            raise DuplicateMonomial(
                f"monomial #{k} {m} repeats the operator string of #{by_ops[m.ops]}"
            )
        by_ops[m.ops] = k

    terms, used = [], set()
    for k, m in enumerate(monomials):
        if k in used:
            continue
        if m.ops_self_adjoint:
            if abs(complex(m.coefficient).imag) > _COEFF_RTOL * max(abs(m.coefficient), 1.0):
                raise NotConjugateClosed(
                    f"monomial #{k} {m} is self-adjoint in its operators but has a "
                    "non-real coefficient"
                )
            terms.append(ConjugatePairTerm(m, True))
            used.add(k)
            continue
        adj = m.adjoint()
        j = by_ops.get(adj.ops)
        if j is None or not _close(complex(monomials[j].coefficient), adj.coefficient):
            raise NotConjugateClosed(f"monomial #{k} {m} has no Hermitian conjugate in the list")
        terms.append(ConjugatePairTerm(m, False))
        used.update((k, j))
    return terms


def _balanced(m: LadderMonomial) -> bool:
    """True when every mode is created as often as it is annihilated."""
    net: dict[int, int] = {}
    for op in m.ops:
        net[op.mode] = net.get(op.mode, 0) + (1 if op.kind is OpKind.CREATE else -1)
    return not any(net.values())


def pair_to_one_sparse(t: ConjugatePairTerm, num_modes: int) -> OneSparseHermitian:
    """One-sparse Hermitian operator ``m + m^dagger`` (or ``m`` if self-adjoint).

    For a row ``x``, whichever of ``m``/``m^dagger`` survives acting on
    ``|x>`` gives the partner ``y``; the row entry is the conjugate of that
    amplitude.
    """
    actors = [t.monomial] if t.is_self_adjoint else [t.monomial, t.monomial.adjoint()]

    def lookup(x: int) -> tuple[int, complex]:
        hits = [r for r in (apply_monomial(a, x) for a in actors) if r is not None]
        if not hits:
            return x, 0j
        targets = {y for _, y in hits}
        if len(targets) > 1:
            raise NotOneSparse(
                f"{t.monomial} and its conjugate send Fock state {x} to {sorted(targets)}"
            )
        # both act only when every mode is balanced, and then both map x to x
        amp = sum(a for a, _ in hits)
        return targets.pop(), amp.conjugate()

    def partner(x: int) -> int:
        return lookup(x)[0]

    def element(x: int, y: int) -> complex:
        y_x, v = lookup(x)
        return v if y_x == y else 0j

    norm = abs(complex(t.monomial.coefficient))
    if not t.is_self_adjoint and _balanced(t.monomial):
        norm *= 2
    return OneSparseHermitian(num_modes, partner, element, norm, label=str(t.monomial))


def monomial_pieces(monomials: Sequence[LadderMonomial], num_modes: int) -> WeightedTermList:
    pairs = build_pair_terms(monomials)
    return WeightedTermList(
        tuple((1.0, pair_to_one_sparse(p, num_modes)) for p in pairs),
        meta={"num_monomials": len(monomials), "num_pairs": len(pairs)},
    )


def decompose_monomials(
    monomials: Sequence[LadderMonomial], num_modes: int, gamma: float
) -> WeightedTermList:
    """Self-inverse decomposition along the pair route.

    The bit count comes from the largest pair norm so every pair meets
    ``gamma``; pairs may overlap, so the certified bound is the sum of the
    per-pair bounds.
    """
    pieces = monomial_pieces(monomials, num_modes)
    norm = max(p.max_norm for _, p in pieces)
    L = choose_num_bits(norm, gamma)
    out = bit_decompose_pieces(pieces, L, overlapping=True)
    out.meta["gamma"] = gamma
    return out


def monomial_term_count(N: int, max_norm: float, gamma: float) -> int:
    """Pair-route count ``2 N L`` of self-inverse terms."""
    return 2 * N * choose_num_bits(max_norm, gamma)


def prefer_monomial_route(N: int, sparsity: int) -> bool:
    """Pair route wins when half the monomial count is below the squared sparsity."""
    return N / 2 < sparsity**2


def monomials_to_sparse(monomials: Sequence[LadderMonomial], num_modes: int) -> SparseOracleMatrix:
    """Sum of all monomials as a generic sparse oracle operator (desk scale)."""
    entries: dict[tuple[int, int], complex] = {}
    for x in range(1 << num_modes):
        for m in monomials:
            r = apply_monomial(m, x)
            if r is not None:
                amp, y = r
                entries[(y, x)] = entries.get((y, x), 0j) + amp
    return SparseOracleMatrix.from_entries(num_modes, entries)


# --- JSON monomial format ----------------------------------------------------


def parse_monomials(doc: dict) -> tuple[int, list[LadderMonomial]]:
    if not isinstance(doc, dict) or "num_modes" not in doc or "terms" not in doc:
        raise InputFormatError("monomial document needs 'num_modes' and 'terms'")
    M = doc["num_modes"]
    if not isinstance(M, int) or isinstance(M, bool) or M < 1:
        raise InputFormatError(f"num_modes must be a positive integer, got {M!r}")
    out = []
    for k, term in enumerate(doc["terms"]):
        try:
            re, im = term["coeff"]
            coeff = complex(float(re), float(im))
            raw_ops = term["ops"]
        except (KeyError, TypeError, ValueError):
            raise InputFormatError(f"term #{k} {term!r}: needs 'coeff': [re, im] and 'ops'") from None
        if not (math.isfinite(coeff.real) and math.isfinite(coeff.imag)):
            raise InputFormatError(f"term #{k}: non-finite coefficient")
        ops = []
        for op in raw_ops:
            if (
                not isinstance(op, (list, tuple)) or len(op) != 2 or op[0] not in ("+", "-")
                or not isinstance(op[1], int) or not 0 <= op[1] < M
            ):
                raise InputFormatError(f"term #{k}: bad ladder operator {op!r}")
            ops.append(LadderOp(OpKind(op[0]), op[1]))
        if not ops:
            raise InputFormatError(f"term #{k}: empty operator list")
        out.append(LadderMonomial(coeff, tuple(ops)))
    return M, out


def load_monomials(path: Union[str, Path]) -> tuple[int, list[LadderMonomial]]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{path}: not valid JSON ({exc})") from None
    return parse_monomials(doc)


def hopping(p: int, q: int, coeff: complex = 1.0) -> list[LadderMonomial]:
    """``coeff a_p^dagger a_q + h.c.`` as two monomials."""
    m = LadderMonomial(complex(coeff), (LadderOp(OpKind.CREATE, p), LadderOp(OpKind.ANNIHILATE, q)))
    return [m, m.adjoint()]


def number(p: int, coeff: float = 1.0) -> LadderMonomial:
    return LadderMonomial(complex(coeff), (LadderOp(OpKind.CREATE, p), LadderOp(OpKind.ANNIHILATE, p)))
