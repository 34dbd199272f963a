"""Hadamard-test estimation of expectation values and matrix elements.

For each self-inverse term ``G`` the test ancilla starts in ``|+>`` (real
part) or ``|-i>`` (imaginary part), controls ``V^dagger G U``, and is
measured after a Hadamard. The zero outcome has probability
``(1 + Re/Im <0|V^dagger G U|0>) / 2``, so ``(n0 - n1) / M`` over ``M``
shots estimates the matrix element.

Shots are drawn binomially from the exact outcome probability instead of
re-simulating the circuit once per shot.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .decompose import WeightedTermList
from .errors import DimensionMismatch, IncompletePlan, InvalidTolerance
from .simulator import (
    FIXED_GATES,
    AnsatzCircuit,
    StateVector,
    apply_circuit,
    apply_gate,
    apply_term_direct,
    apply_term_oracle_faithful,
)
from .sparse_core import QueryCounter, SelfInverseTerm


class Part(str, Enum):
    RE = "RE"
    IM = "IM"


_PART_CODE = {Part.RE: 0, Part.IM: 1}


@dataclass(frozen=True, eq=False)
class Preparation:
    """An ansatz circuit with bound parameters, preparing ``circuit(params)|0>``."""

    circuit: AnsatzCircuit
    params: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        object.__setattr__(self, "params", np.asarray(self.params, dtype=float))

    @property
    def num_qubits(self) -> int:
        return self.circuit.num_qubits

    def same_as(self, other: "Preparation") -> bool:
        return self is other or (
            self.circuit == other.circuit and np.array_equal(self.params, other.params)
        )

    def state(self) -> np.ndarray:
        s = apply_circuit(self.circuit, self.params, StateVector.zeros(self.num_qubits))
        return s.amplitudes


def identity_preparation(num_qubits: int) -> Preparation:
    return Preparation(AnsatzCircuit.identity(num_qubits))


@dataclass(frozen=True)
class HadamardTestRecord:
    term_id: int
    part: Part
    shots: int
    zeros: int
    ones: int

    @property
    def estimate(self) -> float:
        return (self.zeros - self.ones) / self.shots

    @property
    def std_error(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.estimate**2) / self.shots)

    def as_dict(self) -> dict:
        return {
            "term_id": self.term_id,
            "part": self.part.value,
            "shots": self.shots,
            "zeros": self.zeros,
            "ones": self.ones,
            "estimate": self.estimate,
            "std_error": self.std_error,
        }


@dataclass(frozen=True)
class ShotPlan:
    total_epsilon: Optional[float]
    per_term: tuple  # of (term_id, Part, shots)

    @property
    def total_shots(self) -> int:
        return sum(m for _, _, m in self.per_term)

    def lookup(self) -> dict:
        return {(j, Part(p)): m for j, p, m in self.per_term}

    @classmethod
    def uniform(cls, num_terms: int, shots: int, parts=(Part.RE,)) -> "ShotPlan":
        return cls(None, tuple((j, Part(p), shots) for j in range(num_terms) for p in parts))


def _check_dims(u: Preparation, v: Preparation, g: SelfInverseTerm) -> int:
    if not (u.num_qubits == v.num_qubits == g.num_qubits):
        raise DimensionMismatch(
            f"U on {u.num_qubits}, V on {v.num_qubits}, G on {g.num_qubits} qubits"
        )
    return g.num_qubits


def hadamard_probability(
    u: Preparation, v: Preparation, g: SelfInverseTerm, part: Part = Part.RE,
    mode: str = "direct", counter: Optional[QueryCounter] = None,
) -> float:
    """Probability of reading 0 on the test ancilla, by simulating the full circuit.

    ``mode="oracle"`` applies ``G`` through the oracle sequence (which then
    needs the ancilla registers); ``counter`` collects its queries.
    """
    n = _check_dims(u, v, g)
    part = Part(part)
    oracle = mode == "oracle"
    s = StateVector.zeros(n, oracle_ancillas=oracle, test_ancilla=True)
    t = s.qubit("test_ancilla")
    apply_gate(s.amplitudes, FIXED_GATES["H"], t)
    if part is Part.IM:
        apply_gate(s.amplitudes, FIXED_GATES["SDG"], t)
    s = apply_circuit(u.circuit, u.params, s, control=t)
    if oracle:
        s = apply_term_oracle_faithful(g, s, counter if counter is not None else QueryCounter(), control=t)
    else:
        s = apply_term_direct(g, s, control=t)
    s = apply_circuit(v.circuit, v.params, s, adjoint=True, control=t)
    apply_gate(s.amplitudes, FIXED_GATES["H"], t)
    idx = np.arange(s.amplitudes.size)
    zero = ((idx >> t) & 1) == 0
    return float(np.sum(np.abs(s.amplitudes[zero]) ** 2))


def _term_rng(seed: int, term_id: int, part: Part) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(term_id), _PART_CODE[part]]))


def _draw(p0: float, shots: int, rng: np.random.Generator, term_id: int, part: Part):
    p0 = min(1.0, max(0.0, p0))
    zeros = int(rng.binomial(shots, p0))
    return HadamardTestRecord(term_id, part, shots, zeros, shots - zeros)


def sample_term(
    u: Preparation, v: Preparation, g: SelfInverseTerm, part: Part, shots: int, seed: int,
    term_id: int = 0,
) -> HadamardTestRecord:
    if shots < 1:
        raise ValueError(f"need at least one shot, got {shots}")
    part = Part(part)
    p0 = hadamard_probability(u, v, g, part)
    return _draw(p0, shots, _term_rng(seed, term_id, part), term_id, part)


def term_overlaps(terms: WeightedTermList, u: Preparation, v: Preparation) -> np.ndarray:
    """``<0|V^dagger G_j U|0>`` for every term.

    Equal to the controlled branch of the Hadamard-test circuit, computed
    once per preparation instead of once per term.
    """
    psi = u.state()
    phi = psi if u.same_as(v) else v.state()
    out = np.empty(len(terms), dtype=complex)
    for j, (_, g) in enumerate(terms):
        _check_dims(u, v, g)
        perm, vals = g.table
        g_psi = np.empty_like(psi)
        g_psi[perm] = vals[perm] * psi
        out[j] = np.vdot(phi, g_psi)
    return out


def term_probabilities(
    terms: WeightedTermList, u: Preparation, v: Preparation, mode: str = "direct"
) -> dict:
    """Zero-outcome probabilities keyed by ``(term_id, Part)``."""
    if mode == "oracle":
        return {
            (j, p): hadamard_probability(u, v, g, p, mode="oracle")
            for j, (_, g) in enumerate(terms)
            for p in (Part.RE, Part.IM)
        }
    ov = term_overlaps(terms, u, v)
    out = {}
    for j, z in enumerate(ov):
        out[(j, Part.RE)] = 0.5 * (1 + z.real)
        out[(j, Part.IM)] = 0.5 * (1 + z.imag)
    return out


@dataclass(frozen=True)
class Estimate:
    value: complex
    std_error: float
    records: tuple
    total_shots: int

    def as_dict(self) -> dict:
        return {
            "estimate": [self.value.real, self.value.imag],
            "std_error": self.std_error,
            "total_shots": self.total_shots,
            "records": [r.as_dict() for r in self.records],
        }


def estimate_observable(
    terms: WeightedTermList,
    u: Preparation,
    v: Preparation,
    plan: Optional[ShotPlan],
    seed: int = 0,
    exact: bool = False,
    mode: str = "direct",
    probabilities: Optional[dict] = None,
) -> Estimate:
    """``sum_j alpha_j <0|V^dagger G_j U|0>`` from per-term Hadamard tests.

    With ``u`` equal to ``v`` only real parts are tested. ``exact`` replaces
    sampling with the exact probabilities. ``probabilities`` may carry
    precomputed zero-outcome probabilities to skip re-simulation.
    """
    parts = (Part.RE,) if u.same_as(v) else (Part.RE, Part.IM)
    probs = probabilities if probabilities is not None else term_probabilities(terms, u, v, mode)

    if exact:
        value = 0j
        for j, (alpha, _) in enumerate(terms):
            re = 2 * probs[(j, Part.RE)] - 1
            im = 2 * probs[(j, Part.IM)] - 1 if Part.IM in parts else 0.0
            value += alpha * complex(re, im)
        return Estimate(value, 0.0, (), 0)

    if plan is None:
        raise IncompletePlan("sampled estimation needs a shot plan")
    shots = plan.lookup()
    missing = [(j, p.value) for j in range(len(terms)) for p in parts if (j, p) not in shots]
    if missing:
        raise IncompletePlan(f"shot plan does not cover {missing[:5]}")

    value, var, records = 0j, 0.0, []
    for j, (alpha, _) in enumerate(terms):
        for p in parts:
            rec = _draw(probs[(j, p)], shots[(j, p)], _term_rng(seed, j, p), j, p)
            records.append(rec)
            value += alpha * (rec.estimate if p is Part.RE else 1j * rec.estimate)
            var += alpha**2 * rec.std_error**2
    return Estimate(value, math.sqrt(var), tuple(records), sum(r.shots for r in records))


def allocate_shots(
    coefficients: Sequence[float], epsilon: float, parts=(Part.RE,)
) -> ShotPlan:
    """Shots proportional to ``|alpha_j|`` with total ``ceil((sum|alpha|)**2 / eps**2)``.

    The total is split by largest remainders, then every term is raised to
    at least one shot; that floor is the only way the total can grow.
    """
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise InvalidTolerance(f"epsilon must be positive and finite, got {epsilon!r}")
    weights = np.abs(np.asarray(coefficients, dtype=float))
    norm1 = float(weights.sum())
    total = math.ceil(norm1**2 / epsilon**2) if norm1 > 0 else len(weights)
    if norm1 > 0:
        raw = total * weights / norm1
    else:
        raw = np.full(len(weights), total / max(len(weights), 1))
    base = np.floor(raw).astype(np.int64)
    short = total - int(base.sum())
    order = np.argsort(-(raw - base), kind="stable")
    base[order[:short]] += 1
    base = np.maximum(base, 1)
    per_term = tuple((j, Part(p), int(m)) for j, m in enumerate(base) for p in parts)
    return ShotPlan(epsilon, per_term)


@dataclass(frozen=True)
class ShotScaling:
    shots: tuple
    std: tuple
    slope: float
    seeds: int

    def as_dict(self) -> dict:
        return {
            "seeds": self.seeds,
            "table": [{"shots": m, "std": s} for m, s in zip(self.shots, self.std)],
            "slope": self.slope,
        }


def shot_scaling(
    terms: WeightedTermList,
    u: Preparation,
    shots: Sequence[int] = (100, 1_000, 10_000, 100_000),
    seeds: int = 100,
    seed: int = 0,
) -> ShotScaling:
    """Empirical spread of the energy estimate versus shots per term.

    Returns the standard deviation over ``seeds`` repetitions at each shot
    count and the slope of log(std) against log(shots).
    """
    probs = term_probabilities(terms, u, u)
    stds = []
    for k, m in enumerate(shots):
        plan = ShotPlan.uniform(len(terms), int(m))
        base = np.random.SeedSequence([int(seed), k]).generate_state(seeds)
        vals = [
            estimate_observable(terms, u, u, plan, int(s), probabilities=probs).value.real
            for s in base
        ]
        stds.append(float(np.std(vals, ddof=1)))
    x, y = np.log(np.asarray(shots, dtype=float)), np.log(np.asarray(stds))
    slope = float(np.polyfit(x, y, 1)[0]) if np.all(np.isfinite(y)) else float("nan")
    return ShotScaling(tuple(int(m) for m in shots), tuple(stds), slope, seeds)
