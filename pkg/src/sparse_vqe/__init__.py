"""Variational eigensolvers for sparse Hamiltonians via self-inverse decompositions."""
from .decompose import (
    WeightedTermList,
    bit_decompose_one_sparse,
    choose_num_bits,
    color_decompose,
    decompose_sparse,
    measured_error,
    term_count_bound,
)
from .estimator import (
    Part,
    Preparation,
    ShotPlan,
    allocate_shots,
    estimate_observable,
    hadamard_probability,
    sample_term,
)
from .fermion import LadderMonomial, LadderOp, OpKind, decompose_monomials, hopping, number
from .simulator import AnsatzCircuit, Gate, StateVector
from .sparse_core import (
    OneSparseHermitian,
    QueryCounter,
    SelfInverseTerm,
    SparseOracleMatrix,
    reconstruct_dense,
    validate,
)
from .vqe import OptimizationTrace, Optimizer, StopReason, VQEConfig, optimize

__all__ = [
    "AnsatzCircuit", "Gate", "LadderMonomial", "LadderOp", "OneSparseHermitian", "OpKind",
    "OptimizationTrace", "Optimizer", "Part", "Preparation", "QueryCounter", "SelfInverseTerm",
    "ShotPlan", "SparseOracleMatrix", "StateVector", "StopReason", "VQEConfig",
    "WeightedTermList", "allocate_shots", "bit_decompose_one_sparse", "choose_num_bits",
    "color_decompose", "decompose_monomials", "decompose_sparse", "estimate_observable",
    "hadamard_probability", "hopping", "measured_error", "number", "optimize",
    "reconstruct_dense", "sample_term", "term_count_bound", "validate",
]
