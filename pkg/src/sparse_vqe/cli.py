"""Command-line entry point: ``sparse-vqe <subcommand> INPUT [flags]``.

Exit codes: 0 on success, 1 when a verification check fails, 2 on bad
input (unreadable file, format violation, invalid flag values).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .decompose import (
    WeightedTermList,
    color_decompose,
    decompose_sparse,
    measured_error,
)
from .errors import SparseVQEError
from .estimator import (
    Part,
    Preparation,
    ShotPlan,
    allocate_shots,
    estimate_observable,
    shot_scaling,
)
from .fermion import (
    build_pair_terms,
    decompose_monomials,
    monomials_to_sparse,
    parse_monomials,
    prefer_monomial_route,
)
from .simulator import AnsatzCircuit, StateVector, apply_term_direct, apply_term_oracle_faithful
from .sparse_core import QueryCounter, SelfInverseTerm, parse_coo, reconstruct_dense, validate
from .vqe import Optimizer, VQEConfig, optimize

SEED_ENV = "SPARSE_VQE_SEED"
DEFAULT_ANSATZ = {"layers": 2, "entangler": "cnot_ring", "rotations": ["ry", "rz"]}


class BadInput(Exception):
    pass


# --- input loading -------------------------------------------------------------


class Problem:
    """A loaded Hamiltonian plus the route used to decompose it."""

    def __init__(self, kind: str, sparse, monomials=None, num_modes=None, route="sparse"):
        self.kind = kind
        self.sparse = sparse
        self.monomials = monomials
        self.num_modes = num_modes
        self.route = route

    @property
    def num_qubits(self) -> int:
        return self.sparse.num_qubits

    def decompose(self, gamma: float) -> WeightedTermList:
        if self.route == "pairs":
            return decompose_monomials(self.monomials, self.num_modes, gamma)
        return decompose_sparse(self.sparse, gamma)


def _read_json(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise BadInput(f"{path}: cannot read ({exc.strerror})") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise BadInput(f"{path}: not valid JSON ({exc})") from None


def load_problem(path: str, kind: str = "auto", route: str = "auto") -> Problem:
    doc = _read_json(path)
    if kind == "auto":
        if isinstance(doc, dict) and "num_modes" in doc:
            kind = "monomials"
        elif isinstance(doc, dict) and "num_qubits" in doc:
            kind = "coo"
        else:
            raise BadInput(f"{path}: cannot tell COO from monomial input (no num_qubits/num_modes)")
    if kind == "coo":
        if route == "pairs":
            raise BadInput("the pair route needs monomial input")
        return Problem("COO", parse_coo(doc))
    num_modes, monomials = parse_monomials(doc)
    build_pair_terms(monomials)  # rejects lists that are not conjugation-closed
    sparse = monomials_to_sparse(monomials, num_modes)
    if route == "auto":
        route = "pairs" if prefer_monomial_route(len(monomials), sparse.sparsity) else "sparse"
    return Problem("MONOMIALS", sparse, monomials, num_modes, route)


def _parse_ansatz(text: Optional[str], num_qubits: int) -> AnsatzCircuit:
    if text is None:
        template = DEFAULT_ANSATZ
    elif text.lstrip().startswith("{"):
        try:
            template = json.loads(text)
        except json.JSONDecodeError as exc:
            raise BadInput(f"--ansatz: not valid JSON ({exc})") from None
    else:
        template = _read_json(text)
    try:
        return AnsatzCircuit.from_template(num_qubits, template)
    except (ValueError, TypeError) as exc:
        raise BadInput(f"--ansatz: {exc}") from None


def _parse_theta(text: Optional[str], count: int, rng: np.random.Generator) -> np.ndarray:
    """Parameters from a JSON list, or seed-derived angles when absent."""
    if text is None:
        return rng.uniform(-math.pi, math.pi, size=count)
    try:
        theta = np.asarray(json.loads(text), dtype=float).ravel()
    except (json.JSONDecodeError, ValueError, TypeError):
        raise BadInput(f"--theta: expected a JSON list of {count} numbers") from None
    if theta.size != count or not np.all(np.isfinite(theta)):
        raise BadInput(f"--theta: expected {count} finite numbers, got {theta.size}")
    return theta


def _resolve_seed(args, required: bool) -> Optional[int]:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise BadInput(f"{SEED_ENV}={env!r} is not an integer") from None
    if required:
        raise BadInput(f"sampled runs need --seed or {SEED_ENV}")
    return 0


def _stream(seed: int, name: str) -> np.random.Generator:
    """Named sub-stream of the run seed."""
    key = [int(b) for b in name.encode()]
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


def _check_gamma(gamma: float) -> float:
    if not (gamma > 0 and math.isfinite(gamma)):
        raise BadInput(f"--gamma must be positive and finite, got {gamma}")
    return gamma


# --- reports ---------------------------------------------------------------------


def _term_entry(coef: float, term: SelfInverseTerm) -> dict:
    return {
        "class": term.phase_class.value,
        "l": term.bit_index,
        "branch": term.branch.value,
        "coefficient": coef,
        "piece": term.parent.label if term.parent is not None else "",
    }


def decompose_report(problem: Problem, gamma: float) -> tuple[dict, WeightedTermList]:
    terms = problem.decompose(gamma)
    err = measured_error(terms, problem.sparse)
    report = {
        "gamma": gamma,
        "L": terms.meta["L"],
        "Lambda": terms.meta["Lambda"],
        "term_count": len(terms),
        "fallback_split_used": bool(terms.fallback_split_used),
        "measured_error": err,
        "residual_error_bound": terms.residual_error_bound,
        "route": problem.route,
        "terms": [_term_entry(c, t) for c, t in terms],
    }
    return report, terms


def _check(name: str, passed: bool, detail=None) -> dict:
    return {"name": name, "passed": bool(passed), "detail": detail}


def verify_report(problem: Problem, gamma: float, seed: int, report: Optional[dict] = None) -> dict:
    """Invariant suite over the input and its decomposition."""
    checks = []
    rep = validate(problem.sparse)
    for c in rep.checks:
        checks.append(_check(f"input.{c.name}", c.passed, c.counterexample))

    if problem.route == "sparse":
        pieces = color_decompose(problem.sparse)
        bad = next((p.label for _, p in pieces if not validate(p).ok), None)
        checks.append(_check("pieces.one_sparse_hermitian", bad is None, bad))
        exact = np.array_equal(pieces.dense(), reconstruct_dense(problem.sparse))
        checks.append(_check("pieces.sum_exact", exact))
        d = problem.sparse.sparsity
        checks.append(_check("pieces.count_bound", len(pieces) <= 2 * d * d, len(pieces)))

    terms = problem.decompose(gamma)
    bad = None
    for j, (_, g) in enumerate(terms):
        t = reconstruct_dense(g)
        if not (np.array_equal(t @ t, np.eye(t.shape[0])) and np.array_equal(t, t.conj().T)):
            bad = j
            break
    checks.append(_check("terms.self_inverse_hermitian", bad is None, bad))
    err = measured_error(terms, problem.sparse)
    checks.append(_check("terms.error_within_bound", err <= terms.residual_error_bound, err))
    if problem.route == "sparse":
        # pair-route pieces overlap, so only the summed bound applies there
        checks.append(_check("terms.error_within_gamma", err <= gamma, err))

    rng = _stream(seed, "verify")
    n = problem.num_qubits
    worst_fid, worst_q, bad_q = 1.0, 0, None
    for j, (_, g) in enumerate(terms):
        psi = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
        psi /= np.linalg.norm(psi)
        s = StateVector.zeros(n, oracle_ancillas=True)
        s.amplitudes[: 1 << n] = psi
        counter = QueryCounter()
        out = apply_term_oracle_faithful(g, s, counter)
        ref = apply_term_direct(g, StateVector.zeros(n).copy(psi.copy()))
        fid = abs(np.vdot(ref.amplitudes, out.amplitudes[: 1 << n])) ** 2
        worst_fid = min(worst_fid, fid)
        worst_q = max(worst_q, counter.parent_total)
        if counter.total != 4 and bad_q is None:
            bad_q = j
    checks.append(_check("oracle.fidelity", worst_fid >= 1 - 1e-12, worst_fid))
    checks.append(_check("oracle.four_parent_queries", bad_q is None, bad_q))
    checks.append(_check("oracle.source_queries_at_most_6", worst_q <= 6, worst_q))

    if report is not None:
        same = report.get("term_count") == len(terms)
        checks.append(_check("report.term_count", same, report.get("term_count")))
        claimed = report.get("measured_error")
        ok = isinstance(claimed, (int, float)) and err <= claimed + 1e-12
        checks.append(_check("report.round_trip", ok, err))

    return {
        "input_kind": problem.kind,
        "route": problem.route,
        "gamma": gamma,
        "passed": all(c["passed"] for c in checks),
        "checks": checks,
    }


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _dump(obj) -> str:
    return json.dumps(obj, default=_json_default)


def _emit(lines: list[str], out: Optional[str]) -> None:
    text = "\n".join(lines) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# --- subcommands -------------------------------------------------------------------


def cmd_decompose(args) -> int:
    problem = load_problem(args.input, args.kind, args.route)
    report, _ = decompose_report(problem, _check_gamma(args.gamma))
    _emit([_dump(report)], args.out)
    return 0


def _shot_plan(args, terms: WeightedTermList, parts) -> Optional[ShotPlan]:
    if args.exact:
        return None
    if args.epsilon is not None:
        try:
            return allocate_shots(terms.coefficients, args.epsilon, parts)
        except ValueError as exc:
            raise BadInput(f"--epsilon: {exc}") from None
    if args.shots is None or args.shots < 1:
        raise BadInput("give --shots N (N >= 1), --epsilon, or --exact")
    return ShotPlan.uniform(len(terms), args.shots, parts)


def cmd_estimate(args) -> int:
    problem = load_problem(args.input, args.kind, args.route)
    seed = _resolve_seed(args, required=not args.exact)
    terms = problem.decompose(_check_gamma(args.gamma))
    ansatz = _parse_ansatz(args.ansatz, problem.num_qubits)
    theta = _parse_theta(args.theta, ansatz.parameter_count, _stream(seed, "theta"))
    u = Preparation(ansatz, theta)
    v = u if args.theta_v is None else Preparation(
        ansatz, _parse_theta(args.theta_v, ansatz.parameter_count, _stream(seed, "theta_v"))
    )
    parts = (Part.RE,) if u.same_as(v) else (Part.RE, Part.IM)
    plan = _shot_plan(args, terms, parts)
    est = estimate_observable(terms, u, v, plan, seed, exact=args.exact, mode=args.mode)
    _emit([_dump(est.as_dict())], args.out)
    return 0


def cmd_vqe(args) -> int:
    problem = load_problem(args.input, args.kind, args.route)
    seed = _resolve_seed(args, required=not args.exact)
    if not args.exact and (args.shots is None or args.shots < 1):
        raise BadInput("give --shots N (N >= 1) or --exact")
    terms = problem.decompose(_check_gamma(args.gamma))
    ansatz = _parse_ansatz(args.ansatz, problem.num_qubits)
    config = VQEConfig(
        optimizer=Optimizer(args.optimizer.upper()),
        max_iters=args.max_iters,
        f_tol=args.f_tol,
        seed=seed,
        shots_per_eval=None if args.exact else args.shots,
        restarts=args.restarts,
        mode=args.mode,
    )
    trace = optimize(terms, ansatz, config)
    lines = [_dump({"iteration": k, **e.as_dict()}) for k, e in enumerate(trace.iterations)]
    lines.append(_dump({"summary": trace.summary()}))
    _emit(lines, args.out)
    return 0


def cmd_verify(args) -> int:
    problem = load_problem(args.input, args.kind, args.route)
    seed = _resolve_seed(args, required=False)
    report = _read_json(args.report) if args.report else None
    gamma = args.gamma
    if report is not None and args.gamma_given is False and "gamma" in report:
        gamma = float(report["gamma"])
    result = verify_report(problem, _check_gamma(gamma), seed, report)
    _emit([_dump(result)], args.out)
    return 0 if result["passed"] else 1


def cmd_bench_shots(args) -> int:
    problem = load_problem(args.input, args.kind, args.route)
    seed = _resolve_seed(args, required=True)
    terms = problem.decompose(_check_gamma(args.gamma))
    ansatz = _parse_ansatz(args.ansatz, problem.num_qubits)
    theta = _parse_theta(args.theta, ansatz.parameter_count, _stream(seed, "theta"))
    try:
        shots = [int(m) for m in args.shots_list.split(",")]
    except ValueError:
        raise BadInput(f"--shots-list: expected comma-separated integers, got {args.shots_list!r}") from None
    if len(shots) < 2 or min(shots) < 1:
        raise BadInput("--shots-list needs at least two positive shot counts")
    res = shot_scaling(terms, Preparation(ansatz, theta), shots, args.seeds, seed)
    _emit([_dump(res.as_dict())], args.out)
    return 0


# --- argument parsing ----------------------------------------------------------------


class _GammaAction(argparse.Action):
    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, values)
        namespace.gamma_given = True


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparse-vqe",
        description="Self-inverse decompositions and Hadamard-test VQE for sparse Hamiltonians.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("input", help="COO or monomial JSON file")
    common.add_argument("--kind", choices=["auto", "coo", "monomials"], default="auto")
    common.add_argument("--route", choices=["auto", "pairs", "sparse"], default="auto",
                        help="decomposition route for monomial input")
    common.add_argument("--gamma", type=float, default=1e-3, action=_GammaAction,
                        help="max-norm error target (default 1e-3)")
    common.add_argument("--seed", type=int, default=None,
                        help=f"run seed (falls back to ${SEED_ENV})")
    common.add_argument("--mode", choices=["direct", "oracle"], default="direct")
    common.add_argument("--out", default=None, help="write the report here instead of stdout")

    sampling = argparse.ArgumentParser(add_help=False)
    group = sampling.add_mutually_exclusive_group()
    group.add_argument("--shots", type=int, default=None, help="shots per term and part")
    group.add_argument("--exact", action="store_true", help="infinite-shot expectation values")
    group.add_argument("--epsilon", type=float, default=None,
                       help="target precision; shots allocated by |alpha_j|")
    sampling.add_argument("--ansatz", default=None, help="template JSON (inline or path)")

    sub.add_parser("decompose", parents=[common], help="self-inverse decomposition report")

    p = sub.add_parser("estimate", parents=[common, sampling], help="<V|H|U> by Hadamard tests")
    p.add_argument("--theta", default=None, help="JSON list of U parameters")
    p.add_argument("--theta-v", default=None, help="JSON list of V parameters (matrix element)")

    p = sub.add_parser("vqe", parents=[common, sampling], help="minimize the energy")
    p.add_argument("--optimizer", choices=["simplex", "spsa"], default="simplex")
    p.add_argument("--max-iters", type=int, default=4000, help="objective evaluation budget")
    p.add_argument("--f-tol", type=float, default=1e-10)
    p.add_argument("--restarts", type=int, default=1)

    p = sub.add_parser("verify", parents=[common], help="invariant suite over the input")
    p.add_argument("--report", default=None, help="decompose report to round-trip")

    p = sub.add_parser("bench-shots", parents=[common], help="estimator std versus shots")
    p.add_argument("--shots-list", default="100,1000,10000,100000")
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--ansatz", default=None, help="template JSON (inline or path)")
    p.add_argument("--theta", default=None, help="JSON list of parameters")

    parser.set_defaults(gamma_given=False)
    return parser


COMMANDS = {
    "decompose": cmd_decompose,
    "estimate": cmd_estimate,
    "vqe": cmd_vqe,
    "verify": cmd_verify,
    "bench-shots": cmd_bench_shots,
}


def run(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        return COMMANDS[args.command](args)
    except (BadInput, SparseVQEError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())
