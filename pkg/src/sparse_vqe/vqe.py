"""Classical outer loop: minimize the estimated energy over ansatz parameters."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .decompose import WeightedTermList
from .estimator import Preparation, ShotPlan, estimate_observable, term_probabilities
from .simulator import AnsatzCircuit


class Optimizer(str, Enum):
    SIMPLEX = "SIMPLEX"
    SPSA = "SPSA"


class StopReason(str, Enum):
    TOLERANCE = "TOLERANCE"
    MAX_ITERS = "MAX_ITERS"
    STALLED = "STALLED"


@dataclass
class VQEConfig:
    """Optimizer settings.

    ``max_iters`` caps objective evaluations; an SPSA step uses two.
    ``shots_per_eval=None`` means exact expectation values.
    """

    optimizer: Optimizer = Optimizer.SIMPLEX
    max_iters: int = 4000
    f_tol: float = 1e-10
    seed: int = 0
    shots_per_eval: Optional[int] = None
    restarts: int = 1
    mode: str = "direct"
    init_spread: float = 0.1
    simplex_step: float = 0.5
    simplex_xatol: float = 1e-6
    min_window: int = 50
    spsa_a: float = 0.5
    spsa_c: float = 0.1
    spsa_stability: float = 10.0

    @property
    def exact(self) -> bool:
        return self.shots_per_eval is None


@dataclass(frozen=True)
class TraceEntry:
    params: tuple
    energy: float
    std_error: float
    shots: int

    def as_dict(self) -> dict:
        return {
            "params": list(self.params),
            "energy": self.energy,
            "std_error": self.std_error,
            "total_shots": self.shots,
        }


@dataclass
class OptimizationTrace:
    iterations: list = field(default_factory=list)
    best: Optional[tuple] = None
    converged: bool = False
    stop_reason: StopReason = StopReason.MAX_ITERS

    @property
    def best_energy(self) -> float:
        return self.best[1]

    @property
    def best_params(self) -> np.ndarray:
        return np.asarray(self.best[0])

    def best_history(self) -> list[float]:
        return list(np.minimum.accumulate([e.energy for e in self.iterations]))

    def summary(self) -> dict:
        return {
            "best_energy": self.best[1],
            "best_params": list(self.best[0]),
            "converged": self.converged,
            "stop_reason": self.stop_reason.value,
            "evaluations": len(self.iterations),
            "total_shots": self.iterations[-1].shots if self.iterations else 0,
        }


class _Stop(Exception):
    def __init__(self, reason: StopReason):
        self.reason = reason


class _Objective:
    """Energy estimator that records every call and enforces the stopping rules."""

    def __init__(self, terms, ansatz, config: VQEConfig):
        self.terms = terms
        self.ansatz = ansatz
        self.config = config
        self.trace = OptimizationTrace()
        self.window = max(2 * ansatz.parameter_count, config.min_window)
        # exact simplex runs end on the simplex spread instead: the best
        # vertex can sit still for many iterations while the rest contracts
        self.use_window = not (config.exact and config.optimizer is Optimizer.SIMPLEX)
        self.best_hist: list[float] = []
        self.shots = 0
        self.plan = (
            None if config.exact else ShotPlan.uniform(len(terms), config.shots_per_eval)
        )

    def __call__(self, theta) -> float:
        cfg = self.config
        k = len(self.trace.iterations)
        if k >= cfg.max_iters:
            raise _Stop(StopReason.MAX_ITERS)
        prep = Preparation(self.ansatz, theta)
        probs = term_probabilities(self.terms, prep, prep, cfg.mode)
        seed = int(np.random.SeedSequence([cfg.seed, 1, k]).generate_state(1)[0])
        est = estimate_observable(
            self.terms, prep, prep, self.plan, seed, exact=cfg.exact, probabilities=probs
        )
        energy = float(est.value.real)
        self.shots += est.total_shots
        entry = TraceEntry(tuple(float(t) for t in theta), energy, est.std_error, self.shots)
        self.trace.iterations.append(entry)
        if self.trace.best is None or energy < self.trace.best[1]:
            self.trace.best = (entry.params, energy)
        return energy

    def step(self, *_) -> None:
        """Called once per optimizer iteration; applies the stall window."""
        if not self.use_window:
            return
        self.best_hist.append(self.trace.best[1])
        n = len(self.best_hist)
        if n > self.window and self.best_hist[n - 1 - self.window] - self.best_hist[-1] < self.config.f_tol:
            raise _Stop(StopReason.TOLERANCE)


def _initial_point(rng: np.random.Generator, p: int, spread: float, center=None) -> np.ndarray:
    base = np.zeros(p) if center is None else np.asarray(center, dtype=float)
    return base + rng.uniform(-spread, spread, size=p)


def _run_simplex(obj: _Objective, x0: np.ndarray) -> StopReason:
    cfg = obj.config
    remaining = cfg.max_iters - len(obj.trace.iterations)
    simplex = np.vstack([x0, x0 + cfg.simplex_step * np.eye(x0.size)])
    try:
        res = minimize(
            obj, x0, method="Nelder-Mead", callback=obj.step,
            options={
                "maxfev": remaining + 1, "xatol": cfg.simplex_xatol, "fatol": cfg.f_tol,
                "adaptive": x0.size > 4, "initial_simplex": simplex,
            },
        )
    except _Stop as stop:
        return stop.reason
    return StopReason.TOLERANCE if res.success else StopReason.STALLED


def _run_spsa(obj: _Objective, x0: np.ndarray, rng: np.random.Generator) -> StopReason:
    cfg = obj.config
    theta = x0.copy()
    big_a = cfg.spsa_stability
    try:
        for k in range(cfg.max_iters):
            ak = cfg.spsa_a / (k + 1 + big_a) ** 0.602
            ck = cfg.spsa_c / (k + 1) ** 0.101
            delta = rng.choice([-1.0, 1.0], size=theta.size)
            f_plus = obj(theta + ck * delta)
            f_minus = obj(theta - ck * delta)
            theta = theta - ak * (f_plus - f_minus) / (2 * ck) * delta
            obj.step()
    except _Stop as stop:
        return stop.reason
    return StopReason.MAX_ITERS


def optimize(terms: WeightedTermList, ansatz: AnsatzCircuit, config: VQEConfig) -> OptimizationTrace:
    """Minimize the estimated energy of ``terms`` over the ansatz parameters.

    Restarts begin from the best point so far with a fresh perturbation.
    Sampled runs and SPSA stop when the best energy improves by less than
    ``f_tol`` across ``max(2 * parameter_count, min_window)`` consecutive
    optimizer iterations. Exact simplex runs stop when the simplex spread
    falls below ``f_tol`` in value and ``simplex_xatol`` in parameters.
    Every run stops when the evaluation budget runs out.
    """
    if len(terms) == 0:
        raise ValueError("empty term list")
    if ansatz.parameter_count < 1:
        raise ValueError("ansatz has no parameters to optimize")
    config.optimizer = Optimizer(config.optimizer)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0]))
    obj = _Objective(terms, ansatz, config)
    reason = StopReason.MAX_ITERS
    for r in range(max(1, config.restarts)):
        center = None if obj.trace.best is None else obj.trace.best[0]
        x0 = _initial_point(rng, ansatz.parameter_count, config.init_spread, center)
        obj.best_hist.clear()
        if config.optimizer is Optimizer.SIMPLEX:
            reason = _run_simplex(obj, x0)
        else:
            reason = _run_spsa(obj, x0, rng)
        if reason is StopReason.MAX_ITERS or len(obj.trace.iterations) >= config.max_iters:
            reason = StopReason.MAX_ITERS
            break
    obj.trace.stop_reason = reason
    obj.trace.converged = reason is StopReason.TOLERANCE
    return obj.trace
