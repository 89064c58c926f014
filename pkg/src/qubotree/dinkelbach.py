"""Iterative ratio search for the categorical split objective.

Dinkelbach's parametric scheme: minimizing the ratio n(q)/d(q) is solved as a
sequence of binary quadratic subproblems n(q) - lam_k * d(q), with lam
updated to the incumbent ratio. Trivial minimizers (empty child) reset lam to
the parent bound n * Var, and the loop stops only at a non-trivial
near-zero objective, so one-sided "splits" can never be reported as optima.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .qubo import build_qubo, eval_fractional
from .solvers import SolverConfig, solve
from .stats import NodeStats, VMatrix, node_variance


def lambda_upper_bound(node: NodeStats) -> float:
    """Parent weighted variance; no split can cost more."""
    if node.n < 1:
        raise ValueError("empty node")
    return node.n * node_variance(node)


@dataclass(frozen=True)
class DinkelbachConfig:
    """Initialization mode, stopping tolerance, and iteration cap.

    ``mode`` is "upper_bound" (start at the parent bound, guaranteeing a
    monotone non-increasing lam sequence), "zero", or "custom" with
    ``custom_value``. The tolerance is relative to lam * d(q) so it tracks
    the data scale.
    """

    mode: str = "upper_bound"
    custom_value: Optional[float] = None
    rel_tolerance: float = 1e-9
    max_iterations: int = 50

    def __post_init__(self):
        if self.mode not in ("upper_bound", "zero", "custom"):
            raise ValueError(f"unknown initialization mode {self.mode!r}")
        if self.mode == "custom" and (self.custom_value is None or self.custom_value < 0):
            raise ValueError("custom mode needs a nonnegative custom_value")
        if self.rel_tolerance <= 0 or self.max_iterations < 1:
            raise ValueError("need rel_tolerance > 0 and max_iterations >= 1")

    def initial_lambda(self, node: NodeStats) -> float:
        if self.mode == "zero":
            return 0.0
        if self.mode == "custom":
            return float(self.custom_value)
        return lambda_upper_bound(node)


@dataclass(frozen=True)
class TraceStep:
    index: int
    lambda_in: float
    q: tuple
    f_value: float
    ratio: float
    lambda_out: float


@dataclass
class IterationTrace:
    steps: list = field(default_factory=list)
    converged: bool = False

    def rows(self):
        """Rows keyed like the trace table: iteration, lambda_initial,
        binary_vector, score, lambda_final."""
        return [
            {
                "iteration": s.index,
                "lambda_initial": s.lambda_in,
                "binary_vector": "(" + ",".join(str(b) for b in s.q) + ")",
                "score": s.ratio,
                "lambda_final": s.lambda_out,
            }
            for s in self.steps
        ]


def dinkelbach_split(
    v: VMatrix,
    aggs,
    node: NodeStats,
    solver_cfg: Optional[SolverConfig] = None,
    dk_cfg: Optional[DinkelbachConfig] = None,
):
    """Run the ratio iteration on one categorical node.

    Returns (q, lam_star, trace) where lam_star is the cost of the returned
    assignment. The solver never yields a trivial vector, so when the true
    minimizer of the subproblem is trivial (solver optimum still positive,
    which happens below the optimal ratio) the step is recorded against the
    all-zeros vector and lam resets to the parent bound.

    On a zero-variance node there is nothing to split; the best-so-far
    assignment is returned flagged non-converged with lam_star = 0.
    """
    solver_cfg = solver_cfg or SolverConfig()
    dk_cfg = dk_cfg or DinkelbachConfig()
    m = v.m
    if m < 2:
        raise ValueError("need at least two categories")
    if node.n < 2:
        raise ValueError("need at least two observations")

    trace = IterationTrace()
    upper = lambda_upper_bound(node)
    if upper == 0.0:
        q0 = tuple([1] + [0] * (m - 1))
        return q0, 0.0, trace

    lam = dk_cfg.initial_lambda(node)
    best_q: Optional[tuple] = None
    best_ratio = np.inf

    for k in range(1, dk_cfg.max_iterations + 1):
        problem = build_qubo(v, aggs, node, lam)
        outcome = solve(problem, solver_cfg)
        parts = eval_fractional(v, aggs, node, outcome.q)
        f_val = parts.numerator - lam * parts.denominator
        tol = dk_cfg.rel_tolerance * max(1.0, lam * parts.denominator)

        if f_val > tol:
            # The solver's best non-trivial value is still positive, so the
            # unconstrained minimizer is the trivial assignment: reset lam.
            trace.steps.append(TraceStep(k, lam, tuple([0] * m), 0.0, upper, upper))
            if abs(upper - lam) <= dk_cfg.rel_tolerance * max(1.0, lam):
                break
            lam = upper
            continue

        ratio = parts.ratio()
        trace.steps.append(TraceStep(k, lam, outcome.q, f_val, ratio, ratio))
        if ratio < best_ratio:
            best_ratio = ratio
            best_q = outcome.q
        if abs(f_val) <= tol:
            trace.converged = True
            return outcome.q, ratio, trace
        if abs(ratio - lam) <= dk_cfg.rel_tolerance * max(1.0, lam):
            trace.converged = True
            return outcome.q, ratio, trace
        lam = ratio

    if best_q is None:
        best_q = tuple([1] + [0] * (m - 1))
        best_ratio = float(
            eval_fractional(v, aggs, node, best_q).ratio()
        )
    return best_q, float(best_ratio), trace
