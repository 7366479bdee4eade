"""Primal-dual solver with linesearch for sums of composite terms.

Solves ``min_y  sum_l g_l(C_l y) + h(y)`` through its saddle-point form.
Each iteration takes a primal (prox-)gradient step, then grows the step
size and backtracks it until the linesearch certificate

    sqrt(alpha) * sigma * ||C*(z_new - z_old)|| <= eps * ||z_new - z_old||

holds, with the duals updated by their conjugate proxes along the way.
The stopping rule is the relative change of the full primal cost.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .blocks import norm, zeros_like
from .errors import SolverDivergenceError
from .io import RunConfig
from .operators import LinearOperator, space_zeros

__all__ = ["SaddleTerm", "SaddleProblem", "SolveTrace", "solve"]

MAX_BACKTRACKS = 60
_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class SaddleTerm:
    """One ``g_l(C_l y)`` term: its operator, the prox of ``s g_l*``, and
    the value of ``g_l`` for cost tracking."""

    op: LinearOperator
    conj_prox: Callable  # (dual point, step s) -> dual point
    cost: Callable       # (C_l y) -> float


@dataclass(frozen=True)
class SaddleProblem:
    terms: Sequence[SaddleTerm]
    primal_prox: Callable | None = None   # (point, step) -> point; identity if None
    cost_extra: Callable | None = None    # h(y) -> float

    def cost(self, y, cy=None) -> float:
        if cy is None:
            cy = [t.op.apply(y) for t in self.terms]
        total = sum(t.cost(c) for t, c in zip(self.terms, cy))
        if self.cost_extra is not None:
            total += self.cost_extra(y)
        return float(total)

    def zero_duals(self):
        return [space_zeros(t.op.out_space) for t in self.terms]


@dataclass
class SolveTrace:
    """Per-iteration convergence record."""

    cost: list = field(default_factory=list)
    sigma: list = field(default_factory=list)
    trials: list = field(default_factory=list)
    rel_change: list = field(default_factory=list)
    initial_cost: float = np.nan
    stop_reason: str = "max_iters"

    def __len__(self):
        return len(self.cost)

    def append(self, cost, sigma, trials, rel):
        self.cost.append(float(cost))
        self.sigma.append(float(sigma))
        self.trials.append(int(trials))
        self.rel_change.append(float(rel))

    def extend(self, other: "SolveTrace"):
        self.cost.extend(other.cost)
        self.sigma.extend(other.sigma)
        self.trials.extend(other.trials)
        self.rel_change.extend(other.rel_change)
        self.stop_reason = other.stop_reason

    def write_csv(self, path, extra: dict | None = None):
        extra = extra or {}
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(extra) + ["iter", "cost", "sigma", "trials", "rel_change"])
            for i in range(len(self.cost)):
                writer.writerow(
                    list(extra.values())
                    + [i + 1, self.cost[i], self.sigma[i], self.trials[i], self.rel_change[i]]
                )


def _adjoint_sum(terms, duals, y_template):
    acc = zeros_like(y_template)
    for term, z in zip(terms, duals):
        acc = acc + term.op.adjoint(z)
    return acc


def solve(
    problem: SaddleProblem,
    y0,
    z0=None,
    params: RunConfig | None = None,
    *,
    max_iters: int | None = None,
    stop_tol: float | None = None,
    sigma_init: float | None = None,
    growth_cap: float = np.inf,
):
    """Run the linesearch primal-dual iteration.

    Returns ``(y, z, trace)``.  ``params`` supplies sigma0/alpha/rho/
    ls_eps/stop_tol/max_iters; the keyword overrides exist so callers can
    run the solver in warm-started chunks.  The trial step grows by
    ``min(sqrt(1 + theta), growth_cap)`` each iteration, any value of
    which lies in the interval the linesearch allows; a modest cap damps
    the cost oscillation the maximal choice produces on badly
    conditioned problems.
    """
    cfg = params if params is not None else RunConfig()
    alpha = cfg.alpha
    rho = cfg.rho
    eps = cfg.ls_eps
    tol = cfg.stop_tol if stop_tol is None else stop_tol
    iters = cfg.max_iters if max_iters is None else max_iters

    terms = list(problem.terms)
    y = y0.copy() if hasattr(y0, "copy") else y0
    z = [zi.copy() for zi in (z0 if z0 is not None else problem.zero_duals())]

    sigma = float(cfg.sigma0 if sigma_init is None else sigma_init)
    theta = 1.0

    cy = [t.op.apply(y) for t in terms]
    cost_prev = problem.cost(y, cy)
    adj = _adjoint_sum(terms, z, y)

    trace = SolveTrace(initial_cost=cost_prev)
    if not np.isfinite(cost_prev):
        raise SolverDivergenceError("initial cost is not finite", trace)

    for it in range(1, iters + 1):
        y_step = y - sigma * adj
        y_new = problem.primal_prox(y_step, sigma) if problem.primal_prox else y_step
        dy = norm(y_new - y)
        cy_new = [t.op.apply(y_new) for t in terms]

        sigma_trial = sigma * min(np.sqrt(1.0 + theta), growth_cap)
        trials = 0
        while True:
            trials += 1
            if trials > MAX_BACKTRACKS + 1:
                raise SolverDivergenceError(
                    f"linesearch did not terminate after {MAX_BACKTRACKS} backtracks",
                    trace,
                )
            theta_trial = sigma_trial / sigma
            s = alpha * sigma_trial
            z_new = []
            for term, zi, c_new, c_old in zip(terms, z, cy_new, cy):
                c_bar = c_new + theta_trial * (c_new - c_old)
                z_new.append(term.conj_prox(zi + s * c_bar, s))
            adj_new = _adjoint_sum(terms, z_new, y)
            dz = np.sqrt(sum(norm(a - b) ** 2 for a, b in zip(z_new, z)))
            lhs = np.sqrt(alpha) * sigma_trial * norm(adj_new - adj)
            if lhs <= eps * dz:
                break
            sigma_trial *= rho

        y, cy, z, adj = y_new, cy_new, z_new, adj_new
        theta, sigma = theta_trial, sigma_trial

        cost = problem.cost(y, cy)
        rel = abs(cost - cost_prev) / max(abs(cost_prev), _TINY)
        trace.append(cost, sigma, trials, rel)
        if not np.isfinite(cost):
            raise SolverDivergenceError("cost diverged to a non-finite value", trace)
        cost_prev = cost
        # the comparison against the (arbitrary) initial point only counts
        # when the iteration is an exact fixed point; duals need one
        # iteration to become informative
        if rel < tol and (it >= 2 or (dy == 0.0 and dz == 0.0)):
            trace.stop_reason = "converged"
            break

    return y, z, trace
