"""Augmented Lagrangian solver for the momentum NLP.

Outer loop: PHR multiplier updates on the linear rows with a growing penalty.
Inner loop: scipy L-BFGS-B on the smooth augmented objective. Once the
iterate is nearly feasible it is projected onto the near-active rows with
SLSQP so the final plan satisfies the bounds to solver precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from src.errors import InvalidArgumentError, SolverDivergedError
from src.logger import logger
from src.momentum_opt.problem import NlpProblem

RHO_INIT = 10.0
RHO_GROWTH = 10.0
RHO_MAX = 1e8
# Required violation decrease per outer iteration before the penalty grows
PROGRESS_RATIO = 0.25
# Normalized violation below which the projection polish is attempted
POLISH_GAP = 1e-3
# Rows within this normalized slack count as near-active in the polish
ACTIVE_MARGIN = 1e-6
POLISH_ROUNDS = 5
INNER_FTOL = 1e-13
INNER_GTOL = 1e-9


@dataclass
class SolveDiagnostics:
    success: bool
    reason: str
    objective: float
    max_violation: float
    kkt_residual: float
    outer_iterations: int
    iterations: int
    evaluations: int
    history: list[float] = field(default_factory=list)
    violated: list[str] = field(default_factory=list)

    def to_document(self) -> dict:
        return {
            "success": self.success,
            "reason": self.reason,
            "objective": self.objective,
            "max_violation": self.max_violation,
            "kkt_residual": self.kkt_residual,
            "outer_iterations": self.outer_iterations,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "history": list(self.history),
            "violated": list(self.violated),
        }

    @classmethod
    def from_document(cls, doc: dict) -> "SolveDiagnostics":
        return cls(**doc)


@dataclass
class SolveResult:
    x: np.ndarray
    diagnostics: SolveDiagnostics


class _NonFinite(Exception):
    pass


class _ScaledProblem:
    """Problem in scaled variables z = x / scale with unit-norm constraint rows."""

    def __init__(self, problem: NlpProblem):
        self.problem = problem
        self.scale = problem.scale
        self.G, self.h = _normalize(problem.A_ub * self.scale[None, :], problem.b_ub)
        self.E, self.e = _normalize(problem.A_eq * self.scale[None, :], problem.b_eq)
        self.evaluations = 0
        self.last_finite: np.ndarray | None = None

    def objective(self, z):
        self.evaluations += 1
        x = z * self.scale
        value, grad = self.problem.objective_and_gradient(x)
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            raise _NonFinite()
        self.last_finite = x
        return value, grad * self.scale

    def lagrangian(self, z, lam, nu, rho):
        value, grad = self.objective(z)
        if self.h.size:
            shifted = np.maximum(0.0, lam + rho * (self.G @ z - self.h))
            value += float((shifted @ shifted - lam @ lam) / (2.0 * rho))
            grad = grad + self.G.T @ shifted
        if self.e.size:
            c = self.E @ z - self.e
            value += float(nu @ c + 0.5 * rho * c @ c)
            grad = grad + self.E.T @ (nu + rho * c)
        return value, grad

    def violation(self, z) -> float:
        worst = 0.0
        if self.h.size:
            worst = max(worst, float(np.max(self.G @ z - self.h)))
        if self.e.size:
            worst = max(worst, float(np.max(np.abs(self.E @ z - self.e))))
        return worst

    def kkt(self, z, lam, nu) -> tuple[float, float]:
        value, grad = self.objective(z)
        if self.h.size:
            grad = grad + self.G.T @ lam
        if self.e.size:
            grad = grad + self.E.T @ nu
        return value, float(np.max(np.abs(grad))) / (1.0 + abs(value))


def _normalize(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(A, axis=1) if A.size else np.zeros(A.shape[0])
    norms[norms == 0] = 1.0
    return A / norms[:, None], b / norms


def _project(sp: _ScaledProblem, z: np.ndarray) -> np.ndarray | None:
    """Closest point to z satisfying the near-active rows, adding rows as they break."""
    selected = np.zeros(sp.h.size, dtype=bool)
    if sp.h.size:
        selected = sp.G @ z - sp.h > -ACTIVE_MARGIN
    target = z.copy()
    current = z.copy()
    for _ in range(POLISH_ROUNDS):
        constraints = []
        if selected.any():
            G, h = sp.G[selected], sp.h[selected]
            constraints.append({"type": "ineq", "fun": lambda v, G=G, h=h: h - G @ v,
                                "jac": lambda v, G=G: -G})
        if sp.e.size:
            constraints.append({"type": "eq", "fun": lambda v: sp.E @ v - sp.e,
                                "jac": lambda v: sp.E})
        if not constraints:
            return current
        res = minimize(
            lambda v: (0.5 * float((v - target) @ (v - target)), v - target),
            current,
            jac=True,
            method="SLSQP",
            constraints=constraints,
            options={"maxiter": 200, "ftol": 1e-16},
        )
        if not np.all(np.isfinite(res.x)):
            return None
        current = res.x
        if not sp.h.size:
            return current
        broken = (sp.G @ current - sp.h > 0) & ~selected
        if not broken.any():
            return current
        selected |= broken
    return current


def solve(
    problem: NlpProblem,
    x0: np.ndarray | None = None,
    tol: float | None = None,
    constraint_tol: float | None = None,
    max_outer: int | None = None,
    max_inner: int | None = None,
) -> SolveResult:
    """Minimize the tracking objective subject to the linear rows.

    Raises SolverDivergedError if the objective turns non-finite.
    """
    opt = problem.scenario.optimizer
    tol = opt.tol if tol is None else tol
    constraint_tol = opt.constraint_tol if constraint_tol is None else constraint_tol
    max_outer = opt.max_outer if max_outer is None else max_outer
    max_inner = opt.max_inner if max_inner is None else max_inner

    dim = problem.layout.dim
    x_init = np.zeros(dim) if x0 is None else np.asarray(x0, dtype=float).reshape(-1)
    if x_init.size != dim:
        raise InvalidArgumentError(f"initial point has {x_init.size} entries, expected {dim}")

    sp = _ScaledProblem(problem)
    z = x_init / sp.scale
    lam = np.zeros(sp.h.size)
    nu = np.zeros(sp.e.size)
    rho = RHO_INIT
    prev_violation = np.inf
    history: list[float] = []
    iterations = 0
    reason = "iteration_limit"
    kkt = np.inf
    outer = 0

    try:
        value = sp.objective(z)[0]
        for outer in range(1, max_outer + 1):
            res = minimize(
                sp.lagrangian, z, args=(lam, nu, rho), jac=True, method="L-BFGS-B",
                options={"maxiter": max_inner, "maxcor": 30, "ftol": INNER_FTOL, "gtol": INNER_GTOL},
            )
            z = res.x
            iterations += int(res.nit)
            if sp.h.size:
                lam = np.maximum(0.0, lam + rho * (sp.G @ z - sp.h))
            if sp.e.size:
                nu = nu + rho * (sp.E @ z - sp.e)
            violation = sp.violation(z)
            value, kkt = sp.kkt(z, lam, nu)
            history.append(value)
            logger.debug(
                f"outer {outer}: objective={value:.6e} violation={violation:.3e} "
                f"kkt={kkt:.3e} rho={rho:.1e} inner={res.nit}"
            )

            if kkt <= tol and violation <= POLISH_GAP:
                if problem.max_violation(z * sp.scale) > constraint_tol:
                    projected = _project(sp, z)
                    if projected is not None and sp.violation(projected) < violation:
                        z = projected
                if problem.max_violation(z * sp.scale) <= constraint_tol:
                    value, kkt = sp.kkt(z, lam, nu)
                    reason = "converged"
                    break
            if violation > PROGRESS_RATIO * prev_violation:
                rho = min(rho * RHO_GROWTH, RHO_MAX)
            prev_violation = violation
    except _NonFinite:
        last = sp.last_finite if sp.last_finite is not None else x_init
        raise SolverDivergedError("objective became non-finite during the line search", last)

    x = z * sp.scale
    max_violation = problem.max_violation(x)
    success = bool(reason == "converged" and kkt <= tol and max_violation <= constraint_tol)
    if reason == "converged" and not success:
        reason = "not_converged"
    violated = sorted({f"{r.kind}@phase{r.phase}" for r in problem.violated_rows(x, constraint_tol)})
    diagnostics = SolveDiagnostics(
        success=success,
        reason=reason,
        objective=float(problem.objective(x)),
        max_violation=max_violation,
        kkt_residual=float(kkt),
        outer_iterations=outer,
        iterations=iterations,
        evaluations=sp.evaluations,
        history=history,
        violated=violated,
    )
    log = logger.info if success else logger.warning
    log(
        f"Solve {reason}: objective={diagnostics.objective:.6e} "
        f"violation={max_violation:.3e} iterations={iterations}"
    )
    return SolveResult(x=x, diagnostics=diagnostics)
