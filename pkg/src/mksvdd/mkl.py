"""Multiple kernel learning: reduced-gradient descent on simplex weights.

The outer loop minimizes the inner one-class optimum J(d) over convex
kernel combinations, re-solving the dual at every probe. The slim variant
subtracts lambda * card(alpha) from the objective used in line-search and
acceptance comparisons, rewarding solutions with more support vectors; the
penalty is removed again for the duality-gap stopping test.

Orientation note: for "svdd" the reported J(d) is itself minimized. For
"ocsvm" the reported J(d) = 1/2 alpha' K_d alpha is the negated inner
primal value, so the loop minimizes -J(d); the trace records the objective
actually descended.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .kernels import KernelDictionary, as_weights, combine
from .models import KINDS, OneClassModel, fit_one_class
from .qp import AlphaSolution, QpProblem, solve, solve_raw


@dataclass(frozen=True)
class MklConfig:
    """Hyperparameters of one multiple-kernel fit."""

    C: float
    lam: float = 0.0
    gap_tol: float = 1e-4
    max_outer_iters: int = 500
    ls_shrink: float = 0.5
    ls_max_probes: int = 20
    kkt_tol: float = 1e-6

    def __post_init__(self) -> None:
        if self.C <= 0:
            raise ValueError("C must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if not 0 < self.ls_shrink < 1:
            raise ValueError("line-search shrink factor must be in (0, 1)")
        if self.max_outer_iters < 1 or self.ls_max_probes < 1:
            raise ValueError("iteration caps must be at least 1")


@dataclass(frozen=True)
class MklStep:
    iteration: int
    weights: np.ndarray
    objective: float
    card: int
    gap: float
    step_size: float


@dataclass
class MklTrace:
    """Per-iteration diagnostics of one outer run.

    objective holds the value the loop descends (J for svdd, -J for
    ocsvm), so it is non-increasing across accepted steps when lam = 0.
    """

    kind: str
    steps: list[MklStep] = field(default_factory=list)
    converged: bool = False
    message: str = ""

    def to_csv(self, path) -> None:
        nk = self.steps[0].weights.size if self.steps else 0
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["iteration", "objective", "gap", "card", "step_size"]
                + [f"d{m}" for m in range(nk)]
            )
            for s in self.steps:
                writer.writerow(
                    [s.iteration, repr(s.objective), repr(s.gap), s.card,
                     repr(s.step_size)]
                    + [repr(float(w)) for w in s.weights]
                )


def _check_kind(kind: str) -> None:
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")


def _solve_at(dictionary, d, C, kind, warm_start=None, kkt_tol=1e-6) -> AlphaSolution:
    K = combine(dictionary, d)
    q = K.diag.copy() if kind == "svdd" else np.zeros(K.size)
    return solve(QpProblem(K.values, q, C), warm_start=warm_start, kkt_tol=kkt_tol)


class _StackedKernels:
    """Dictionary grams stacked for fast convex combinations."""

    def __init__(self, dictionary: KernelDictionary):
        self.stack = np.stack([g.values for g in dictionary.grams])
        self.diags = np.stack([g.diag for g in dictionary.grams])

    def solve_at(self, d, C, kind, warm_start=None, kkt_tol=1e-6) -> AlphaSolution:
        K = np.tensordot(d, self.stack, axes=1)
        q = d @ self.diags if kind == "svdd" else np.zeros(K.shape[0])
        return solve_raw(K, q, C, warm_start=warm_start, kkt_tol=kkt_tol)


def _per_kernel_terms(dictionary: KernelDictionary, solution: AlphaSolution):
    """Per-kernel (linear, quadratic) pieces lin_m = diag_m . a and
    quad_m = a' K_m a, computed on the support-vector block."""
    idx = solution.sv_indices
    a = solution.alpha[idx]
    lin = np.empty(dictionary.nk)
    quad = np.empty(dictionary.nk)
    for m, g in enumerate(dictionary.grams):
        block = g.values[np.ix_(idx, idx)]
        lin[m] = float(g.diag[idx] @ a)
        quad[m] = float(a @ (block @ a))
    return lin, quad


def mkl_objective(
    dictionary: KernelDictionary,
    d,
    C: float,
    kind: str = "svdd",
    warm_start=None,
    kkt_tol: float = 1e-6,
) -> tuple[float, AlphaSolution]:
    """Inner optimum J(d) at the combined kernel, plus the solving alpha.

    svdd: J(d) = sum_i a_i K_d(i,i) - a' K_d a (the dual maximum).
    ocsvm: J(d) = 1/2 a' K_d a at the dual minimizer.
    """
    _check_kind(kind)
    weights = as_weights(d, dictionary.nk)
    solution = _solve_at(dictionary, weights, C, kind, warm_start, kkt_tol)
    if kind == "svdd":
        return solution.objective, solution
    return -solution.objective / 2.0, solution


def mkl_gradient(
    dictionary: KernelDictionary, solution: AlphaSolution, kind: str = "svdd"
) -> np.ndarray:
    """Partial derivatives of J(d) per kernel, holding alpha fixed.

    svdd: dJ/dd_m = sum_i a_i k_m(x_i,x_i) - a' K_m a.
    ocsvm: dJ/dd_m = 1/2 a' K_m a.
    """
    _check_kind(kind)
    if solution.alpha.size != dictionary.n_train:
        raise ValueError(
            f"alpha length {solution.alpha.size} does not match "
            f"dictionary size {dictionary.n_train}"
        )
    lin, quad = _per_kernel_terms(dictionary, solution)
    if kind == "svdd":
        return lin - quad
    return quad / 2.0


def duality_gap(
    dictionary: KernelDictionary,
    d,
    solution: AlphaSolution,
    kind: str = "svdd",
    objective: float | None = None,
) -> float:
    """Gap between J(d) and the best single-kernel bound at this alpha.

    Nonnegative, and zero at the multiple-kernel optimum. Computed as
    sum_m d_m (t_m - min_m t_m) for svdd and sum_m d_m (max_m t_m - t_m)
    for ocsvm, where t is the per-kernel gradient vector; both forms are
    exact zeros for nk = 1 and for duplicated kernels. When the matching
    J(d) is supplied it is cross-checked against the recombination to
    catch stale alphas.
    """
    _check_kind(kind)
    weights = as_weights(d, dictionary.nk)
    t = mkl_gradient(dictionary, solution, kind)
    recombined = float(weights @ t)
    if objective is not None:
        scale = max(1.0, abs(objective))
        if abs(objective - recombined) > 1e-6 * scale:
            raise ValueError(
                "objective does not match this alpha and d "
                f"({objective:.6g} vs {recombined:.6g}); stale solution?"
            )
    if kind == "svdd":
        return float(weights @ (t - t.min()))
    return float(weights @ (t.max() - t))


def _descent_direction(d: np.ndarray, work_grad: np.ndarray) -> np.ndarray:
    """SimpleMKL reduced-gradient direction against the largest weight."""
    pivot = int(np.argmax(d))
    direction = work_grad[pivot] - work_grad
    direction[pivot] = 0.0
    blocked = (d <= 0.0) & (direction < 0.0)
    direction[blocked] = 0.0
    direction[pivot] = -direction.sum()
    return direction


def _step(d: np.ndarray, direction: np.ndarray, gamma: float) -> np.ndarray:
    out = d + gamma * direction
    out[out < 1e-15] = 0.0
    total = out.sum()
    if total <= 0.0:
        raise RuntimeError("degenerate simplex step")
    return out / total


def fit_mkl(
    dictionary: KernelDictionary, config: MklConfig, kind: str = "svdd"
) -> tuple[OneClassModel, MklTrace]:
    """Learn kernel weights and the one-class model jointly.

    Starts from uniform weights; each outer iteration computes the
    gradient of the working objective (J for svdd, -J for ocsvm), checks
    the relative duality gap against config.gap_tol, forms the reduced
    gradient against the largest weight, and backtracks from the largest
    feasible step (factor config.ls_shrink, at most config.ls_max_probes
    probes) until the penalized objective J_work - lam * card(alpha)
    improves. Inner solves are warm-started from the current alpha.
    Returns the fitted model at the final weights and the iteration trace.
    """
    _check_kind(kind)
    sign = 1.0 if kind == "svdd" else -1.0
    nk = dictionary.nk
    d = np.full(nk, 1.0 / nk)
    trace = MklTrace(kind=kind)
    stacked = _StackedKernels(dictionary)

    def objective_at(weights, warm=None):
        solution = stacked.solve_at(
            weights, config.C, kind, warm_start=warm, kkt_tol=config.kkt_tol
        )
        J = solution.objective if kind == "svdd" else -solution.objective / 2.0
        return J, solution

    J_spec, sol = objective_at(d)
    work = sign * J_spec
    penalized = work - config.lam * sol.card
    step_size = 0.0

    for it in range(1, config.max_outer_iters + 1):
        grad_work = sign * mkl_gradient(dictionary, sol, kind)
        gap = float(d @ (grad_work - grad_work.min()))
        trace.steps.append(
            MklStep(it, d.copy(), work, sol.card, gap, step_size)
        )
        if gap <= config.gap_tol * max(abs(work), 1e-12):
            trace.converged = True
            trace.message = "duality gap within tolerance"
            break

        direction = _descent_direction(d, grad_work)
        if not np.any(direction != 0.0):
            trace.converged = True
            trace.message = "stationary weights (zero reduced gradient)"
            break

        negative = direction < 0.0
        gamma = float(np.min(d[negative] / -direction[negative]))
        accepted = False
        for _ in range(config.ls_max_probes):
            d_try = _step(d, direction, gamma)
            J_try, sol_try = objective_at(d_try, warm=sol.alpha)
            work_try = sign * J_try
            pen_try = work_try - config.lam * sol_try.card
            if pen_try < penalized:
                accepted = True
                break
            gamma *= config.ls_shrink
        if not accepted:
            trace.message = "line search found no improving step"
            break
        d, work, sol, penalized = d_try, work_try, sol_try, pen_try
        step_size = gamma
    else:
        trace.message = "outer iteration cap reached"

    # cold solve so the result is bit-identical to a direct fit at d
    model = fit_one_class(kind, dictionary, d, config.C, kkt_tol=config.kkt_tol)
    return model, trace


# method name -> (inner kind, multiple kernels, lambda penalty active)
METHOD_FAMILIES = {
    "svdd": ("svdd", False, False),
    "ocsvm": ("ocsvm", False, False),
    "mk-svdd": ("svdd", True, False),
    "mk-ocsvm": ("ocsvm", True, False),
    "slim-mk-svdd": ("svdd", True, True),
    "slim-mk-ocsvm": ("ocsvm", True, True),
}


def fit_method(
    method: str,
    dictionary: KernelDictionary,
    C: float,
    lam: float = 0.0,
    **mkl_kwargs,
) -> tuple[OneClassModel, MklTrace | None]:
    """Fit any of the six named methods on a prepared dictionary.

    Single-kernel methods require a one-entry dictionary and return no
    trace. Non-slim multi-kernel methods ignore lam (forced to 0).
    """
    if method not in METHOD_FAMILIES:
        raise ValueError(f"unknown method: {method!r}")
    kind, multi, slim = METHOD_FAMILIES[method]
    if not multi:
        if dictionary.nk != 1:
            raise ValueError(
                f"method {method!r} is single-kernel; got {dictionary.nk} kernels"
            )
        kkt_tol = mkl_kwargs.get("kkt_tol", 1e-6)
        return fit_one_class(kind, dictionary, [1.0], C, kkt_tol=kkt_tol), None
    config = MklConfig(C=C, lam=lam if slim else 0.0, **mkl_kwargs)
    return fit_mkl(dictionary, config, kind)
