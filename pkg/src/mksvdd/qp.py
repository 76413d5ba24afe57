"""Pairwise (SMO-style) solver for the shared one-class dual problem.

Solves  min_alpha  alpha' K alpha - q' alpha
        s.t.       sum(alpha) = 1,  0 <= alpha_i <= C

which covers both model families: q = diag(K) for the enclosing-ball dual
and q = 0 for the one-class hyperplane dual. The reported objective is the
maximization form q' alpha - alpha' K alpha.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InfeasibleProblemError(ValueError):
    """The box and sum constraints cannot be satisfied simultaneously."""


class ConvergenceError(RuntimeError):
    """Iteration cap reached; carries the best iterate as .solution."""

    def __init__(self, message: str, solution: "AlphaSolution"):
        super().__init__(message)
        self.solution = solution


def sv_threshold(C: float) -> float:
    """Numerical support-vector membership threshold, scale-relative in C."""
    return 1e-7 * max(1.0, C)


@dataclass(frozen=True)
class QpProblem:
    """One instance of the dual problem."""

    K: np.ndarray
    q: np.ndarray
    C: float

    def __post_init__(self) -> None:
        K = np.asarray(getattr(self.K, "values", self.K), dtype=float)
        q = np.asarray(self.q, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise ValueError("K must be square")
        if q.shape != (K.shape[0],):
            raise ValueError("q length must match K")
        scale = max(np.abs(K).max() if K.size else 0.0, 1e-30)
        if np.abs(K - K.T).max() > 1e-8 * scale:
            raise ValueError("K must be symmetric")
        if self.C <= 0:
            raise ValueError("C must be positive")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "q", q)

    @property
    def size(self) -> int:
        return self.K.shape[0]


@dataclass(frozen=True)
class AlphaSolution:
    """Dual variables with the objective and support-vector index sets."""

    alpha: np.ndarray
    objective: float
    sv_indices: np.ndarray
    margin_sv_indices: np.ndarray
    iterations: int = 0
    objective_trace: np.ndarray | None = None

    @property
    def card(self) -> int:
        """Number of support vectors."""
        return int(self.sv_indices.size)


def project_to_feasible(alpha, C: float) -> np.ndarray:
    """Euclidean projection onto {0 <= a <= C, sum(a) = 1} by bisection."""
    a = np.asarray(alpha, dtype=float)
    n = a.size
    if C * n < 1.0 - 1e-12:
        raise InfeasibleProblemError(f"C*ell = {C * n:g} < 1")
    if (a >= 0.0).all() and (a <= C).all() and abs(a.sum() - 1.0) <= 1e-9:
        return _finalize_alpha(a.copy(), C)
    lo = a.min() - 1.0
    hi = a.max()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        total = np.clip(a - mid, 0.0, C).sum()
        if total > 1.0:
            lo = mid
        else:
            hi = mid
    out = np.clip(a - hi, 0.0, C)
    total = out.sum()
    if total <= 0.0:
        return np.full(n, min(C, 1.0 / n))
    # absorb the bisection residual into coordinates with slack
    deficit = 1.0 - total
    room = (C - out) if deficit > 0 else out
    movable = room > 0
    if movable.any():
        out[movable] += deficit * room[movable] / room[movable].sum()
    return np.clip(out, 0.0, C)


def _finalize_alpha(alpha: np.ndarray, C: float) -> np.ndarray:
    """Snap the iterate exactly onto the box and sum constraints."""
    out = np.clip(alpha, 0.0, C)
    residual = out.sum() - 1.0
    if residual != 0.0:
        interior = np.where((out > 0.0) & (out < C))[0]
        order = interior[np.argsort(-out[interior], kind="stable")]
        for idx in order:
            take = np.clip(out[idx] - residual, 0.0, C) - out[idx]
            out[idx] += take
            residual += take
            if residual == 0.0:
                break
    return out


def solve_raw(
    K: np.ndarray,
    q: np.ndarray,
    C: float,
    warm_start=None,
    kkt_tol: float = 1e-6,
    max_iter: int | None = None,
    return_trace: bool = False,
) -> AlphaSolution:
    """Pairwise solver on pre-validated arrays (K symmetric PSD assumed)."""
    n = q.size
    if C * n < 1.0 - 1e-12:
        raise InfeasibleProblemError(
            f"infeasible problem: C*ell = {C * n:g} < 1"
        )
    if warm_start is not None:
        warm = np.asarray(warm_start, dtype=float)
        if warm.shape != (n,):
            raise ValueError("warm start length must match the problem size")
        alpha = project_to_feasible(warm, C)
    else:
        alpha = np.full(n, min(1.0 / n, C))
        alpha = _finalize_alpha(alpha, C)

    grad = 2.0 * (K @ alpha) - q
    cap = max_iter if max_iter is not None else 10_000 * n
    trace = [] if return_trace else None
    if return_trace:
        trace.append(float(q @ alpha - alpha @ K @ alpha))

    iterations = 0
    converged = n == 1
    while iterations < cap and not converged:
        receiver_grad = np.where(alpha < C, grad, np.inf)
        donor_grad = np.where(alpha > 0.0, grad, -np.inf)
        i = int(np.argmin(receiver_grad))
        j = int(np.argmax(donor_grad))
        if not np.isfinite(receiver_grad[i]):
            converged = True  # every alpha at the upper bound
            break
        violation = float(donor_grad[j]) - float(receiver_grad[i])
        if violation < kkt_tol:
            converged = True
            break

        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        room_i = C - alpha[i]
        room_j = alpha[j]
        if quad > 0.0:
            step = min(violation / (2.0 * quad), room_i, room_j)
        else:
            step = min(room_i, room_j)
        # snap exactly onto whichever bound binds
        if step >= room_i:
            new_i = C
        else:
            new_i = alpha[i] + step
        if step >= room_j:
            new_j = 0.0
        else:
            new_j = alpha[j] - step
        delta_i = new_i - alpha[i]
        delta_j = new_j - alpha[j]
        alpha[i] = new_i
        alpha[j] = new_j
        grad += 2.0 * (K[:, i] * delta_i + K[:, j] * delta_j)
        iterations += 1
        if return_trace:
            trace.append(float(q @ alpha - alpha @ K @ alpha))

    alpha = _finalize_alpha(alpha, C)
    objective = float(q @ alpha - alpha @ K @ alpha)
    tau = sv_threshold(C)
    sv = np.flatnonzero(alpha > tau)
    margin = np.flatnonzero((alpha > tau) & (alpha < C - tau))
    solution = AlphaSolution(
        alpha=alpha,
        objective=objective,
        sv_indices=sv,
        margin_sv_indices=margin,
        iterations=iterations,
        objective_trace=np.asarray(trace) if return_trace else None,
    )
    if not converged:
        raise ConvergenceError(
            f"pair-update cap reached ({cap} iterations)", solution
        )
    return solution


def solve(
    problem: QpProblem,
    warm_start=None,
    kkt_tol: float = 1e-6,
    max_iter: int | None = None,
    return_trace: bool = False,
) -> AlphaSolution:
    """Solve the dual by maximal-violating-pair updates.

    Each step picks the donor j = argmax grad over {alpha_j > 0} and the
    receiver i = argmin grad over {alpha_i < C} (grad of the minimization
    form; ties resolved to the lowest index), then minimizes the objective
    exactly on the segment alpha_i + alpha_j = const clipped to the box.
    Terminates when the maximal violation grad_j - grad_i < kkt_tol.

    Deterministic: fixed uniform initialization (or the given warm start
    projected to feasibility) and index-order tie-breaking.
    """
    return solve_raw(
        problem.K,
        problem.q,
        problem.C,
        warm_start=warm_start,
        kkt_tol=kkt_tol,
        max_iter=max_iter,
        return_trace=return_trace,
    )
