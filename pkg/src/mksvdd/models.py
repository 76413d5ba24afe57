"""Fitting and scoring of enclosing-ball (SVDD) and one-class SVM models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import KernelDictionary, KernelSpec, as_weights, combine, combine_blocks
from .qp import AlphaSolution, QpProblem, solve, sv_threshold

KINDS = ("svdd", "ocsvm")


@dataclass(frozen=True)
class OneClassModel:
    """Fitted one-class model.

    For kind "svdd" the decision value at x is
        f(x) = k(x, x) - 2 sum_j alpha_j k(x, x_j) + alpha' K alpha
    and threshold holds the squared-radius boundary value, so the outlier
    score f(x) - threshold is positive outside the ball. For kind "ocsvm"
    the decision value is g(x) = sum_j alpha_j k(x, x_j), threshold holds
    the offset rho, and the outlier score is threshold - g(x).
    """

    kind: str
    alpha: AlphaSolution
    weights: np.ndarray
    threshold: float
    self_term: float
    C: float
    dictionary: KernelDictionary

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")

    @property
    def card(self) -> int:
        return self.alpha.card


def _boundary_threshold(values: np.ndarray, solution: AlphaSolution) -> float:
    """Boundary level: mean over margin SVs, else max over all SVs."""
    if solution.margin_sv_indices.size:
        return float(values[solution.margin_sv_indices].mean())
    return float(values[solution.sv_indices].max())


def _assemble(kind, dictionary, weights, C, solution) -> OneClassModel:
    K = combine(dictionary, weights).values
    alpha = solution.alpha
    Ka = K @ alpha
    self_term = float(alpha @ Ka)
    if kind == "svdd":
        train_values = np.diag(K) - 2.0 * Ka + self_term
    else:
        train_values = Ka
    threshold = _boundary_threshold(train_values, solution)
    return OneClassModel(
        kind=kind,
        alpha=solution,
        weights=weights,
        threshold=threshold,
        self_term=self_term,
        C=C,
        dictionary=dictionary,
    )


def fit_svdd(
    dictionary: KernelDictionary,
    d,
    C: float,
    kkt_tol: float = 1e-6,
    warm_start=None,
) -> OneClassModel:
    """Fit the minimum enclosing ball at the combined kernel sum_m d_m K_m."""
    weights = as_weights(d, dictionary.nk)
    K = combine(dictionary, weights)
    problem = QpProblem(K.values, K.diag.copy(), C)
    solution = solve(problem, warm_start=warm_start, kkt_tol=kkt_tol)
    return _assemble("svdd", dictionary, weights, C, solution)


def fit_ocsvm(
    dictionary: KernelDictionary,
    d,
    C: float,
    kkt_tol: float = 1e-6,
    warm_start=None,
) -> OneClassModel:
    """Fit the one-class SVM dual (same constraints, zero linear term)."""
    weights = as_weights(d, dictionary.nk)
    K = combine(dictionary, weights)
    problem = QpProblem(K.values, np.zeros(K.size), C)
    solution = solve(problem, warm_start=warm_start, kkt_tol=kkt_tol)
    return _assemble("ocsvm", dictionary, weights, C, solution)


def fit_one_class(kind: str, dictionary, d, C, **kwargs) -> OneClassModel:
    if kind == "svdd":
        return fit_svdd(dictionary, d, C, **kwargs)
    if kind == "ocsvm":
        return fit_ocsvm(dictionary, d, C, **kwargs)
    raise ValueError(f"kind must be one of {KINDS}")


def _scores_from_blocks(model: OneClassModel, cross: np.ndarray, diag: np.ndarray):
    g = cross @ model.alpha.alpha
    if model.kind == "svdd":
        values = diag - 2.0 * g + model.self_term
        return values - model.threshold
    return model.threshold - g


def score(model: OneClassModel, X_test) -> np.ndarray:
    """Outlier scores for test features: positive means outside the boundary."""
    feats = np.asarray(getattr(X_test, "features", X_test), dtype=float)
    if feats.ndim != 2:
        raise ValueError("test features must be 2D")
    if model.dictionary.train_features is not None:
        if feats.shape[1] != model.dictionary.train_features.shape[1]:
            raise ValueError(
                f"test dimension {feats.shape[1]} does not match "
                f"training dimension {model.dictionary.train_features.shape[1]}"
            )
    cross = combine_blocks(model.dictionary.cross(feats), model.weights)
    diag = model.weights @ model.dictionary.test_diag(feats)
    return _scores_from_blocks(model, cross, diag)


def score_ids(model: OneClassModel, test_ids) -> np.ndarray:
    """Outlier scores for precomputed-kernel dictionaries, by example id."""
    cross = combine_blocks(model.dictionary.cross_ids(test_ids), model.weights)
    diag = model.weights @ model.dictionary.test_diag_ids(test_ids)
    return _scores_from_blocks(model, cross, diag)


def train_scores(model: OneClassModel) -> np.ndarray:
    """Outlier scores of the training examples themselves."""
    K = combine(model.dictionary, model.weights).values
    diag = np.diag(K)
    return _scores_from_blocks(model, K, diag)


def train_slacks(model: OneClassModel) -> np.ndarray:
    """Constraint violations xi_i = max(0, score_i) on the training set."""
    return np.maximum(train_scores(model), 0.0)


def bounded_sv_indices(model: OneClassModel) -> np.ndarray:
    """Support vectors at the upper box bound (alpha_i ~= C)."""
    tau = sv_threshold(model.C)
    return np.flatnonzero(model.alpha.alpha >= model.C - tau)


def model_to_dict(model: OneClassModel, train_source: dict | None = None) -> dict:
    """JSON-ready model description (sparse alpha over support vectors)."""
    sv = model.alpha.sv_indices
    out = {
        "kind": model.kind,
        "C": model.C,
        "threshold": model.threshold,
        "self_term": model.self_term,
        "objective": model.alpha.objective,
        "weights": model.weights.tolist(),
        "alpha": {
            "indices": sv.tolist(),
            "values": model.alpha.alpha[sv].tolist(),
            "length": int(model.alpha.alpha.size),
        },
        "kernels": [s.to_dict() for s in model.dictionary.specs],
    }
    if model.dictionary.train_ids is not None:
        out["train_ids"] = model.dictionary.train_ids.tolist()
    if train_source is not None:
        out["train_source"] = train_source
    return out


def model_from_dict(raw: dict, dictionary: KernelDictionary) -> OneClassModel:
    """Rebuild a model around a reconstructed kernel dictionary."""
    specs = tuple(KernelSpec.from_dict(s) for s in raw["kernels"])
    if specs != dictionary.specs:
        raise ValueError("dictionary kernels do not match the stored model")
    n = raw["alpha"]["length"]
    alpha = np.zeros(n)
    alpha[np.asarray(raw["alpha"]["indices"], dtype=int)] = raw["alpha"]["values"]
    C = float(raw["C"])
    tau = sv_threshold(C)
    sv = np.flatnonzero(alpha > tau)
    margin = np.flatnonzero((alpha > tau) & (alpha < C - tau))
    solution = AlphaSolution(
        alpha=alpha,
        objective=float(raw["objective"]),
        sv_indices=sv,
        margin_sv_indices=margin,
    )
    return OneClassModel(
        kind=raw["kind"],
        alpha=solution,
        weights=np.asarray(raw["weights"], dtype=float),
        threshold=float(raw["threshold"]),
        self_term=float(raw["self_term"]),
        C=C,
        dictionary=dictionary,
    )
