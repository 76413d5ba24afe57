"""Base kernels, Gram matrices, kernel dictionaries, and convex combinations."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SYMMETRY_TOL = 1e-10
PSD_FLOOR = 1e-8


@dataclass(frozen=True)
class KernelSpec:
    """Description of one base kernel.

    kind is "rbf" (Gaussian, exp(-||x-y||^2 / 2*bandwidth^2)), "poly"
    (inhomogeneous polynomial, (x.y + 1)^degree) or "precomputed"
    (Gram matrix loaded from a manifest, referenced by matrix_id).
    """

    kind: str
    bandwidth: float | None = None
    degree: int | None = None
    matrix_id: str | None = None

    def __post_init__(self) -> None:
        if self.kind == "rbf":
            if self.bandwidth is None or self.bandwidth <= 0:
                raise ValueError("rbf kernel needs a strictly positive bandwidth")
        elif self.kind == "poly":
            if self.degree is None or int(self.degree) < 1:
                raise ValueError("poly kernel needs an integer degree >= 1")
            object.__setattr__(self, "degree", int(self.degree))
        elif self.kind == "precomputed":
            if not self.matrix_id:
                raise ValueError("precomputed kernel needs a matrix_id")
        else:
            raise ValueError(f"unknown kernel kind: {self.kind!r}")

    @classmethod
    def rbf(cls, bandwidth: float) -> "KernelSpec":
        return cls("rbf", bandwidth=float(bandwidth))

    @classmethod
    def poly(cls, degree: int) -> "KernelSpec":
        return cls("poly", degree=degree)

    @classmethod
    def precomputed(cls, matrix_id: str) -> "KernelSpec":
        return cls("precomputed", matrix_id=matrix_id)

    def label(self) -> str:
        if self.kind == "rbf":
            return f"rbf(sigma={self.bandwidth:g})"
        if self.kind == "poly":
            return f"poly(degree={self.degree})"
        return f"precomputed({self.matrix_id})"

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.bandwidth is not None:
            out["bandwidth"] = self.bandwidth
        if self.degree is not None:
            out["degree"] = self.degree
        if self.matrix_id is not None:
            out["matrix_id"] = self.matrix_id
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "KernelSpec":
        return cls(
            raw["kind"],
            bandwidth=raw.get("bandwidth"),
            degree=raw.get("degree"),
            matrix_id=raw.get("matrix_id"),
        )


@dataclass(frozen=True)
class GramMatrix:
    """Square kernel matrix, symmetric and PSD up to round-off."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError("Gram matrix must be square")
        scale = max(np.abs(values).max() if values.size else 0.0, 1e-30)
        if np.abs(values - values.T).max() > SYMMETRY_TOL * scale:
            raise ValueError("Gram matrix is not symmetric")
        object.__setattr__(self, "values", values)

    @property
    def diag(self) -> np.ndarray:
        return np.diag(self.values)

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def eigenvalue_floor_ok(self, floor: float = PSD_FLOOR) -> bool:
        """True when the smallest eigenvalue is >= -floor * largest."""
        eigs = np.linalg.eigvalsh(self.values)
        return bool(eigs[0] >= -floor * max(eigs[-1], 1e-30))


@dataclass(frozen=True)
class SimplexWeights:
    """Convex-combination weights: nonnegative, summing to one."""

    d: np.ndarray

    def __post_init__(self) -> None:
        d = np.asarray(self.d, dtype=float)
        if d.ndim != 1 or d.size < 1:
            raise ValueError("weights must be a nonempty 1D vector")
        if (d < -1e-12).any():
            raise ValueError("weights must be nonnegative")
        if abs(d.sum() - 1.0) > 1e-10:
            raise ValueError("weights must sum to 1")
        object.__setattr__(self, "d", np.maximum(d, 0.0))

    @classmethod
    def uniform(cls, nk: int) -> "SimplexWeights":
        return cls(np.full(nk, 1.0 / nk))

    @classmethod
    def unit(cls, nk: int, index: int = 0) -> "SimplexWeights":
        d = np.zeros(nk)
        d[index] = 1.0
        return cls(d)


def as_weights(d, nk: int) -> np.ndarray:
    """Validate weights (array-like or SimplexWeights) against length nk."""
    vec = d.d if isinstance(d, SimplexWeights) else SimplexWeights(np.asarray(d, dtype=float)).d
    if vec.size != nk:
        raise ValueError(f"expected {nk} weights, got {vec.size}")
    return vec


def _features(X) -> np.ndarray:
    feats = getattr(X, "features", X)
    feats = np.asarray(feats, dtype=float)
    if feats.ndim != 2 or feats.shape[0] == 0:
        raise ValueError("need a nonempty 2D feature array")
    if not np.isfinite(feats).all():
        raise ValueError("features contain non-finite values")
    return feats


def _kernel_block(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if spec.kind == "rbf":
        sq = (
            np.sum(A * A, axis=1)[:, None]
            + np.sum(B * B, axis=1)[None, :]
            - 2.0 * A @ B.T
        )
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-sq / (2.0 * spec.bandwidth**2))
    if spec.kind == "poly":
        return (A @ B.T + 1.0) ** spec.degree
    raise ValueError("precomputed kernels cannot be evaluated from features")


def gram(spec: KernelSpec, X, unit_trace: bool = False) -> GramMatrix:
    """Gram matrix of the kernel over the rows of X.

    unit_trace rescales the matrix to trace ell (off by default; the SVDD
    linear term depends on the raw diagonal).
    """
    feats = _features(X)
    values = _kernel_block(spec, feats, feats)
    values = (values + values.T) / 2.0
    if unit_trace:
        tr = np.trace(values)
        if tr > 0:
            values = values * (values.shape[0] / tr)
    return GramMatrix(values)


def cross_gram(spec: KernelSpec, X_train, X_test) -> np.ndarray:
    """Rectangular kernel block k(test_i, train_j), shape (n_test, n_train)."""
    return _kernel_block(spec, _features(X_test), _features(X_train))


def kernel_diag(spec: KernelSpec, X) -> np.ndarray:
    """Self-similarities k(x, x) for each row of X."""
    feats = _features(X)
    if spec.kind == "rbf":
        return np.ones(feats.shape[0])
    if spec.kind == "poly":
        return (np.sum(feats * feats, axis=1) + 1.0) ** spec.degree
    raise ValueError("precomputed kernels cannot be evaluated from features")


@dataclass(frozen=True)
class KernelDictionary:
    """Ordered base kernels with their Gram matrices over the training set.

    Built either from feature data (rbf/poly specs) or from precomputed
    full matrices indexed by example ids (the graph-kernel pathway).
    """

    specs: tuple[KernelSpec, ...]
    grams: tuple[GramMatrix, ...]
    train_features: np.ndarray | None = None
    full_matrices: tuple[np.ndarray, ...] | None = None
    train_ids: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not self.specs:
            raise ValueError("kernel dictionary must hold at least one kernel")
        if len(self.specs) != len(self.grams):
            raise ValueError("one Gram matrix per kernel spec required")
        sizes = {g.size for g in self.grams}
        if len(sizes) != 1:
            raise ValueError("all Gram matrices must share the training size")

    @property
    def nk(self) -> int:
        return len(self.specs)

    @property
    def n_train(self) -> int:
        return self.grams[0].size

    @classmethod
    def from_data(cls, specs, X, unit_trace: bool = False) -> "KernelDictionary":
        feats = _features(X)
        specs = tuple(specs)
        grams = tuple(gram(s, feats, unit_trace=unit_trace) for s in specs)
        return cls(specs, grams, train_features=feats)

    @classmethod
    def from_matrices(cls, named_matrices, train_ids=None) -> "KernelDictionary":
        """Dictionary over precomputed full matrices.

        named_matrices maps matrix_id -> square ndarray over the complete
        example collection; train_ids (defaulting to all rows) selects the
        training block.
        """
        items = list(named_matrices.items())
        if not items:
            raise ValueError("no matrices given")
        n = np.asarray(items[0][1]).shape[0]
        if train_ids is None:
            train_ids = np.arange(n)
        train_ids = np.asarray(train_ids, dtype=int)
        specs, grams, fulls = [], [], []
        for matrix_id, matrix in items:
            full = np.asarray(matrix, dtype=float)
            if full.shape != (n, n):
                raise ValueError("all matrices must be square with equal size")
            specs.append(KernelSpec.precomputed(matrix_id))
            grams.append(GramMatrix(full[np.ix_(train_ids, train_ids)]))
            fulls.append(full)
        return cls(
            tuple(specs),
            tuple(grams),
            full_matrices=tuple(fulls),
            train_ids=train_ids,
        )

    def is_precomputed(self) -> bool:
        return self.full_matrices is not None

    def cross(self, X_test) -> list[np.ndarray]:
        """Per-kernel (n_test, n_train) blocks for feature-based kernels."""
        if self.train_features is None:
            raise ValueError("dictionary was not built from feature data")
        return [cross_gram(s, self.train_features, X_test) for s in self.specs]

    def cross_ids(self, test_ids) -> list[np.ndarray]:
        """Per-kernel (n_test, n_train) blocks for precomputed kernels."""
        if self.full_matrices is None:
            raise ValueError("dictionary holds no precomputed matrices")
        test_ids = np.asarray(test_ids, dtype=int)
        return [m[np.ix_(test_ids, self.train_ids)] for m in self.full_matrices]

    def test_diag(self, X_test) -> np.ndarray:
        """Per-kernel k(x, x) stack for test features, shape (nk, n_test)."""
        return np.stack([kernel_diag(s, X_test) for s in self.specs])

    def test_diag_ids(self, test_ids) -> np.ndarray:
        test_ids = np.asarray(test_ids, dtype=int)
        return np.stack([np.diag(m)[test_ids] for m in self.full_matrices])


def combine(dictionary: KernelDictionary, d) -> GramMatrix:
    """Entrywise convex combination sum_m d_m K_m of the dictionary grams."""
    weights = as_weights(d, dictionary.nk)
    out = np.zeros((dictionary.n_train, dictionary.n_train))
    for w, g in zip(weights, dictionary.grams):
        if w != 0.0:
            out += w * g.values
    return GramMatrix(out)


def combine_blocks(blocks, d) -> np.ndarray:
    """Convex combination of rectangular per-kernel blocks."""
    weights = as_weights(d, len(blocks))
    out = np.zeros_like(np.asarray(blocks[0], dtype=float))
    for w, b in zip(weights, blocks):
        if w != 0.0:
            out += w * np.asarray(b, dtype=float)
    return out


def save_matrix(path, matrix: np.ndarray) -> None:
    """Plain-text matrix file: one row per line, whitespace-separated."""
    np.savetxt(path, np.asarray(matrix, dtype=float), fmt="%.17e")


def load_matrix(path) -> np.ndarray:
    values = np.loadtxt(path, ndmin=2)
    return values


def write_manifest(directory, entries) -> Path:
    """Write matrix files plus a manifest.json naming them.

    entries is a sequence of dicts with at least "id" and "matrix" keys;
    remaining keys are stored as parameters.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    listed = []
    for entry in entries:
        entry = dict(entry)
        matrix = entry.pop("matrix")
        matrix_id = entry.pop("id")
        fname = f"{matrix_id}.txt"
        save_matrix(directory / fname, matrix)
        listed.append({"id": matrix_id, "file": fname, "params": entry})
    manifest = directory / "manifest.json"
    manifest.write_text(json.dumps({"matrices": listed}, indent=2, sort_keys=True))
    return manifest


def load_manifest(manifest_path) -> dict[str, np.ndarray]:
    """Load every matrix listed in a manifest, keyed by matrix id."""
    manifest_path = Path(manifest_path)
    raw = json.loads(manifest_path.read_text())
    out: dict[str, np.ndarray] = {}
    for entry in raw["matrices"]:
        out[entry["id"]] = load_matrix(manifest_path.parent / entry["file"])
    return out
