"""Tabular data containers, synthetic 2D target generators, and splits."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ParseError(ValueError):
    """Raised when a data file cannot be parsed."""


@dataclass(frozen=True)
class SampleMatrix:
    """Dense feature matrix with optional {+1, -1} labels and stable row ids.

    Parameters
    ----------
    features : ndarray, shape (n_examples, n_features)
        Row-per-example real feature matrix.
    labels : ndarray or None, shape (n_examples,)
        Optional labels; +1 marks target examples, -1 marks outliers.
    ids : ndarray or None
        Stable integer identifiers; defaults to 0..n_examples-1.
    checksum : str or None
        sha256 of the source file when loaded from disk.
    """

    features: np.ndarray
    labels: np.ndarray | None = None
    ids: np.ndarray | None = None
    checksum: str | None = None

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=float)
        if feats.ndim != 2:
            raise ValueError("features must be a 2D array")
        if not np.isfinite(feats).all():
            raise ValueError("features contain non-finite values")
        object.__setattr__(self, "features", feats)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (feats.shape[0],):
                raise ValueError("labels length must match number of rows")
            if not np.isin(labels, (-1, 1)).all():
                raise ValueError("labels must take values in {+1, -1}")
            object.__setattr__(self, "labels", labels.astype(int))
        ids = self.ids
        if ids is None:
            ids = np.arange(feats.shape[0])
        else:
            ids = np.asarray(ids)
            if ids.shape != (feats.shape[0],):
                raise ValueError("ids length must match number of rows")
            if len(np.unique(ids)) != len(ids):
                raise ValueError("ids must be unique")
        object.__setattr__(self, "ids", ids)

    @property
    def n_examples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def positive_ids(self) -> np.ndarray:
        """Ids of +1 examples; all ids when the matrix is unlabeled."""
        if self.labels is None:
            return self.ids.copy()
        return self.ids[self.labels == 1]

    def rows_for(self, ids) -> np.ndarray:
        """Row indices corresponding to the given ids, in the given order."""
        lookup = {v: i for i, v in enumerate(self.ids.tolist())}
        try:
            return np.array([lookup[v] for v in np.asarray(ids).tolist()], dtype=int)
        except KeyError as exc:
            raise ValueError(f"unknown example id: {exc.args[0]}") from None

    def subset(self, ids) -> "SampleMatrix":
        """New matrix restricted to the given ids (order preserved)."""
        rows = self.rows_for(ids)
        labels = None if self.labels is None else self.labels[rows]
        return SampleMatrix(self.features[rows], labels, self.ids[rows], self.checksum)


@dataclass(frozen=True)
class SplitPlan:
    """Train/validation/test id sets plus the seed that produced them."""

    train_ids: np.ndarray
    validation_ids: np.ndarray
    test_ids: np.ndarray
    seed: int
    mode: str = "supervised"

    def __post_init__(self) -> None:
        for name in ("train_ids", "validation_ids", "test_ids"):
            object.__setattr__(self, name, np.asarray(getattr(self, name)))
        if self.mode not in ("supervised", "unsupervised"):
            raise ValueError(f"unknown split mode: {self.mode!r}")
        if self.mode == "supervised":
            # train = test = all ids is the unsupervised convention, so
            # disjointness is only meaningful (and enforced) here.
            train = set(self.train_ids.tolist())
            val = set(self.validation_ids.tolist())
            test = set(self.test_ids.tolist())
            if train & val or train & test or val & test:
                raise ValueError("supervised split id sets must be disjoint")

    def to_json(self) -> str:
        return json.dumps(
            {
                "mode": self.mode,
                "seed": int(self.seed),
                "train_ids": self.train_ids.tolist(),
                "validation_ids": self.validation_ids.tolist(),
                "test_ids": self.test_ids.tolist(),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "SplitPlan":
        raw = json.loads(text)
        return cls(
            np.asarray(raw["train_ids"]),
            np.asarray(raw["validation_ids"]),
            np.asarray(raw["test_ids"]),
            int(raw["seed"]),
            raw.get("mode", "supervised"),
        )


def _parse_cell(text: str, line_no: int, col_no: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(
            f"line {line_no}: cell {col_no} ({text!r}) is not numeric"
        ) from None
    if not np.isfinite(value):
        raise ParseError(f"line {line_no}: cell {col_no} ({text!r}) is not finite")
    return value


def load_csv(
    path,
    label_column: int | str | None = None,
    header: str | bool = "auto",
    standardize: bool = False,
) -> SampleMatrix:
    """Load a comma-separated file into a SampleMatrix.

    label_column selects the label field by 0-based index or by header name
    (-1 marks outliers, +1 targets). With header="auto" the first row is
    treated as a header iff any of its cells fails to parse as a number.
    standardize=True applies per-feature standardization (mean 0, std 1);
    attribute scales in public tabular datasets vary widely.
    """
    path = Path(path)
    raw_bytes = path.read_bytes()
    checksum = hashlib.sha256(raw_bytes).hexdigest()
    rows = list(csv.reader(raw_bytes.decode("utf-8").splitlines()))
    rows = [
        (i + 1, r)
        for i, r in enumerate(rows)
        if r and not r[0].lstrip().startswith("#")
    ]
    if not rows:
        raise ParseError(f"{path}: empty file")

    def looks_numeric(cells):
        try:
            for c in cells:
                float(c)
        except ValueError:
            return False
        return True

    names = None
    if header is True or (header == "auto" and not looks_numeric(rows[0][1])):
        names = [c.strip() for c in rows[0][1]]
        rows = rows[1:]
        if not rows:
            raise ParseError(f"{path}: no data rows")

    label_idx = None
    if label_column is not None:
        if isinstance(label_column, str):
            if names is None or label_column not in names:
                raise ParseError(f"{path}: no column named {label_column!r}")
            label_idx = names.index(label_column)
        else:
            label_idx = int(label_column)

    width = len(rows[0][1])
    features = []
    labels = [] if label_idx is not None else None
    for line_no, cells in rows:
        if len(cells) != width:
            raise ParseError(
                f"line {line_no}: expected {width} fields, got {len(cells)}"
            )
        if label_idx is not None:
            if not -width <= label_idx < width:
                raise ParseError(f"label column {label_idx} out of range")
            pos = label_idx % width
            value = _parse_cell(cells[pos].strip(), line_no, pos)
            if value not in (-1.0, 1.0):
                raise ParseError(
                    f"line {line_no}: label must be +1 or -1, got {cells[pos]!r}"
                )
            labels.append(int(value))
            cells = cells[:pos] + cells[pos + 1 :]
        features.append(
            [_parse_cell(c.strip(), line_no, j) for j, c in enumerate(cells)]
        )

    feats = np.asarray(features, dtype=float)
    if standardize:
        std = feats.std(axis=0)
        std[std == 0.0] = 1.0
        feats = (feats - feats.mean(axis=0)) / std
    return SampleMatrix(feats, labels, checksum=checksum)


# Blob geometry for the synthetic 2D target classes: centers uniform in
# [-1, 1]^2, isotropic std uniform in [0.05, 0.3].
_CENTER_RANGE = (-1.0, 1.0)
_STD_RANGE = (0.05, 0.3)


def blob_parameters(seed: int, n_areas: int) -> tuple[np.ndarray, np.ndarray]:
    """Centers and stds of the blobs gen_2d_target(seed, n_areas, ...) draws."""
    if n_areas not in (1, 2, 3):
        raise ValueError("n_areas must be 1, 2 or 3")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(*_CENTER_RANGE, size=(n_areas, 2))
    stds = rng.uniform(*_STD_RANGE, size=n_areas)
    return centers, stds


def gen_2d_target(seed: int, n_areas: int, n_points: int) -> SampleMatrix:
    """Random 2D target class made of 1 to 3 Gaussian areas, all labeled +1.

    Pure function of (seed, n_areas, n_points): identical arguments produce
    bit-identical output.
    """
    if n_areas not in (1, 2, 3):
        raise ValueError("n_areas must be 1, 2 or 3")
    if n_points < n_areas:
        raise ValueError("n_points must be at least n_areas")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(*_CENTER_RANGE, size=(n_areas, 2))
    stds = rng.uniform(*_STD_RANGE, size=n_areas)
    counts = np.full(n_areas, n_points // n_areas)
    counts[: n_points % n_areas] += 1
    chunks = [
        centers[k] + stds[k] * rng.standard_normal((counts[k], 2))
        for k in range(n_areas)
    ]
    feats = np.vstack(chunks)
    return SampleMatrix(feats, np.ones(n_points, dtype=int))


def membership(points, centers, stds, radius: float = 2.5) -> np.ndarray:
    """True where a point lies within `radius` stds of some blob center."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    dist = np.linalg.norm(pts[:, None, :] - np.asarray(centers)[None, :, :], axis=2)
    return (dist <= radius * np.asarray(stds)[None, :]).any(axis=1)


def sample_inside_outside(
    seed: int,
    centers,
    stds,
    n_each: int,
    box_scale: float = 2.0,
    radius: float = 2.5,
) -> SampleMatrix:
    """Balanced ground-truth test set around the given blobs.

    Returns n_each points from the blob mixture labeled +1 (inside) and
    n_each uniform points from an enclosing box labeled -1 (outside), with
    membership decided by distance to the nearest center.
    """
    centers = np.asarray(centers, dtype=float)
    stds = np.asarray(stds, dtype=float)
    rng = np.random.default_rng(seed)
    lo = centers.min(axis=0) - box_scale
    hi = centers.max(axis=0) + box_scale

    def collect(want_inside: bool) -> np.ndarray:
        out = []
        while sum(len(c) for c in out) < n_each:
            if want_inside:
                k = rng.integers(0, len(centers), size=4 * n_each)
                cand = centers[k] + stds[k, None] * rng.standard_normal((4 * n_each, 2))
            else:
                cand = rng.uniform(lo, hi, size=(4 * n_each, 2))
            keep = membership(cand, centers, stds, radius) == want_inside
            out.append(cand[keep])
        return np.vstack(out)[:n_each]

    inside = collect(True)
    outside = collect(False)
    feats = np.vstack([inside, outside])
    labels = np.concatenate([np.ones(n_each, dtype=int), -np.ones(n_each, dtype=int)])
    return SampleMatrix(feats, labels)


def split(
    matrix: SampleMatrix,
    mode: str,
    seed: int,
    train_count: int | None = None,
    train_fraction: float | None = None,
    validation_count: int = 0,
) -> SplitPlan:
    """Plan a train/validation/test split.

    Unsupervised mode trains on the complete dataset and tests on the same
    ids. Supervised mode samples the requested number of training examples
    uniformly from the +1 class (plus validation_count more, disjoint); the
    remainder is the test set.
    """
    if mode == "unsupervised":
        all_ids = matrix.ids.copy()
        return SplitPlan(all_ids, np.array([], dtype=all_ids.dtype), all_ids, seed, mode)
    if mode != "supervised":
        raise ValueError(f"unknown split mode: {mode!r}")

    positives = matrix.positive_ids()
    if (train_count is None) == (train_fraction is None):
        raise ValueError("give exactly one of train_count or train_fraction")
    if train_fraction is not None:
        if not 0.0 < train_fraction <= 1.0:
            raise ValueError("train_fraction must be in (0, 1]")
        train_count = int(train_fraction * len(positives))
    if train_count < 1:
        raise ValueError("training set would be empty")
    if train_count + validation_count > len(positives):
        raise ValueError(
            f"requested {train_count}+{validation_count} positives, "
            f"only {len(positives)} available"
        )
    rng = np.random.default_rng(seed)
    picked = rng.permutation(positives)[: train_count + validation_count]
    train_ids = np.sort(picked[:train_count])
    val_ids = np.sort(picked[train_count:])
    rest = np.setdiff1d(matrix.ids, picked)
    return SplitPlan(train_ids, val_ids, np.sort(rest), seed, mode)
