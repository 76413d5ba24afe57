"""Bag-of-paths kernel between vertex/edge-labeled graphs.

A bag of random walks is sampled from each graph; the kernel between two
graphs is the mean pairwise similarity between their walks. Two walks of
equal length compare through the product of Gaussian label similarities
along their vertices and edges; walks of different lengths have
similarity zero.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kernels import GramMatrix

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabeledGraph:
    """Undirected graph with real label vectors on vertices and edges."""

    vertex_labels: np.ndarray
    edges: np.ndarray
    edge_labels: np.ndarray

    def __post_init__(self) -> None:
        vl = np.atleast_2d(np.asarray(self.vertex_labels, dtype=float))
        if vl.shape[0] == 0 or vl.size == 0:
            raise ValueError("graph needs at least one vertex")
        edges = np.asarray(self.edges, dtype=int).reshape(-1, 2)
        el = np.asarray(self.edge_labels, dtype=float)
        if el.ndim == 1 and edges.shape[0] != 1:
            el = el.reshape(-1, 1) if el.size else el.reshape(0, 0)
        else:
            el = np.atleast_2d(el) if el.size else el.reshape(0, 0)
        if edges.shape[0] and (edges.min() < 0 or edges.max() >= vl.shape[0]):
            raise ValueError("edge endpoint references a missing vertex")
        if edges.shape[0] != el.shape[0]:
            raise ValueError("one label vector per edge required")
        object.__setattr__(self, "vertex_labels", vl)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "edge_labels", el)

    @property
    def n_vertices(self) -> int:
        return self.vertex_labels.shape[0]

    def neighbors(self) -> list[np.ndarray]:
        """Adjacency lists (undirected), sorted for determinism."""
        adj: list[list[int]] = [[] for _ in range(self.n_vertices)]
        for i, j in self.edges.tolist():
            adj[i].append(j)
            if i != j:
                adj[j].append(i)
        return [np.array(sorted(a), dtype=int) for a in adj]

    def edge_label_lookup(self) -> dict[tuple[int, int], np.ndarray]:
        table: dict[tuple[int, int], np.ndarray] = {}
        for (i, j), lab in zip(self.edges.tolist(), self.edge_labels):
            table[(i, j)] = lab
            table[(j, i)] = lab
        return table

    def to_dict(self) -> dict:
        return {
            "vertex_labels": self.vertex_labels.tolist(),
            "edges": self.edges.tolist(),
            "edge_labels": self.edge_labels.tolist(),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "LabeledGraph":
        return cls(
            np.asarray(raw["vertex_labels"], dtype=float),
            np.asarray(raw.get("edges", []), dtype=int),
            np.asarray(raw.get("edge_labels", []), dtype=float),
        )


@dataclass(frozen=True)
class PathKernelConfig:
    """Bandwidths and sampling parameters of the path kernel.

    sigma scales the Gaussian envelope around the path-pair product;
    vertex_bandwidth / edge_bandwidth are the label-similarity bandwidths.
    distance_mode "product" feeds the raw similarity product into the
    envelope; "one_minus_product" first converts it to a distance
    (non-default alternate reading).
    """

    sigma: float = 1.0
    vertex_bandwidth: float = 1.0
    edge_bandwidth: float = 1.0
    max_length: int = 3
    bag_size: int = 20
    seed: int = 0
    distance_mode: str = "product"

    def __post_init__(self) -> None:
        if min(self.sigma, self.vertex_bandwidth, self.edge_bandwidth) <= 0:
            raise ValueError("all bandwidths must be strictly positive")
        if self.max_length < 1:
            raise ValueError("max_length must be at least 1")
        if self.bag_size < 1:
            raise ValueError("bag_size must be at least 1")
        if self.distance_mode not in ("product", "one_minus_product"):
            raise ValueError(f"unknown distance_mode: {self.distance_mode!r}")

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "vertex_bandwidth": self.vertex_bandwidth,
            "edge_bandwidth": self.edge_bandwidth,
            "max_length": self.max_length,
            "bag_size": self.bag_size,
            "seed": self.seed,
            "distance_mode": self.distance_mode,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "PathKernelConfig":
        return cls(**raw)


@dataclass(frozen=True)
class PathBag:
    """Sampled walks of one graph, kept as vertex-index tuples."""

    graph: LabeledGraph
    paths: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if not self.paths:
            raise ValueError("a path bag must hold at least one path")
        adjacency = {tuple(sorted(e)) for e in self.graph.edges.tolist()}
        for p in self.paths:
            if not p:
                raise ValueError("empty path")
            for a, b in zip(p, p[1:]):
                if tuple(sorted((a, b))) not in adjacency:
                    raise ValueError(f"path step {a}-{b} is not a graph edge")

    @property
    def size(self) -> int:
        return len(self.paths)


def sample_paths(graph: LabeledGraph, config: PathKernelConfig) -> PathBag:
    """Bag of config.bag_size random walks of length <= config.max_length.

    Each walk draws a target length uniformly in 1..max_length, starts at
    a uniform vertex and takes uniform neighbor steps, stopping early at
    dead ends; an isolated vertex yields a single-vertex walk.
    Deterministic for a fixed config.seed.
    """
    rng = np.random.default_rng(config.seed)
    adjacency = graph.neighbors()
    paths = []
    for _ in range(config.bag_size):
        target = int(rng.integers(1, config.max_length + 1))
        vertex = int(rng.integers(0, graph.n_vertices))
        walk = [vertex]
        while len(walk) < target:
            options = adjacency[walk[-1]]
            if options.size == 0:
                break
            walk.append(int(options[rng.integers(0, options.size)]))
        paths.append(tuple(walk))
    return PathBag(graph, tuple(paths))


def _rbf(a: np.ndarray, b: np.ndarray, bandwidth: float) -> float:
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return float(np.exp(-(diff @ diff) / (2.0 * bandwidth**2)))


def path_product(
    graph_a: LabeledGraph,
    path_a,
    graph_b: LabeledGraph,
    path_b,
    config: PathKernelConfig,
) -> float:
    """Label-similarity product along two equal-length walks."""
    if len(path_a) != len(path_b):
        raise ValueError("paths must have equal length")
    if graph_a.vertex_labels.shape[1] != graph_b.vertex_labels.shape[1]:
        raise ValueError("vertex label dimensions differ between graphs")
    ea, eb = graph_a.edge_label_lookup(), graph_b.edge_label_lookup()
    value = _rbf(
        graph_a.vertex_labels[path_a[0]],
        graph_b.vertex_labels[path_b[0]],
        config.vertex_bandwidth,
    )
    for i in range(1, len(path_a)):
        value *= _rbf(
            ea[(path_a[i - 1], path_a[i])],
            eb[(path_b[i - 1], path_b[i])],
            config.edge_bandwidth,
        )
        value *= _rbf(
            graph_a.vertex_labels[path_a[i]],
            graph_b.vertex_labels[path_b[i]],
            config.vertex_bandwidth,
        )
    return value


def path_similarity(
    graph_a: LabeledGraph,
    path_a,
    graph_b: LabeledGraph,
    path_b,
    config: PathKernelConfig,
) -> float:
    """Similarity of two walks: 0 for different lengths, else the Gaussian
    envelope of the label product along the walks."""
    if len(path_a) != len(path_b):
        return 0.0
    value = path_product(graph_a, path_a, graph_b, path_b, config)
    if config.distance_mode == "one_minus_product":
        value = 1.0 - value
    return float(np.exp(-(value**2) / (2.0 * config.sigma**2)))


def _stacked_by_length(bag: PathBag):
    """Group a bag's paths by length into stacked label arrays."""
    groups: dict[int, list] = {}
    for p in bag.paths:
        groups.setdefault(len(p), []).append(p)
    table = bag.graph.edge_label_lookup()
    out = {}
    for length, paths in groups.items():
        v = np.stack(
            [bag.graph.vertex_labels[list(p)] for p in paths]
        )  # (n, length, dv)
        if length > 1:
            e = np.stack(
                [
                    np.stack([table[(p[i - 1], p[i])] for i in range(1, length)])
                    for p in paths
                ]
            )  # (n, length-1, de)
        else:
            e = np.zeros((len(paths), 0, 0))
        out[length] = (v, e)
    return out


def graph_kernel_value(
    bag_i: PathBag, bag_j: PathBag, config: PathKernelConfig
) -> float:
    """Mean path similarity over the cross product of two bags."""
    gi, gj = _stacked_by_length(bag_i), _stacked_by_length(bag_j)
    sv2 = 2.0 * config.vertex_bandwidth**2
    se2 = 2.0 * config.edge_bandwidth**2
    total = 0.0
    for length, (va, ea) in gi.items():
        if length not in gj:
            continue
        vb, eb = gj[length]
        dv = va[:, None, :, :] - vb[None, :, :, :]
        prod = np.exp(-np.sum(dv * dv, axis=3) / sv2).prod(axis=2)
        if length > 1:
            de = ea[:, None, :, :] - eb[None, :, :, :]
            prod = prod * np.exp(-np.sum(de * de, axis=3) / se2).prod(axis=2)
        if config.distance_mode == "one_minus_product":
            prod = 1.0 - prod
        total += float(np.exp(-(prod**2) / (2.0 * config.sigma**2)).sum())
    return total / (bag_i.size * bag_j.size)


def build_graph_gram(
    graphs, configs, id_prefix: str = "bop"
) -> tuple[list[GramMatrix], list[dict]]:
    """One Gram matrix over the graph collection per kernel config.

    Walk bags are sampled once per (graph, max_length, bag_size, seed)
    combination and shared across bandwidth settings, which keeps every
    Gram symmetric by construction. Matrices failing the eigenvalue floor
    get a small diagonal jitter (logged).

    Returns the matrices plus manifest entries carrying "id", "matrix"
    and the config parameters, ready for kernels.write_manifest.
    """
    graphs = list(graphs)
    if not graphs:
        raise ValueError("empty graph collection")
    configs = list(configs)
    if not configs:
        raise ValueError("no kernel configs given")
    dims = {g.vertex_labels.shape[1] for g in graphs}
    if len(dims) != 1:
        raise ValueError("graphs must share the vertex label dimension")

    bag_cache: dict[tuple, list[PathBag]] = {}
    grams: list[GramMatrix] = []
    entries: list[dict] = []
    n = len(graphs)
    for c_idx, config in enumerate(configs):
        key = (config.max_length, config.bag_size, config.seed)
        if key not in bag_cache:
            bag_cache[key] = [sample_paths(g, config) for g in graphs]
        bags = bag_cache[key]
        values = np.zeros((n, n))
        for i in range(n):
            for j in range(i, n):
                values[i, j] = graph_kernel_value(bags[i], bags[j], config)
                values[j, i] = values[i, j]
        candidate = GramMatrix(values)
        if not candidate.eigenvalue_floor_ok():
            jitter = 1e-8 * np.trace(values) / n
            log.warning(
                "graph gram %d failed the PSD floor; adding diagonal jitter %.3e",
                c_idx,
                jitter,
            )
            candidate = GramMatrix(values + jitter * np.eye(n))
        grams.append(candidate)
        entry = {"id": f"{id_prefix}_{c_idx:03d}", "matrix": candidate.values}
        entry.update(config.to_dict())
        entries.append(entry)
    return grams, entries


def graphs_to_json(graphs, path) -> None:
    Path(path).write_text(
        json.dumps({"graphs": [g.to_dict() for g in graphs]}, sort_keys=True)
    )


def graphs_from_json(path) -> list[LabeledGraph]:
    raw = json.loads(Path(path).read_text())
    return [LabeledGraph.from_dict(g) for g in raw["graphs"]]


def collection_from_json(path) -> dict[str, list[LabeledGraph]]:
    """Load a named-function graph collection.

    Accepts either {"graphs": [...]} (a single anonymous collection) or
    {"functions": {"name": [...], ...}} with per-function graph lists
    aligned by shape index.
    """
    raw = json.loads(Path(path).read_text())
    if "functions" in raw:
        return {
            name: [LabeledGraph.from_dict(g) for g in graphs]
            for name, graphs in raw["functions"].items()
        }
    return {"default": [LabeledGraph.from_dict(g) for g in raw["graphs"]]}
