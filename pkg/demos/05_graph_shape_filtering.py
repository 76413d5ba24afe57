"""Filter one family of labeled graphs out of a mixed collection.

Mimics a retrieval filter: every item is a graph (here, synthetic chains
vs rings with noisy vertex labels), kernels between graphs come from
bags of random walks, and the filter is a slim multiple-kernel model
trained on five examples of the target family only. Ranking all test
items by acceptance, we check how often the top item is a target and
where the first target and first off-family item land.

The walk-product similarity is converted to a distance before the
Gaussian envelope (distance_mode="one_minus_product"), which keeps the
precomputed matrices close to positive semidefinite; tiny eigenvalue
floor violations (walks of different lengths score a hard 0, which is
not a true kernel) are patched with a logged diagonal jitter.
"""

import numpy as np

import mksvdd
from mksvdd.graphs import LabeledGraph, PathKernelConfig, build_graph_gram


def chain_graph(rng, n, offset):
    labels = offset + 0.3 * rng.standard_normal((n, 2))
    edges = np.array([[i, i + 1] for i in range(n - 1)])
    edge_labels = 0.3 * rng.standard_normal((len(edges), 1))
    return LabeledGraph(labels, edges, edge_labels)


def ring_graph(rng, n, offset):
    labels = offset + 0.3 * rng.standard_normal((n, 2))
    edges = np.array([[i, (i + 1) % n] for i in range(n)])
    edge_labels = 1.0 + 0.3 * rng.standard_normal((len(edges), 1))
    return LabeledGraph(labels, edges, edge_labels)


rng = np.random.default_rng(0)
targets = [chain_graph(rng, int(rng.integers(5, 9)), offset=0.0) for _ in range(10)]
similars = [ring_graph(rng, int(rng.integers(5, 9)), offset=0.6) for _ in range(10)]
collection = targets + similars
roles = np.array(["target"] * 10 + ["similar"] * 10, dtype=object)

configs = [
    PathKernelConfig(
        sigma=s, vertex_bandwidth=0.8, edge_bandwidth=0.8,
        max_length=L, bag_size=25, seed=1,
        distance_mode="one_minus_product",
    )
    for L in (2, 3, 4)
    for s in (0.3, 1.0)
]
grams, entries = build_graph_gram(collection, configs)
matrices = {e["id"]: e["matrix"] for e in entries}
print(f"kernel dictionary: {len(matrices)} precomputed graph kernels over "
      f"{len(collection)} graphs")

wins = 0
first_target_ranks = []
first_similar_ranks = []
for split_seed in range(10):
    split_rng = np.random.default_rng(100 + split_seed)
    train_ids = np.sort(split_rng.choice(10, size=5, replace=False))
    test_ids = np.setdiff1d(np.arange(len(collection)), train_ids)

    dictionary = mksvdd.KernelDictionary.from_matrices(matrices, train_ids=train_ids)
    model, _ = mksvdd.fit_method(
        "slim-mk-svdd", dictionary, C=0.4, lam=0.01,
        gap_tol=1e-3, max_outer_iters=60,
    )
    scores = mksvdd.score_ids(model, test_ids)
    metrics = mksvdd.rank_metrics(scores, roles[test_ids])
    wins += metrics.win
    first_target_ranks.append(metrics.rank_first_target)
    first_similar_ranks.append(metrics.rank_first_similar)

print(f"win ratio (target ranked first): {wins}/10")
print(f"average rank of first target   : {np.mean(first_target_ranks):.1f}")
print(f"average rank of first similar  : {np.mean(first_similar_ranks):.1f}")
print("a random ranking would put the first of 5 remaining targets at ~2.7")
