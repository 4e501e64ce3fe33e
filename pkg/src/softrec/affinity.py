"""Pairwise quantities feeding the regularizers.

Three ingredients: the hard (cluster-mixture) user similarity, the soft
(membership-difference) user similarity, and the user-item correlation.
All of them reduce to averaged cosines between tag-count vectors, with
the convention that the cosine involving an all-zero vector is 0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .clustering import ClusterModel
from .corpus import FriendshipGraph, TagTensor
from .errors import ConfigError, SoftrecError

SIM_NORMS = ("cotag", "catalog")


def cos_tags(a, b) -> float:
    """Cosine of two sparse tag-count vectors; 0 if either is zero."""
    if not a or not b:
        return 0.0
    dot = 0.0
    for t, v in a.items():
        w = b.get(t)
        if w:
            dot += v * w
    if dot == 0.0:
        return 0.0
    na2 = sum(v * v for v in a.values())
    nb2 = sum(v * v for v in b.values())
    # sqrt of the product keeps the self-cosine of integer count
    # vectors exactly 1.0
    return dot / math.sqrt(na2 * nb2)


def _avg_cotag_cos(tensor: TagTensor, u: int, f: int, norm: str) -> float:
    """Average cosine over the co-tagged item set of u and f.

    norm="cotag" divides by |O(u) & O(f)| (0 if empty); norm="catalog"
    keeps the literal 1/q reading, where non-shared items contribute 0.
    """
    shared = sorted(set(tensor.items_of(u)) & set(tensor.items_of(f)))
    if norm == "cotag":
        denom = len(shared)
        if denom == 0:
            return 0.0
    elif norm == "catalog":
        denom = tensor.num_items
    else:
        raise ConfigError(f"sim_norm must be one of {SIM_NORMS}, got {norm!r}")
    total = sum(cos_tags(tensor.tags_of(u, i), tensor.tags_of(f, i)) for i in shared)
    return total / denom


def sim_hard(u, f, tensor, clusters: ClusterModel, lambda_mix: float,
             norm: str = "cotag") -> float:
    """Cluster-mixture similarity: k * average co-tagged cosine.

    k is lambda_mix when u and f share a hard cluster, 1 - lambda_mix
    otherwise.
    """
    if not 0.0 < lambda_mix < 1.0:
        raise ConfigError(f"lambda_mix must be in (0, 1), got {lambda_mix}")
    k = lambda_mix if clusters.hard_assign[u] == clusters.hard_assign[f] else 1.0 - lambda_mix
    return k * _avg_cotag_cos(tensor, u, f, norm)


def sim_soft(u, f, tensor, clusters: ClusterModel, norm: str = "cotag") -> float:
    """Membership-difference similarity.

    The factor 1 - mean_c |mu_uc - mu_fc| scales the same average
    co-tagged cosine used by the hard variant.
    """
    mu_u = clusters.memberships[u]
    mu_f = clusters.memberships[f]
    if abs(mu_u.sum() - 1.0) > 1e-6 or abs(mu_f.sum() - 1.0) > 1e-6:
        raise SoftrecError("membership rows are not normalized")
    factor = 1.0 - float(np.abs(mu_u - mu_f).sum()) / clusters.num_clusters
    return factor * _avg_cotag_cos(tensor, u, f, norm)


def corr(f: int, i: int, tensor: TagTensor) -> float:
    """Average cosine of f's tag vector on i against all of O(f).

    0 when f never tagged i (zero-vector convention) or when O(f) is
    empty; the j = i self term contributes 1 when i is in O(f).
    """
    items = tensor.items_of(f)
    if not items:
        return 0.0
    ti = tensor.tags_of(f, i)
    if not ti:
        return 0.0
    total = sum(cos_tags(ti, tensor.tags_of(f, j)) for j in items)
    return total / len(items)


@dataclass
class SimilarityTable:
    """Similarity values over friendship edges, keyed (u, f) with u < f."""

    mode: str  # "hard" | "soft"
    values: dict[tuple[int, int], float]
    lambda_mix: float | None
    norm: str

    def lookup(self, u: int, f: int) -> float:
        key = (u, f) if u < f else (f, u)
        return self.values.get(key, 0.0)


@dataclass
class CorrelationTable:
    """corr(f, i) over pairs with f a friend of someone and i in O(f).

    All other pairs are 0 by convention and not stored; per-user row
    sums are kept because the user-item loss term only ever consumes
    sum_i corr(f, i).
    """

    values: dict[tuple[int, int], float]
    row_sums: dict[int, float]

    def lookup(self, f: int, i: int) -> float:
        return self.values.get((f, i), 0.0)

    def row_sum(self, f: int) -> float:
        return self.row_sums.get(f, 0.0)


def build_similarity_table(graph: FriendshipGraph, tensor: TagTensor,
                           clusters: ClusterModel, mode: str,
                           lambda_mix: float = 0.8,
                           norm: str = "cotag") -> SimilarityTable:
    if mode not in ("hard", "soft"):
        raise ConfigError(f"similarity mode must be 'hard' or 'soft', got {mode!r}")
    if mode == "soft" and clusters.algorithm == "kmeans":
        warnings.warn(
            "soft similarity over one-hot (kmeans) memberships degenerates "
            "to a fixed same/different-cluster factor",
            stacklevel=2,
        )
    values = {}
    for u, f in graph.edges():
        if mode == "hard":
            values[(u, f)] = sim_hard(u, f, tensor, clusters, lambda_mix, norm)
        else:
            values[(u, f)] = sim_soft(u, f, tensor, clusters, norm)
    return SimilarityTable(mode, values, lambda_mix if mode == "hard" else None, norm)


def build_correlation_table(graph: FriendshipGraph, tensor: TagTensor) -> CorrelationTable:
    values = {}
    row_sums = {}
    for f in range(tensor.num_users):
        if not graph.friends_of(f):
            continue
        total = 0.0
        for i in tensor.items_of(f):
            v = corr(f, i, tensor)
            values[(f, i)] = v
            total += v
        row_sums[f] = total
    return CorrelationTable(values, row_sums)


def dump_similarity_table(table: SimilarityTable, path):
    with open(path, "w", encoding="utf-8") as fh:
        for (u, f) in sorted(table.values):
            fh.write(f"{u}\t{f}\t{table.values[(u, f)]!r}\n")


def dump_correlation_table(table: CorrelationTable, path):
    with open(path, "w", encoding="utf-8") as fh:
        for (f, i) in sorted(table.values):
            fh.write(f"{f}\t{i}\t{table.values[(f, i)]!r}\n")
