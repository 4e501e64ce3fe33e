"""Comparison scorers: tag popularity, user-based CF, and SoReg.

Every scorer exposes ``score(u, item_ids) -> ndarray``; the factor
models plug into the same interface through FactorScorer, so the
evaluator is agnostic to the method being ranked.
"""

from __future__ import annotations

import warnings
from dataclasses import replace

import numpy as np

from .affinity import CorrelationTable
from .corpus import TagTensor, user_profile_matrix
from .factorizer import LatentFactors, TrainingConfig, train


def _user_tag_counts(tensor: TagTensor) -> list[dict[int, int]]:
    counts: list[dict[int, int]] = [dict() for _ in range(tensor.num_users)]
    for (u, _i), vec in tensor.entries.items():
        row = counts[u]
        for t, c in vec.items():
            row[t] = row.get(t, 0) + c
    return counts


def _item_tag_counts(tensor: TagTensor) -> list[dict[int, int]]:
    counts: list[dict[int, int]] = [dict() for _ in range(tensor.num_items)]
    for (_u, i), vec in tensor.entries.items():
        row = counts[i]
        for t, c in vec.items():
            row[t] = row.get(t, 0) + c
    return counts


def pop_score(u: int, i: int, tensor: TagTensor) -> float:
    """Tag popularity: sum over u's tags of n_ut * n_ti."""
    ut = _user_tag_counts(tensor)[u]
    it = _item_tag_counts(tensor)[i]
    return float(sum(c * it.get(t, 0) for t, c in ut.items()))


class PopScorer:
    """Popularity scorer with the per-user/per-item counts precomputed."""

    def __init__(self, tensor: TagTensor):
        self._user_tags = _user_tag_counts(tensor)
        self._item_tags = _item_tag_counts(tensor)

    def score(self, u, item_ids):
        ut = self._user_tags[u]
        return np.array([
            float(sum(c * self._item_tags[i].get(t, 0) for t, c in ut.items()))
            for i in item_ids
        ])


class UCFScorer:
    """User-based CF over plain tag-profile cosine neighborhoods.

    The friendship graph is deliberately not used; neighbors are the
    top-k users by profile cosine, and an item's score is the summed
    similarity of neighbors who selected it.
    """

    def __init__(self, tensor: TagTensor, neighbors: int = 20):
        p = tensor.num_users
        if neighbors >= p:
            warnings.warn(
                f"neighbor count {neighbors} >= user count {p}; clamping to {p - 1}",
                stacklevel=2,
            )
            neighbors = p - 1
        self.k = max(neighbors, 0)
        self.tensor = tensor
        self._profiles = user_profile_matrix(tensor, l2_normalize=True)
        self._acc_cache: dict[int, np.ndarray] = {}

    def _item_accumulator(self, u):
        acc = self._acc_cache.get(u)
        if acc is not None:
            return acc
        sims = self._profiles @ self._profiles[u]
        sims[u] = -np.inf
        # ascending id breaks score ties
        order = np.lexsort((np.arange(len(sims)), -sims))[: self.k]
        acc = np.zeros(self.tensor.num_items)
        for v in order:
            s = sims[v]
            if s > 0:
                acc[self.tensor.items_of(int(v))] += s
        self._acc_cache[u] = acc
        return acc

    def score(self, u, item_ids):
        return self._item_accumulator(u)[np.asarray(item_ids, dtype=int)]


def ucf_score(u: int, i: int, tensor: TagTensor, neighbors: int = 20) -> float:
    return float(UCFScorer(tensor, neighbors).score(u, [i])[0])


class FactorScorer:
    """Ranks by the inner product of trained latent factors."""

    def __init__(self, factors: LatentFactors):
        self.factors = factors

    def score(self, u, item_ids):
        return self.factors.S[:, u] @ self.factors.V[:, np.asarray(item_ids, dtype=int)]


def soreg_train(tensor, sim_table, cfg: TrainingConfig, corr_table=None):
    """Social-regularization-only training: the user-item term is off.

    Identical to ``train`` with alpha forced to 0; the similarity table
    is conventionally the hard one.
    """
    if corr_table is None:
        corr_table = CorrelationTable({}, {})
    return train(tensor, sim_table, corr_table, replace(cfg, alpha=0.0))
