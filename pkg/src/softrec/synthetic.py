"""Clustered synthetic corpora for self-contained experiments.

The generator plants a configurable number of interest clusters, each
with its own item pool and tag vocabulary. Most users draw items mainly
from their home cluster; a configurable fraction sits between two
clusters with mixed draw weights. Friendships come from groups (mostly
within-cluster, with bridging users joining a group on the other side),
matching the group-based friendship file format.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class SyntheticConfig:
    num_clusters: int = 2
    users_per_cluster: int = 100
    overlap_fraction: float = 0.2
    items_per_cluster: int = 150
    entries_per_user: int = 15
    max_tags_per_entry: int = 3
    tags_per_cluster: int = 25
    item_signature_size: int = 4
    group_size: int = 5
    popularity_exponent: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.num_clusters < 2:
            raise ConfigError("need at least 2 clusters for overlap structure")
        if not 0.0 <= self.overlap_fraction <= 1.0:
            raise ConfigError(f"overlap_fraction must be in [0, 1], got {self.overlap_fraction}")
        if self.users_per_cluster < self.group_size:
            raise ConfigError("users_per_cluster must be >= group_size")
        if self.entries_per_user > self.num_clusters * self.items_per_cluster:
            raise ConfigError("entries_per_user exceeds the item catalog")
        if self.item_signature_size > self.tags_per_cluster:
            raise ConfigError("item_signature_size exceeds tags_per_cluster")
        if self.popularity_exponent < 0.0:
            raise ConfigError("popularity_exponent must be >= 0")


def generate(cfg: SyntheticConfig):
    """Build (interaction_records, group_lines) for the given config.

    Records are (user_key, item_key, tag_key) triples; group lines are
    the member-key lists of each friendship group. Deterministic per
    seed.
    """
    rng = np.random.default_rng(cfg.seed)
    k = cfg.num_clusters
    num_users = k * cfg.users_per_cluster

    # per-cluster draw weights: pure users favor home heavily, overlap
    # users split between home and one other cluster
    home = np.repeat(np.arange(k), cfg.users_per_cluster)
    weights = np.full((num_users, k), 0.15 / max(k - 1, 1))
    weights[np.arange(num_users), home] = 0.85
    overlap_users = []
    for c in range(k):
        members = np.flatnonzero(home == c)
        n_overlap = int(round(cfg.overlap_fraction * len(members)))
        chosen = rng.choice(members, size=n_overlap, replace=False)
        for u in chosen:
            other = int(rng.integers(k - 1))
            if other >= c:
                other += 1
            mix = 0.5 + rng.uniform(-0.1, 0.1)
            w = np.zeros(k)
            w[c] = mix
            w[other] = 1.0 - mix
            weights[u] = w
            overlap_users.append(int(u))

    # item signatures: a few characteristic tags from the item's pool
    signatures = []
    for c in range(k):
        pool = [f"c{c}t{j:02d}" for j in range(cfg.tags_per_cluster)]
        for _ in range(cfg.items_per_cluster):
            signatures.append(
                [pool[j] for j in rng.choice(cfg.tags_per_cluster,
                                             size=cfg.item_signature_size,
                                             replace=False)]
            )
    # Zipf-style within-cluster item popularity: lower item index means
    # more popular, giving the holdout predictable structure
    ranks = np.arange(1, cfg.items_per_cluster + 1, dtype=float)
    item_weights = ranks ** (-cfg.popularity_exponent)
    item_weights /= item_weights.sum()

    records = []
    for u in range(num_users):
        chosen: set[int] = set()
        w = weights[u]
        while len(chosen) < cfg.entries_per_user:
            c = int(rng.choice(k, p=w))
            i = int(c * cfg.items_per_cluster + rng.choice(cfg.items_per_cluster,
                                                           p=item_weights))
            if i in chosen:
                continue
            chosen.add(i)
            n_tags = int(rng.integers(1, cfg.max_tags_per_entry + 1))
            sig = signatures[i]
            tags = [sig[j] for j in rng.choice(len(sig), size=min(n_tags, len(sig)),
                                               replace=False)]
            for t in tags:
                records.append((f"u{u:04d}", f"i{i:04d}", t))

    groups = []
    group_members: list[list[int]] = []
    for c in range(k):
        members = np.flatnonzero(home == c)
        order = rng.permutation(members)
        for start in range(0, len(order), cfg.group_size):
            chunk = [int(x) for x in order[start:start + cfg.group_size]]
            if len(chunk) == 1:  # singletons would be friendless
                group_members[-1].extend(chunk)
            else:
                group_members.append(chunk)
    for u in overlap_users:
        w = weights[u].copy()
        w[home[u]] = -1.0
        other = int(np.argmax(w))
        foreign = [gi for gi, g in enumerate(group_members)
                   if home[g[0]] == other and u not in g]
        if foreign:
            gi = foreign[int(rng.integers(len(foreign)))]
            group_members[gi].append(u)
    for g in group_members:
        groups.append([f"u{x:04d}" for x in g])
    return records, groups


def write_corpus(records, groups, out_dir):
    """Write interactions.tsv and friendships.tsv under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    inter = out / "interactions.tsv"
    with open(inter, "w", encoding="utf-8") as fh:
        for u, i, t in records:
            fh.write(f"{u}\t{i}\t{t}\n")
    friends = out / "friendships.tsv"
    with open(friends, "w", encoding="utf-8") as fh:
        for gi, members in enumerate(groups):
            fh.write(f"group:g{gi}\t" + "\t".join(members) + "\n")
    return inter, friends
