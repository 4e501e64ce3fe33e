import numpy as np
import pytest

from softrec.affinity import build_correlation_table, build_similarity_table
from softrec.clustering import cmeans, kmeans
from softrec.corpus import FriendshipGraph, TagTensor, user_profile_matrix
from softrec.factorizer import TrainingConfig


def make_tensor(entry_spec, num_users=None, num_items=None, vocab=None):
    """Build a TagTensor from {(u, i): {tag_idx: count} or [tag_idx...]}."""
    entries = {}
    for key, tags in entry_spec.items():
        if isinstance(tags, dict):
            entries[key] = dict(tags)
        else:
            vec = {}
            for t in tags:
                vec[t] = vec.get(t, 0) + 1
            entries[key] = vec
    p = num_users if num_users is not None else 1 + max(u for u, _ in entries)
    q = num_items if num_items is not None else 1 + max(i for _, i in entries)
    all_tags = {t for vec in entries.values() for t in vec}
    vocab = vocab if vocab is not None else [f"t{j}" for j in range(1 + max(all_tags, default=-1))]
    return TagTensor(p, q, vocab, entries)


def random_tensor(rng, num_users, num_items, num_tags=6, density=0.35):
    entries = {}
    for u in range(num_users):
        for i in range(num_items):
            if rng.random() < density:
                n = int(rng.integers(1, 4))
                tags = rng.choice(num_tags, size=min(n, num_tags), replace=False)
                entries[(u, i)] = {int(t): int(rng.integers(1, 4)) for t in tags}
        if not any(uu == u for uu, _ in entries):
            entries[(u, u % num_items)] = {int(rng.integers(num_tags)): 1}
    return TagTensor(num_users, num_items, [f"t{j}" for j in range(num_tags)], entries)


def random_graph(rng, num_users, edge_prob=0.35):
    edges = [
        (u, f)
        for u in range(num_users)
        for f in range(u + 1, num_users)
        if rng.random() < edge_prob
    ]
    return FriendshipGraph.from_edges(num_users, edges)


class Instance:
    """A complete random problem: corpus, graph, clusters, tables, factors."""

    def __init__(self, seed, num_users=8, num_items=12, latent_dim=4,
                 alpha=0.01, beta=0.01, sim_mode="hard", lambda_mix=0.8,
                 scalar_mode="tag-count", num_clusters=2, **cfg_kwargs):
        rng = np.random.default_rng(seed)
        self.tensor = random_tensor(rng, num_users, num_items)
        self.graph = random_graph(rng, num_users)
        profiles = user_profile_matrix(self.tensor, l2_normalize=True)
        if sim_mode == "hard":
            self.clusters = kmeans(profiles, num_clusters, seed=seed)
        else:
            self.clusters = cmeans(profiles, num_clusters, 2.0, seed=seed)
        self.sim_mode = sim_mode
        self.lambda_mix = lambda_mix
        self.sim_table = build_similarity_table(
            self.graph, self.tensor, self.clusters, sim_mode, lambda_mix
        )
        self.corr_table = build_correlation_table(self.graph, self.tensor)
        self.cfg = TrainingConfig(
            alpha=alpha, beta=beta, latent_dim=latent_dim,
            scalar_mode=scalar_mode, seed=seed, **cfg_kwargs,
        )
        self.S = rng.uniform(-0.5, 0.5, size=(latent_dim, num_users))
        self.V = rng.uniform(-0.5, 0.5, size=(latent_dim, num_items))


@pytest.fixture
def toy_tensor():
    # 3 users / 4 items / tags {0: design, 1: css, 2: web}
    return make_tensor({
        (0, 0): {0: 1, 1: 1},
        (0, 1): {0: 2},
        (0, 2): {2: 1},
        (1, 0): {0: 1},
        (1, 3): {1: 1, 2: 1},
        (2, 1): {0: 1},
        (2, 2): {2: 2},
        (2, 3): {1: 1},
    }, vocab=["design", "css", "web"])


@pytest.fixture
def toy_graph():
    return FriendshipGraph.from_edges(3, [(0, 1), (1, 2)])
