"""User-item-tag corpus: loading, pruning, splitting, tag profiles.

On-disk formats are plain text, one record per line, tab- or
comma-separated (whitespace accepted as a fallback), with ``#`` comment
lines. Interaction records are ``user<TAB>item<TAB>tag`` triples;
friendship records are either ``user<TAB>user`` pairs or
``group:<id><TAB>user...`` lines whose members become a clique.

All structures returned here are treated as immutable once built;
derived indexes (items per user) are constructed at creation time and
must not be invalidated by mutation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    EmptyCorpusError,
    ParseError,
    UnknownUserError,
)


@dataclass
class IdMap:
    """Dense id <-> original key mapping, in first-seen order."""

    keys: list[str] = field(default_factory=list)
    index: dict[str, int] = field(default_factory=dict)

    @classmethod
    def from_keys(cls, keys):
        m = cls()
        for k in keys:
            m.intern(k)
        return m

    def intern(self, key: str) -> int:
        i = self.index.get(key)
        if i is None:
            i = len(self.keys)
            self.keys.append(key)
            self.index[key] = i
        return i

    def __len__(self):
        return len(self.keys)

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for i, key in enumerate(self.keys):
                fh.write(f"{i}\t{key}\n")


@dataclass
class TagTensor:
    """Sparse user x item -> tag-count store.

    ``entries`` maps ``(u, i)`` to a tag-count vector (tag index ->
    count >= 1); an entry exists exactly where the user selected the
    item. The per-user item index is derived once at construction.
    """

    num_users: int
    num_items: int
    tag_vocab: list[str]
    entries: dict[tuple[int, int], dict[int, int]]

    def __post_init__(self):
        by_user = [[] for _ in range(self.num_users)]
        for u, i in self.entries:
            by_user[u].append(i)
        self._items_by_user = [sorted(items) for items in by_user]

    def items_of(self, u: int) -> list[int]:
        if not 0 <= u < self.num_users:
            raise IndexError(f"user id {u} out of range [0, {self.num_users})")
        return self._items_by_user[u]

    def tags_of(self, u: int, i: int) -> dict[int, int]:
        return self.entries.get((u, i), {})

    @property
    def num_entries(self) -> int:
        return len(self.entries)

    def validate(self):
        for (u, i), vec in self.entries.items():
            assert 0 <= u < self.num_users and 0 <= i < self.num_items
            assert vec, f"empty tag vector at ({u}, {i})"
            assert all(c >= 1 for c in vec.values())
            assert all(0 <= t < len(self.tag_vocab) for t in vec)


@dataclass
class FriendshipGraph:
    """Undirected user adjacency; per-user friend lists kept sorted."""

    adjacency: list[list[int]]

    @classmethod
    def from_edges(cls, num_users, edges):
        adj = [set() for _ in range(num_users)]
        for u, f in edges:
            if u == f:
                continue
            adj[u].add(f)
            adj[f].add(u)
        return cls([sorted(s) for s in adj])

    @property
    def num_users(self):
        return len(self.adjacency)

    def friends_of(self, u: int) -> list[int]:
        return self.adjacency[u]

    def edges(self):
        """Yield each undirected edge once, as (u, f) with u < f."""
        for u, friends in enumerate(self.adjacency):
            for f in friends:
                if u < f:
                    yield u, f

    def validate(self):
        for u, friends in enumerate(self.adjacency):
            assert u not in friends, f"self-edge at {u}"
            for f in friends:
                assert 0 <= f < self.num_users
                assert u in self.adjacency[f], f"asymmetric edge ({u}, {f})"


class ScalarView:
    """Derived scalar reading of the tensor: the factorization target.

    binary mode: 1.0 wherever an entry exists. tag-count mode: the size
    of the entry's tag multiset (sum of counts), >= 1 where defined.
    """

    MODES = ("binary", "tag-count")

    def __init__(self, tensor: TagTensor, mode: str = "tag-count"):
        if mode not in self.MODES:
            raise ConfigError(f"scalar_mode must be one of {self.MODES}, got {mode!r}")
        self.tensor = tensor
        self.mode = mode

    def value(self, u: int, i: int) -> float:
        vec = self.tensor.tags_of(u, i)
        if not vec:
            return 0.0
        if self.mode == "binary":
            return 1.0
        return float(sum(vec.values()))


@dataclass
class DataSplit:
    """Per-user holdout: train tensor plus held-out test entries."""

    train: TagTensor
    test: dict[int, dict[int, dict[int, int]]]  # u -> i -> tag vector
    seed: int
    test_fraction: float

    @property
    def num_test_entries(self):
        return sum(len(items) for items in self.test.values())


def _split_fields(line: str) -> list[str]:
    if "\t" in line:
        return line.split("\t")
    if "," in line:
        return line.split(",")
    return line.split()


def _records(path):
    """Yield (line_no, fields) for every non-comment, non-blank line."""
    with open(path, "r", encoding="utf-8") as fh:
        for n, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield n, [f.strip() for f in _split_fields(line)]


def load_interactions(path) -> tuple[TagTensor, IdMap, IdMap]:
    """Read (user, item, tag) triples into a TagTensor.

    Keys are arbitrary strings mapped to dense ids in first-seen order;
    duplicate (user, item, tag) records aggregate by count. Returns the
    tensor together with the user and item id maps for reporting.
    """
    users, items, tags = IdMap(), IdMap(), IdMap()
    entries: dict[tuple[int, int], dict[int, int]] = {}
    for n, fields in _records(path):
        if len(fields) != 3:
            raise ParseError(f"expected 3 fields (user, item, tag), got {len(fields)}", n)
        if not all(fields):
            raise ParseError("empty field in record", n)
        ukey, ikey, tkey = fields
        u, i, t = users.intern(ukey), items.intern(ikey), tags.intern(tkey)
        vec = entries.setdefault((u, i), {})
        vec[t] = vec.get(t, 0) + 1
    if not entries:
        raise EmptyCorpusError(f"no interaction records in {path}")
    tensor = TagTensor(len(users), len(items), list(tags.keys), entries)
    return tensor, users, items


def load_friendships(path, users: IdMap) -> FriendshipGraph:
    """Read user pairs and/or group lines into a symmetric graph.

    Group lines (first field ``group:<id>``) expand to a clique over
    their members. Self-edges are dropped, duplicates deduplicated,
    unknown user keys rejected.
    """
    edges = set()

    def resolve(key, n):
        u = users.index.get(key)
        if u is None:
            raise UnknownUserError(f"line {n}: unknown user key {key!r}")
        return u

    for n, fields in _records(path):
        if fields[0].startswith("group:"):
            members = [resolve(k, n) for k in fields[1:]]
            for a in range(len(members)):
                for b in range(a + 1, len(members)):
                    if members[a] != members[b]:
                        edges.add((members[a], members[b]))
        elif len(fields) == 2:
            edges.add((resolve(fields[0], n), resolve(fields[1], n)))
        else:
            raise ParseError(
                f"expected a user pair or a group line, got {len(fields)} fields", n
            )
    return FriendshipGraph.from_edges(len(users), edges)


@dataclass
class PruneResult:
    tensor: TagTensor
    graph: FriendshipGraph
    kept_users: list[int]  # old ids, in new-id order
    kept_items: list[int]


def prune(tensor: TagTensor, graph: FriendshipGraph, min_items: int = 1,
          require_friends: bool = True) -> PruneResult:
    """Drop users with < min_items entries and, optionally, no friends.

    Friend removal can orphan other users, so the friend condition is
    iterated to a fixed point; items left with no entries are dropped
    and all ids re-densified. Idempotent for fixed parameters.
    """
    if min_items < 0:
        raise ConfigError(f"min_items must be >= 0, got {min_items}")
    alive = {u for u in range(tensor.num_users) if len(tensor.items_of(u)) >= min_items}
    if require_friends:
        changed = True
        while changed:
            changed = False
            for u in sorted(alive):
                if not any(f in alive for f in graph.friends_of(u)):
                    alive.discard(u)
                    changed = True
    if not alive:
        raise EmptyCorpusError("pruning removed every user")

    kept_users = sorted(alive)
    user_new = {old: new for new, old in enumerate(kept_users)}
    kept_item_set = sorted({i for (u, i) in tensor.entries if u in alive})
    if not kept_item_set:
        raise EmptyCorpusError("pruning removed every item")
    item_new = {old: new for new, old in enumerate(kept_item_set)}

    entries = {
        (user_new[u], item_new[i]): dict(vec)
        for (u, i), vec in tensor.entries.items()
        if u in alive
    }
    new_tensor = TagTensor(len(kept_users), len(kept_item_set), list(tensor.tag_vocab), entries)
    new_edges = (
        (user_new[u], user_new[f])
        for u, f in graph.edges()
        if u in alive and f in alive
    )
    new_graph = FriendshipGraph.from_edges(len(kept_users), new_edges)
    return PruneResult(new_tensor, new_graph, kept_users, kept_item_set)


def split(tensor: TagTensor, test_fraction: float, seed: int) -> DataSplit:
    """Per-user random holdout of ceil(test_fraction * |O(u)|) items.

    Capped so at least one entry stays in train; users with a single
    entry contribute nothing to test. Deterministic given the seed.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test_fraction must be in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    train_entries = {k: dict(v) for k, v in tensor.entries.items()}
    test: dict[int, dict[int, dict[int, int]]] = {}
    for u in range(tensor.num_users):
        items = tensor.items_of(u)
        if len(items) < 2:
            continue
        # epsilon guards float noise in fraction*count (e.g. 0.2*15)
        n_test = min(math.ceil(test_fraction * len(items) - 1e-9), len(items) - 1)
        if n_test < 1:
            continue
        picked = sorted(rng.choice(len(items), size=n_test, replace=False))
        held = {}
        for j in picked:
            i = items[j]
            held[i] = train_entries.pop((u, i))
        test[u] = held
    train = TagTensor(tensor.num_users, tensor.num_items, list(tensor.tag_vocab), train_entries)
    return DataSplit(train, test, seed, test_fraction)


def user_tag_profile(tensor: TagTensor, u: int) -> np.ndarray:
    """Total count of each tag across all items the user tagged."""
    profile = np.zeros(len(tensor.tag_vocab))
    for i in tensor.items_of(u):
        for t, c in tensor.tags_of(u, i).items():
            profile[t] += c
    return profile


def user_profile_matrix(tensor: TagTensor, l2_normalize: bool = True) -> np.ndarray:
    """Stack all user tag profiles; optionally L2-normalize each row.

    Zero rows (users with no entries) are left as zeros.
    """
    rows = np.stack([user_tag_profile(tensor, u) for u in range(tensor.num_users)])
    if l2_normalize:
        norms = np.linalg.norm(rows, axis=1)
        nz = norms > 0
        rows[nz] /= norms[nz, None]
    return rows
