"""Hard and fuzzy user clustering on tag-profile vectors.

Both algorithms share k-means++ seeding and record a per-iteration
objective trace. K-means produces exact one-hot membership rows; fuzzy
C-means produces row-stochastic membership degrees controlled by the
fuzzifier exponent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EmptyInputError


@dataclass
class ClusterModel:
    algorithm: str  # "kmeans" | "cmeans"
    num_clusters: int
    centroids: np.ndarray  # C x d
    memberships: np.ndarray  # p x C, rows sum to 1
    hard_assign: np.ndarray  # p, argmax cluster per user (ties -> lowest id)
    fuzzifier: float | None
    objective_trace: list[float]

    @property
    def num_points(self):
        return self.memberships.shape[0]

    def validate(self):
        assert self.memberships.shape == (self.num_points, self.num_clusters)
        assert np.all(self.memberships >= 0) and np.all(self.memberships <= 1)
        np.testing.assert_allclose(self.memberships.sum(axis=1), 1.0, atol=1e-9)
        assert np.array_equal(self.hard_assign, self.memberships.argmax(axis=1))


def _sq_dists(X, centroids):
    """Pairwise squared Euclidean distances, n x C, clipped at 0."""
    d2 = (
        (X * X).sum(axis=1)[:, None]
        + (centroids * centroids).sum(axis=1)[None, :]
        - 2.0 * X @ centroids.T
    )
    return np.maximum(d2, 0.0)


def _kmeans_pp(X, k, rng):
    """k-means++ seeding: D^2-weighted draws of data points."""
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    d2 = ((X - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:  # unreachable when k <= distinct points
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centroids[j] = X[idx]
        d2 = np.minimum(d2, ((X - centroids[j]) ** 2).sum(axis=1))
    return centroids


def _check_inputs(X, num_clusters):
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyInputError("need a non-empty list of profile vectors")
    if num_clusters < 1:
        raise ConfigError(f"cluster count must be >= 1, got {num_clusters}")
    distinct = np.unique(X, axis=0).shape[0]
    if num_clusters > distinct:
        raise ConfigError(
            f"cluster count {num_clusters} exceeds {distinct} distinct profiles"
        )


def kmeans(profiles, num_clusters, max_iter=100, tol=1e-6, seed=0) -> ClusterModel:
    """Lloyd's K-means with k-means++ seeding.

    The objective (within-cluster sum of squares) is recorded once per
    iteration and is non-increasing; stops when the improvement drops
    below ``tol`` or after ``max_iter`` iterations. An emptied cluster
    is reseeded to the point farthest from its assigned centroid.
    """
    X = np.asarray(profiles, dtype=float)
    _check_inputs(X, num_clusters)
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(X, num_clusters, rng)
    n = X.shape[0]
    labels = np.zeros(n, dtype=int)
    trace: list[float] = []
    prev = np.inf
    for _ in range(max_iter):
        d2 = _sq_dists(X, centroids)
        labels = d2.argmin(axis=1)
        point_d2 = d2[np.arange(n), labels]
        obj = float(point_d2.sum())
        trace.append(obj)
        if prev - obj < tol:
            break
        prev = obj
        centroids = centroids.copy()
        for c in range(num_clusters):
            mask = labels == c
            if mask.any():
                centroids[c] = X[mask].mean(axis=0)
            else:
                far = int(np.argmax(point_d2))
                centroids[c] = X[far]
                point_d2[far] = 0.0  # keep repeated repairs distinct
    memberships = np.zeros((n, num_clusters))
    memberships[np.arange(n), labels] = 1.0
    return ClusterModel(
        "kmeans", num_clusters, centroids, memberships,
        labels.astype(int), None, trace,
    )


def _memberships_from_d2(d2, fuzzifier):
    w = np.empty_like(d2)
    with np.errstate(divide="ignore", over="ignore"):
        np.power(d2, -1.0 / (fuzzifier - 1.0), out=w)
    row_sum = w.sum(axis=1)
    # a zero (or overflowing) distance collapses the row to one-hot on
    # the nearest cluster (lowest id on ties)
    degenerate = (d2 == 0.0).any(axis=1) | ~np.isfinite(row_sum)
    U = np.zeros_like(w)
    ok = ~degenerate
    U[ok] = w[ok] / row_sum[ok, None]
    bad_rows = np.flatnonzero(degenerate)
    if bad_rows.size:
        U[bad_rows, d2[bad_rows].argmin(axis=1)] = 1.0
    return U


def fcm_memberships(profiles, centroids, fuzzifier) -> np.ndarray:
    """Fuzzy membership matrix for fixed centroids.

    mu_uc is proportional to (1/d_uc)^(2/(m-1)), normalized per row.
    """
    X = np.asarray(profiles, dtype=float)
    if fuzzifier <= 1.0:
        raise ConfigError(f"fuzzifier must be > 1, got {fuzzifier}")
    return _memberships_from_d2(_sq_dists(X, np.asarray(centroids, dtype=float)), fuzzifier)


def cmeans(profiles, num_clusters, fuzzifier=2.0, max_iter=100, tol=1e-6,
           seed=0) -> ClusterModel:
    """Fuzzy C-means: alternate membership and centroid updates.

    Memberships follow the inverse-distance rule above; centroids are
    the mu^m-weighted means. The fuzzy objective
    sum_u sum_c mu_uc^m d_uc^2 is recorded per iteration and is
    non-increasing.
    """
    X = np.asarray(profiles, dtype=float)
    _check_inputs(X, num_clusters)
    if fuzzifier <= 1.0:
        raise ConfigError(f"fuzzifier must be > 1, got {fuzzifier}")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(X, num_clusters, rng)
    trace: list[float] = []
    prev = np.inf
    U = None
    for _ in range(max_iter):
        d2 = _sq_dists(X, centroids)
        U = _memberships_from_d2(d2, fuzzifier)
        W = U**fuzzifier
        obj = float((W * d2).sum())
        trace.append(obj)
        if prev - obj < tol:
            break
        prev = obj
        col = W.sum(axis=0)
        new_c = W.T @ X
        supported = col > 1e-300
        new_c[supported] /= col[supported, None]
        new_c[~supported] = centroids[~supported]  # keep unsupported centroids
        centroids = new_c
    hard = U.argmax(axis=1).astype(int)
    return ClusterModel("cmeans", num_clusters, centroids, U, hard, fuzzifier, trace)


def dump_memberships(model: ClusterModel, path):
    """TSV dump: user_id followed by the membership degree per cluster."""
    with open(path, "w", encoding="utf-8") as fh:
        for u in range(model.num_points):
            degrees = "\t".join(repr(float(x)) for x in model.memberships[u])
            fh.write(f"{u}\t{degrees}\n")


_CLUST_MAGIC = b"SRCLUST1"


def save_cluster_model(path, model: ClusterModel, extra_meta=None):
    """Binary cluster checkpoint plus a ``key = value`` meta sidecar."""
    import struct

    cent = np.ascontiguousarray(model.centroids, dtype=np.float64)
    memb = np.ascontiguousarray(model.memberships, dtype=np.float64)
    hard = np.ascontiguousarray(model.hard_assign, dtype=np.int64)
    algo = model.algorithm.encode("utf-8")
    fuzz = float("nan") if model.fuzzifier is None else float(model.fuzzifier)
    with open(path, "wb") as fh:
        fh.write(_CLUST_MAGIC)
        fh.write(struct.pack("<qqq", model.num_clusters, memb.shape[0], cent.shape[1]))
        fh.write(struct.pack("<q", len(algo)))
        fh.write(algo)
        fh.write(struct.pack("<d", fuzz))
        fh.write(cent.tobytes(order="C"))
        fh.write(memb.tobytes(order="C"))
        fh.write(hard.tobytes(order="C"))
    meta = {
        "algorithm": model.algorithm,
        "num_clusters": str(model.num_clusters),
        "iterations": str(len(model.objective_trace)),
    }
    if model.objective_trace:
        meta["final_objective"] = repr(float(model.objective_trace[-1]))
    if extra_meta:
        meta.update({k: str(v) for k, v in extra_meta.items()})
    with open(str(path) + ".meta", "w", encoding="utf-8") as fh:
        for k, v in meta.items():
            fh.write(f"{k} = {v}\n")


def load_cluster_model(path):
    """Read a cluster checkpoint; returns (model, meta dict).

    The objective trace is not serialized; the loaded model carries an
    empty trace.
    """
    import math
    import struct

    with open(path, "rb") as fh:
        magic = fh.read(len(_CLUST_MAGIC))
        if magic != _CLUST_MAGIC:
            raise ConfigError(f"{path} is not a cluster checkpoint")
        c, p, d = struct.unpack("<qqq", fh.read(24))
        (alen,) = struct.unpack("<q", fh.read(8))
        algo = fh.read(alen).decode("utf-8")
        (fuzz,) = struct.unpack("<d", fh.read(8))
        cent = np.frombuffer(fh.read(8 * c * d), dtype=np.float64).reshape(c, d).copy()
        memb = np.frombuffer(fh.read(8 * p * c), dtype=np.float64).reshape(p, c).copy()
        hard = np.frombuffer(fh.read(8 * p), dtype=np.int64).copy()
    meta = {}
    with open(str(path) + ".meta", "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or "=" not in line:
                continue
            k, v = line.split("=", 1)
            meta[k.strip()] = v.strip()
    model = ClusterModel(
        algo, c, cent, memb, hard.astype(int),
        None if math.isnan(fuzz) else fuzz, [],
    )
    return model, meta
