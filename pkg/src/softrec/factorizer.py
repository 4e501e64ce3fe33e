"""Latent factor training for the socially regularized objective.

The loss has five terms: the squared fit over observed entries, two L2
penalties, the user-item correlation term, and the social similarity
term. Note that the two regularizers sum over ordered (u, friend)
pairs, so each undirected friendship contributes twice; the user
gradient below is the exact derivative of that loss, which picks up
both the pair's own weight and its mirrored counterpart.

Training follows the per-entry scheme: for every observed entry, the
full user gradient updates S_u, then the item gradient updates V_i.
The optional "epoch-social" mode applies the social and user-item
contributions once per user per epoch instead, trading fidelity for a
large speedup on dense friend lists.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, fields

import numpy as np

from .affinity import CorrelationTable, SimilarityTable
from .corpus import ScalarView, TagTensor
from .errors import ConfigError, DivergenceError, ShapeError

UPDATE_MODES = ("per-entry", "epoch-social")
_CKPT_MAGIC = b"SRFCKPT1"


@dataclass(frozen=True)
class TrainingConfig:
    eta: float = 0.5
    alpha: float = 0.01
    beta: float = 0.01
    lambda1: float = 0.5
    lambda2: float = 0.5
    latent_dim: int = 80
    max_iter: int = 100
    conv_tol: float = 1e-5
    seed: int = 0
    init_scale: float = 0.01
    scalar_mode: str = "tag-count"
    update_mode: str = "per-entry"

    def __post_init__(self):
        if self.eta <= 0:
            raise ConfigError(f"eta must be > 0, got {self.eta}")
        for name in ("alpha", "beta", "lambda1", "lambda2"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.latent_dim < 1:
            raise ConfigError(f"latent_dim must be >= 1, got {self.latent_dim}")
        if self.max_iter < 0:
            raise ConfigError(f"max_iter must be >= 0, got {self.max_iter}")
        if self.conv_tol <= 0:
            raise ConfigError(f"conv_tol must be > 0, got {self.conv_tol}")
        if self.init_scale <= 0:
            raise ConfigError(f"init_scale must be > 0, got {self.init_scale}")
        if self.scalar_mode not in ScalarView.MODES:
            raise ConfigError(f"scalar_mode must be one of {ScalarView.MODES}")
        if self.update_mode not in UPDATE_MODES:
            raise ConfigError(f"update_mode must be one of {UPDATE_MODES}")


@dataclass
class LatentFactors:
    """Column u of S is the user vector; column i of V the item vector."""

    S: np.ndarray  # l x p
    V: np.ndarray  # l x q

    @property
    def latent_dim(self):
        return self.S.shape[0]

    @property
    def num_users(self):
        return self.S.shape[1]

    @property
    def num_items(self):
        return self.V.shape[1]


@dataclass
class TrainReport:
    loss_trace: list[float]
    term_trace: list[tuple[float, float, float, float, float]]
    epochs_run: int
    converged: bool


class _Problem:
    """Index arrays shared by loss and gradient evaluations."""

    def __init__(self, tensor: TagTensor, sim_table: SimilarityTable,
                 corr_table: CorrelationTable, cfg: TrainingConfig):
        p, q = tensor.num_users, tensor.num_items
        view = ScalarView(tensor, cfg.scalar_mode)
        self.entry_order = sorted(tensor.entries)
        ui: list[list[int]] = [[] for _ in range(p)]
        ut: list[list[float]] = [[] for _ in range(p)]
        iu: list[list[int]] = [[] for _ in range(q)]
        it: list[list[float]] = [[] for _ in range(q)]
        for u, i in self.entry_order:
            t = view.value(u, i)
            ui[u].append(i)
            ut[u].append(t)
            iu[i].append(u)
            it[i].append(t)
        self.user_items = [np.array(x, dtype=int) for x in ui]
        self.user_targets = [np.array(x) for x in ut]
        self.item_users = [np.array(x, dtype=int) for x in iu]
        self.item_targets = [np.array(x) for x in it]

        # the tables carry the friendship structure: both are defined
        # exactly on graph edges
        fr: list[list[int]] = [[] for _ in range(p)]
        sv: list[list[float]] = [[] for _ in range(p)]
        eu, ef, es = [], [], []
        for (u, f) in sorted(sim_table.values):
            s = sim_table.values[(u, f)]
            fr[u].append(f)
            sv[u].append(s)
            fr[f].append(u)
            sv[f].append(s)
            eu.append(u)
            ef.append(f)
            es.append(s)
        self.friends = [np.array(x, dtype=int) for x in fr]
        self.sim_vals = [np.array(x) for x in sv]
        self.edge_u = np.array(eu, dtype=int)
        self.edge_f = np.array(ef, dtype=int)
        self.edge_sim = np.array(es)
        self.corr_row = np.array([corr_table.row_sum(u) for u in range(p)])
        self.users_with_friends = [u for u in range(p) if len(fr[u])]
        self.num_users = p
        self.num_items = q


def _check_shapes(S, V, pb: _Problem):
    if S.ndim != 2 or V.ndim != 2 or S.shape[0] != V.shape[0]:
        raise ShapeError(f"factor shapes disagree: S {S.shape}, V {V.shape}")
    if S.shape[1] != pb.num_users or V.shape[1] != pb.num_items:
        raise ShapeError(
            f"factors sized for ({S.shape[1]}, {V.shape[1]}) users/items, "
            f"corpus has ({pb.num_users}, {pb.num_items})"
        )


def _loss(pb: _Problem, S, V, cfg):
    # overflow here is not an error: a non-finite total is reported as
    # divergence by the caller
    with np.errstate(over="ignore", invalid="ignore"):
        return _loss_terms(pb, S, V, cfg)


def _loss_terms(pb: _Problem, S, V, cfg):
    fit = 0.0
    for u in range(pb.num_users):
        items = pb.user_items[u]
        if items.size:
            diff = pb.user_targets[u] - S[:, u] @ V[:, items]
            fit += float(diff @ diff)
    fit *= 0.5
    l2s = 0.5 * cfg.lambda1 * float((S * S).sum())
    l2v = 0.5 * cfg.lambda2 * float((V * V).sum())
    useritem = social = 0.0
    if pb.edge_u.size:
        D = S[:, pb.edge_u] - S[:, pb.edge_f]
        d2 = (D * D).sum(axis=0)
        # ordered-pair sums: each edge carries both directions' weights
        useritem = 0.5 * cfg.alpha * float(
            ((pb.corr_row[pb.edge_u] + pb.corr_row[pb.edge_f]) * d2).sum()
        )
        social = cfg.beta * float((pb.edge_sim * d2).sum())
    total = fit + l2s + l2v + useritem + social
    return total, (fit, l2s, l2v, useritem, social)


def _grad_user(pb: _Problem, S, V, u, cfg, part="all"):
    g = np.zeros(S.shape[0])
    if part in ("all", "fit"):
        g += cfg.lambda1 * S[:, u]
        items = pb.user_items[u]
        if items.size:
            Vi = V[:, items]
            err = S[:, u] @ Vi - pb.user_targets[u]
            g += Vi @ err
    if part in ("all", "social"):
        fr = pb.friends[u]
        if fr.size and (cfg.alpha or cfg.beta):
            w = cfg.alpha * (pb.corr_row[fr] + pb.corr_row[u]) \
                + 2.0 * cfg.beta * pb.sim_vals[u]
            g += w.sum() * S[:, u] - S[:, fr] @ w
    return g


def _grad_item(pb: _Problem, S, V, i, cfg):
    g = cfg.lambda2 * V[:, i]
    users = pb.item_users[i]
    if users.size:
        Su = S[:, users]
        err = V[:, i] @ Su - pb.item_targets[i]
        g += Su @ err
    return g


_EMPTY_SIM = SimilarityTable("hard", {}, None, "cotag")
_EMPTY_CORR = CorrelationTable({}, {})


def loss(S, V, tensor, sim_table, corr_table, cfg):
    """Total objective and its (fit, l2s, l2v, useritem, social) terms.

    The total is the exact sum of the five reported terms.
    """
    pb = _Problem(tensor, sim_table, corr_table, cfg)
    _check_shapes(S, V, pb)
    return _loss(pb, S, V, cfg)


def grad_user(u, S, V, tensor, sim_table, corr_table, cfg):
    """Exact derivative of the loss with respect to S_u."""
    pb = _Problem(tensor, sim_table, corr_table, cfg)
    _check_shapes(S, V, pb)
    return _grad_user(pb, S, V, u, cfg)


def grad_item(i, S, V, tensor, cfg):
    """Exact derivative of the loss with respect to V_i.

    The social terms do not involve V, so only the fit and L2 parts
    appear; no table arguments are needed.
    """
    pb = _Problem(tensor, _EMPTY_SIM, _EMPTY_CORR, cfg)
    _check_shapes(S, V, pb)
    return _grad_item(pb, S, V, i, cfg)


def train(tensor, sim_table, corr_table, cfg: TrainingConfig):
    """SGD over observed entries; returns factors and a training report.

    S and V start from uniform values in [-init_scale, init_scale].
    Each epoch walks the observed entries in a fixed (u, i) order,
    updating S_u from the user gradient and then V_i from the item
    gradient. Stops early when the relative loss change falls below
    conv_tol. Deterministic given the seed.
    """
    pb = _Problem(tensor, sim_table, corr_table, cfg)
    rng = np.random.default_rng(cfg.seed)
    scale = cfg.init_scale
    S = rng.uniform(-scale, scale, size=(cfg.latent_dim, tensor.num_users))
    V = rng.uniform(-scale, scale, size=(cfg.latent_dim, tensor.num_items))
    trace: list[float] = []
    terms: list[tuple] = []
    converged = False
    for epoch in range(cfg.max_iter):
        with np.errstate(over="ignore", invalid="ignore"):
            _run_epoch(pb, S, V, cfg)
        total, parts = _loss(pb, S, V, cfg)
        if not np.isfinite(total):
            raise DivergenceError(
                f"training loss is not finite at epoch {epoch}; try a smaller eta"
            )
        trace.append(total)
        terms.append(parts)
        if epoch > 0 and abs(trace[-1] - trace[-2]) / max(trace[-2], 1.0) < cfg.conv_tol:
            converged = True
            break
    return LatentFactors(S, V), TrainReport(trace, terms, len(trace), converged)


def _run_epoch(pb, S, V, cfg):
    if cfg.update_mode == "per-entry":
        for u, i in pb.entry_order:
            S[:, u] -= cfg.eta * _grad_user(pb, S, V, u, cfg)
            V[:, i] -= cfg.eta * _grad_item(pb, S, V, i, cfg)
    else:
        for u, i in pb.entry_order:
            S[:, u] -= cfg.eta * _grad_user(pb, S, V, u, cfg, part="fit")
            V[:, i] -= cfg.eta * _grad_item(pb, S, V, i, cfg)
        for u in pb.users_with_friends:
            S[:, u] -= cfg.eta * _grad_user(pb, S, V, u, cfg, part="social")


def predict(factors: LatentFactors, u: int, i: int) -> float:
    return float(factors.S[:, u] @ factors.V[:, i])


def predict_user(factors: LatentFactors, u: int) -> np.ndarray:
    """Scores for every item for one user: S_u^T V."""
    return factors.S[:, u] @ factors.V


def config_to_meta(cfg: TrainingConfig) -> dict[str, str]:
    return {f.name: repr(getattr(cfg, f.name)) if isinstance(getattr(cfg, f.name), float)
            else str(getattr(cfg, f.name)) for f in fields(cfg)}


def config_from_meta(meta: dict[str, str]) -> TrainingConfig:
    kwargs = {}
    for f in fields(TrainingConfig):
        if f.name not in meta:
            continue
        raw = meta[f.name]
        if f.type == "float":
            kwargs[f.name] = float(raw)
        elif f.type == "int":
            kwargs[f.name] = int(raw)
        else:
            kwargs[f.name] = raw
    return TrainingConfig(**kwargs)


def save_checkpoint(path, factors: LatentFactors, cfg: TrainingConfig,
                    extra_meta: dict | None = None):
    """Binary factor checkpoint plus a text metadata sidecar.

    Layout: magic, little-endian int64 (p, q, l, seed), the scalar mode
    string, then S and V as row-major float64. The sidecar at
    ``<path>.meta`` holds the full config and any extra entries as
    ``key = value`` lines. Round-trips bit-exactly.
    """
    S = np.ascontiguousarray(factors.S, dtype=np.float64)
    V = np.ascontiguousarray(factors.V, dtype=np.float64)
    mode = cfg.scalar_mode.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<qqqq", S.shape[1], V.shape[1], S.shape[0], cfg.seed))
        fh.write(struct.pack("<q", len(mode)))
        fh.write(mode)
        fh.write(S.tobytes(order="C"))
        fh.write(V.tobytes(order="C"))
    meta = config_to_meta(cfg)
    if extra_meta:
        meta.update({k: str(v) for k, v in extra_meta.items()})
    with open(str(path) + ".meta", "w", encoding="utf-8") as fh:
        for k, v in meta.items():
            fh.write(f"{k} = {v}\n")


def load_checkpoint(path):
    """Read a factor checkpoint; returns (factors, meta dict)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_CKPT_MAGIC))
        if magic != _CKPT_MAGIC:
            raise ShapeError(f"{path} is not a factor checkpoint")
        p, q, l, _seed = struct.unpack("<qqqq", fh.read(32))
        (mode_len,) = struct.unpack("<q", fh.read(8))
        fh.read(mode_len)
        S = np.frombuffer(fh.read(8 * l * p), dtype=np.float64).reshape(l, p).copy()
        V = np.frombuffer(fh.read(8 * l * q), dtype=np.float64).reshape(l, q).copy()
    meta = {}
    with open(str(path) + ".meta", "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or "=" not in line:
                continue
            k, v = line.split("=", 1)
            meta[k.strip()] = v.strip()
    return LatentFactors(S, V), meta


def write_loss_trace(path, report: TrainReport):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch\ttotal\tfit\tl2s\tl2v\tuseritem\tsocial\n")
        for e, (total, parts) in enumerate(zip(report.loss_trace, report.term_trace)):
            cols = "\t".join(repr(float(x)) for x in (total, *parts))
            fh.write(f"{e}\t{cols}\n")
