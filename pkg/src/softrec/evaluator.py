"""Top-k recommendation and precision/recall evaluation.

R(u) is the top-k scored candidate items (training items excluded,
ties broken by ascending item id); T(u) the user's held-out items.
P@k = |R & T| / |R| and R@k = |R & T| / |T|, macro-averaged over users
with a non-empty holdout.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .corpus import DataSplit, TagTensor
from .errors import ConfigError, EvaluationError

SWEEP_PARAMETERS = ("alpha", "beta", "latent_dim")


@dataclass
class EvalReport:
    metrics: dict[str, float]
    per_user: list[dict]
    evaluated_users: int
    excluded_users: int


def top_k(u: int, scorer, k: int, train_tensor: TagTensor) -> list[int]:
    """The k highest-scoring candidates for u, never re-recommending
    training items; ties broken by ascending item id."""
    if k <= 0:
        return []
    owned = set(train_tensor.items_of(u))
    candidates = np.array(
        [i for i in range(train_tensor.num_items) if i not in owned], dtype=int
    )
    if candidates.size == 0:
        return []
    scores = np.asarray(scorer.score(u, candidates), dtype=float)
    order = np.lexsort((candidates, -scores))
    return [int(candidates[j]) for j in order[:k]]


def evaluate(scorer, data_split: DataSplit, ks=(1, 3, 5)) -> EvalReport:
    """Mean P@k and R@k over test users for every k in ks."""
    ks = sorted(set(int(k) for k in ks))
    if not ks or ks[0] < 1:
        raise ConfigError(f"ks must be positive cutoffs, got {ks}")
    if data_split.num_test_entries == 0:
        raise EvaluationError("the split holds no test entries")
    kmax = ks[-1]
    per_user = []
    sums = {k: [0.0, 0.0] for k in ks}
    evaluated = excluded = 0
    for u in sorted(data_split.test):
        held = data_split.test[u]
        if not held:
            excluded += 1
            continue
        evaluated += 1
        ranked = top_k(u, scorer, kmax, data_split.train)
        test_items = set(held)
        for k in ks:
            rec = ranked[:k]
            hits = sum(1 for i in rec if i in test_items)
            precision = hits / len(rec) if rec else 0.0
            recall = hits / len(test_items)
            sums[k][0] += precision
            sums[k][1] += recall
            per_user.append({
                "user": u, "k": k, "hits": hits,
                "precision": precision, "recall": recall,
                "test_size": len(test_items),
            })
    if evaluated == 0:
        raise EvaluationError("every test user had an empty holdout")
    metrics = {}
    for k in ks:
        metrics[f"P@{k}"] = sums[k][0] / evaluated
    for k in ks:
        metrics[f"R@{k}"] = sums[k][1] / evaluated
    return EvalReport(metrics, per_user, evaluated, excluded)


def sweep(parameter: str, values, base_cfg, train_tensor, data_split,
          model_tables, ks=(1,), model_overrides=None):
    """Retrain and evaluate across a parameter grid.

    ``model_tables`` maps a model name to its (similarity, correlation)
    table pair; every (value, model) cell is a full retrain with the
    same seed. ``model_overrides`` optionally pins config fields per
    model (e.g. alpha = 0 for a SoReg row) and must not touch the swept
    parameter. Returns rows of (param_value, model, metric, value).
    """
    from .baselines import FactorScorer  # local import avoids a cycle
    from .factorizer import train

    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(
            f"unknown sweep parameter {parameter!r}; expected one of {SWEEP_PARAMETERS}"
        )
    model_overrides = model_overrides or {}
    for name, fields in model_overrides.items():
        if parameter in fields:
            raise ConfigError(f"model {name!r} pins {parameter}, cannot sweep it")
    rows = []
    for value in values:
        cast = int(value) if parameter == "latent_dim" else float(value)
        for model_name, (sim_table, corr_table) in model_tables.items():
            cfg = replace(base_cfg, **{parameter: cast},
                          **model_overrides.get(model_name, {}))
            factors, _report = train(train_tensor, sim_table, corr_table, cfg)
            report = evaluate(FactorScorer(factors), data_split, ks)
            for metric, metric_value in report.metrics.items():
                rows.append((cast, model_name, metric, metric_value))
    return rows


def write_report(report: EvalReport, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# evaluated_users\t{report.evaluated_users}\n")
        fh.write(f"# excluded_users\t{report.excluded_users}\n")
        for metric, value in report.metrics.items():
            fh.write(f"{metric}\t{value!r}\n")


def write_per_user(report: EvalReport, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("user\tk\thits\tprecision\trecall\ttest_size\n")
        for row in report.per_user:
            fh.write(
                f"{row['user']}\t{row['k']}\t{row['hits']}\t"
                f"{row['precision']!r}\t{row['recall']!r}\t{row['test_size']}\n"
            )


def write_sweep(rows, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("param_value\tmodel\tmetric\tvalue\n")
        for value, model, metric, metric_value in rows:
            fh.write(f"{value!r}\t{model}\t{metric}\t{metric_value!r}\n")
