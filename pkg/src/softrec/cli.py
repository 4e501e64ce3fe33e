"""Command-line front end: ingest, cluster, train, evaluate, sweep,
gen-synthetic.

Every command writes a manifest.json (resolved config, input checksums,
outputs, wall time) next to its outputs; all output files other than
the manifest are byte-deterministic for fixed inputs and seeds.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import affinity, baselines, clustering, corpus, evaluator, factorizer, synthetic
from .config import (
    Options,
    Stopwatch,
    corpus_checksum,
    file_sha256,
    parse_bool,
    parse_floats,
    parse_ks,
    write_manifest,
)
from .errors import ConfigError, SoftrecError, StaleCheckpointError


def _require_file(path, what):
    if path is None:
        raise ConfigError(f"missing required {what} path")
    if not Path(path).is_file():
        raise ConfigError(f"{what} file not found: {path}")
    return Path(path)


def _out_dir(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_corpus_dir(corpus_dir):
    """Load an ingested corpus directory; returns tensor, graph, maps,
    and the corpus checksum used for checkpoint staleness checks."""
    inter = _require_file(Path(corpus_dir) / "interactions.tsv", "interactions")
    friends = _require_file(Path(corpus_dir) / "friendships.tsv", "friendships")
    tensor, users, items = corpus.load_interactions(inter)
    graph = corpus.load_friendships(friends, users)
    return tensor, graph, users, items, corpus_checksum(inter, friends), (inter, friends)


def _split_options(opts):
    test_fraction = opts.get("split", "test_fraction", 0.2, float)
    split_seed = opts.get("split", "split_seed", 13, int, arg="split_seed")
    return test_fraction, split_seed


def _training_config(opts, seed_default=0):
    return factorizer.TrainingConfig(
        eta=opts.get("training", "eta", 0.5, float),
        alpha=opts.get("training", "alpha", 0.01, float),
        beta=opts.get("training", "beta", 0.01, float),
        lambda1=opts.get("training", "lambda1", 0.5, float),
        lambda2=opts.get("training", "lambda2", 0.5, float),
        latent_dim=opts.get("training", "latent_dim", 80, int),
        max_iter=opts.get("training", "max_iter", 100, int),
        conv_tol=opts.get("training", "conv_tol", 1e-5, float),
        seed=opts.get("training", "seed", seed_default, int),
        init_scale=opts.get("training", "init_scale", 0.01, float),
        scalar_mode=opts.get("training", "scalar_mode", "tag-count"),
        update_mode=opts.get("training", "update_mode", "per-entry"),
    )


def _model_name(sim_mode, alpha):
    if sim_mode == "soft":
        return "frsbosn"
    return "rsbosn" if alpha > 0 else "soreg"


def cmd_gen_synthetic(args):
    watch = Stopwatch()
    opts = Options(args)
    cfg = synthetic.SyntheticConfig(
        num_clusters=opts.get("synthetic", "num_clusters", 2, int),
        users_per_cluster=opts.get("synthetic", "users_per_cluster", 100, int),
        overlap_fraction=opts.get("synthetic", "overlap_fraction", 0.2, float),
        items_per_cluster=opts.get("synthetic", "items_per_cluster", 150, int),
        entries_per_user=opts.get("synthetic", "entries_per_user", 15, int),
        max_tags_per_entry=opts.get("synthetic", "max_tags_per_entry", 3, int),
        tags_per_cluster=opts.get("synthetic", "tags_per_cluster", 25, int),
        item_signature_size=opts.get("synthetic", "item_signature_size", 4, int),
        group_size=opts.get("synthetic", "group_size", 5, int),
        seed=args.seed if args.seed is not None else 0,
    )
    opts.resolved["synthetic.seed"] = cfg.seed
    out = _out_dir(args)
    records, groups = synthetic.generate(cfg)
    inter, friends = synthetic.write_corpus(records, groups, out)
    write_manifest(
        out, "gen-synthetic", opts.resolved, {},
        [inter.name, friends.name], watch.elapsed(),
        extra={"num_records": len(records), "num_groups": len(groups)},
    )
    print(f"wrote {len(records)} interaction records, {len(groups)} groups -> {out}")
    return 0


def cmd_ingest(args):
    watch = Stopwatch()
    opts = Options(args)
    min_items = opts.get("corpus", "min_items", 1, int)
    require_friends = opts.get("corpus", "require_friends", True, parse_bool)
    inter_path = _require_file(args.interactions, "interactions")
    friends_path = _require_file(args.friendships, "friendships")

    tensor, users, items = corpus.load_interactions(inter_path)
    graph = corpus.load_friendships(friends_path, users)
    pruned = corpus.prune(tensor, graph, min_items, require_friends)

    out = _out_dir(args)
    vocab = pruned.tensor.tag_vocab
    with open(out / "interactions.tsv", "w", encoding="utf-8") as fh:
        for (u, i) in sorted(pruned.tensor.entries):
            ukey = users.keys[pruned.kept_users[u]]
            ikey = items.keys[pruned.kept_items[i]]
            for t in sorted(pruned.tensor.entries[(u, i)]):
                line = f"{ukey}\t{ikey}\t{vocab[t]}\n"
                fh.write(line * pruned.tensor.entries[(u, i)][t])
    with open(out / "friendships.tsv", "w", encoding="utf-8") as fh:
        for u, f in pruned.graph.edges():
            fh.write(
                f"{users.keys[pruned.kept_users[u]]}\t"
                f"{users.keys[pruned.kept_users[f]]}\n"
            )

    # reload what was emitted so the id-map sidecars match exactly what
    # downstream commands will see
    new_tensor, new_users, new_items = corpus.load_interactions(out / "interactions.tsv")
    new_users.write(out / "users.ids.tsv")
    new_items.write(out / "items.ids.tsv")
    corpus.IdMap.from_keys(new_tensor.tag_vocab).write(out / "tags.ids.tsv")

    write_manifest(
        out, "ingest", opts.resolved,
        {str(inter_path): file_sha256(inter_path),
         str(friends_path): file_sha256(friends_path)},
        ["interactions.tsv", "friendships.tsv", "users.ids.tsv",
         "items.ids.tsv", "tags.ids.tsv"],
        watch.elapsed(),
        extra={
            "users": new_tensor.num_users,
            "items": new_tensor.num_items,
            "entries": new_tensor.num_entries,
            "corpus_checksum": corpus_checksum(
                out / "interactions.tsv", out / "friendships.tsv"
            ),
        },
    )
    print(
        f"ingested corpus: {new_tensor.num_users} users, "
        f"{new_tensor.num_items} items, {new_tensor.num_entries} entries -> {out}"
    )
    return 0


def cmd_cluster(args):
    watch = Stopwatch()
    opts = Options(args)
    tensor, _graph, _users, _items, checksum, inputs = _load_corpus_dir(args.corpus)
    test_fraction, split_seed = _split_options(opts)
    algorithm = opts.get("clustering", "algorithm", "cmeans")
    num_clusters = opts.get("clustering", "clusters", 10, int, arg="clusters")
    fuzzifier = opts.get("clustering", "fuzzifier", 2.0, float)
    max_iter = opts.get("clustering", "cluster_max_iter", 100, int, arg="max_iter")
    tol = opts.get("clustering", "cluster_tol", 1e-6, float, arg="tol")
    seed = opts.get("clustering", "cluster_seed", 0, int, arg="seed")

    data_split = corpus.split(tensor, test_fraction, split_seed)
    profiles = corpus.user_profile_matrix(data_split.train, l2_normalize=True)
    if algorithm == "kmeans":
        model = clustering.kmeans(profiles, num_clusters, max_iter, tol, seed)
    elif algorithm == "cmeans":
        model = clustering.cmeans(profiles, num_clusters, fuzzifier, max_iter, tol, seed)
    else:
        raise ConfigError(f"algorithm must be kmeans or cmeans, got {algorithm!r}")

    out = _out_dir(args)
    ckpt = out / "clusters.ckpt"
    clustering.save_cluster_model(ckpt, model, extra_meta={
        "corpus_checksum": checksum,
        "test_fraction": repr(test_fraction),
        "split_seed": split_seed,
        "seed": seed,
    })
    clustering.dump_memberships(model, out / "memberships.tsv")
    write_manifest(
        out, "cluster", opts.resolved,
        {str(p): file_sha256(p) for p in inputs},
        ["clusters.ckpt", "clusters.ckpt.meta", "memberships.tsv"],
        watch.elapsed(),
        extra={"iterations": len(model.objective_trace)},
    )
    print(
        f"{algorithm} clustered {model.num_points} users into {num_clusters} "
        f"clusters in {len(model.objective_trace)} iterations -> {ckpt}"
    )
    return 0


def _check_cluster_meta(meta, checksum, test_fraction, split_seed, path):
    if meta.get("corpus_checksum") != checksum:
        raise StaleCheckpointError(
            f"cluster checkpoint {path} was built from a different corpus "
            f"(checksum mismatch); re-run the cluster step"
        )
    if (float(meta.get("test_fraction", "nan")) != test_fraction
            or int(meta.get("split_seed", "-1")) != split_seed):
        raise StaleCheckpointError(
            f"cluster checkpoint {path} used a different train/test split "
            f"(test_fraction/split_seed mismatch)"
        )


def cmd_train(args):
    watch = Stopwatch()
    opts = Options(args)
    tensor, graph, _users, _items, checksum, inputs = _load_corpus_dir(args.corpus)
    test_fraction, split_seed = _split_options(opts)
    sim_mode = opts.get("similarity", "sim_mode", "soft", arg="sim_mode")
    lambda_mix = opts.get("similarity", "lambda_mix", 0.8, float)
    sim_norm = opts.get("similarity", "sim_norm", "cotag")
    cfg = _training_config(opts)

    ckpt_path = _require_file(args.clusters, "cluster checkpoint")
    model, meta = clustering.load_cluster_model(ckpt_path)
    _check_cluster_meta(meta, checksum, test_fraction, split_seed, ckpt_path)

    data_split = corpus.split(tensor, test_fraction, split_seed)
    sim_table = affinity.build_similarity_table(
        graph, data_split.train, model, sim_mode, lambda_mix, sim_norm
    )
    corr_table = affinity.build_correlation_table(graph, data_split.train)
    factors, report = factorizer.train(data_split.train, sim_table, corr_table, cfg)

    out = _out_dir(args)
    factors_path = out / "factors.ckpt"
    factorizer.save_checkpoint(factors_path, factors, cfg, extra_meta={
        "model": _model_name(sim_mode, cfg.alpha),
        "sim_mode": sim_mode,
        "lambda_mix": repr(lambda_mix),
        "sim_norm": sim_norm,
        "corpus_checksum": checksum,
        "test_fraction": repr(test_fraction),
        "split_seed": split_seed,
        "epochs_run": report.epochs_run,
        "converged": report.converged,
    })
    factorizer.write_loss_trace(out / "loss_trace.tsv", report)
    outputs = ["factors.ckpt", "factors.ckpt.meta", "loss_trace.tsv"]
    if args.dump_tables:
        affinity.dump_similarity_table(sim_table, out / "similarity.tsv")
        affinity.dump_correlation_table(corr_table, out / "correlation.tsv")
        outputs += ["similarity.tsv", "correlation.tsv"]
    write_manifest(
        out, "train", opts.resolved,
        {str(p): file_sha256(p) for p in (*inputs, ckpt_path)},
        outputs, watch.elapsed(),
        extra={"epochs_run": report.epochs_run, "converged": report.converged,
               "final_loss": report.loss_trace[-1] if report.loss_trace else None},
    )
    last = f"{report.loss_trace[-1]:.6g}" if report.loss_trace else "n/a"
    print(
        f"trained {_model_name(sim_mode, cfg.alpha)} for {report.epochs_run} epochs "
        f"(converged={report.converged}, final loss {last}) -> {factors_path}"
    )
    return 0


def cmd_evaluate(args):
    watch = Stopwatch()
    opts = Options(args)
    tensor, _graph, _users, _items, checksum, inputs = _load_corpus_dir(args.corpus)
    ks = opts.get("evaluation", "ks", (1, 3, 5), parse_ks)
    scorer_name = opts.get("evaluation", "scorer", None, arg="scorer")
    input_hashes = {str(p): file_sha256(p) for p in inputs}

    if scorer_name in ("pop", "ucf"):
        test_fraction, split_seed = _split_options(opts)
        data_split = corpus.split(tensor, test_fraction, split_seed)
        if scorer_name == "pop":
            scorer = baselines.PopScorer(data_split.train)
        else:
            neighbors = opts.get("evaluation", "neighbors", 20, int)
            scorer = baselines.UCFScorer(data_split.train, neighbors)
        model_label = scorer_name
    else:
        ckpt_path = _require_file(args.checkpoint, "factor checkpoint")
        factors, meta = factorizer.load_checkpoint(ckpt_path)
        if meta.get("corpus_checksum") != checksum:
            raise StaleCheckpointError(
                f"checkpoint {ckpt_path} was trained on a different corpus "
                f"(checksum mismatch); re-run ingest/train or point --corpus "
                f"at the right directory"
            )
        test_fraction = float(meta["test_fraction"])
        split_seed = int(meta["split_seed"])
        opts.resolved["split.test_fraction"] = test_fraction
        opts.resolved["split.split_seed"] = split_seed
        data_split = corpus.split(tensor, test_fraction, split_seed)
        scorer = baselines.FactorScorer(factors)
        model_label = meta.get("model", "factors")
        if scorer_name and scorer_name != model_label:
            print(
                f"note: requested scorer {scorer_name!r} but checkpoint "
                f"records {model_label!r}",
                file=sys.stderr,
            )
        input_hashes[str(ckpt_path)] = file_sha256(ckpt_path)

    report = evaluator.evaluate(scorer, data_split, ks)
    out = _out_dir(args)
    evaluator.write_report(report, out / "report.tsv")
    evaluator.write_per_user(report, out / "per_user.tsv")
    write_manifest(
        out, "evaluate", opts.resolved, input_hashes,
        ["report.tsv", "per_user.tsv"], watch.elapsed(),
        extra={"model": model_label, "evaluated_users": report.evaluated_users,
               "excluded_users": report.excluded_users},
    )
    summary = ", ".join(f"{m}={v:.4f}" for m, v in report.metrics.items())
    print(f"{model_label}: {summary} ({report.evaluated_users} users) -> {out}")
    return 0


def cmd_sweep(args):
    watch = Stopwatch()
    opts = Options(args)
    tensor, graph, _users, _items, checksum, inputs = _load_corpus_dir(args.corpus)
    test_fraction, split_seed = _split_options(opts)
    parameter = opts.get("sweep", "parameter", None, arg="parameter")
    if not parameter:
        raise ConfigError("missing sweep parameter (--parameter or [sweep] parameter)")
    values = opts.get("sweep", "values", None, parse_floats, arg="values")
    if not values:
        raise ConfigError("missing sweep values (--values or [sweep] values)")
    models = opts.get("sweep", "models", "rsbosn,frsbosn", arg="models")
    model_names = [m.strip() for m in str(models).replace(",", " ").split()]
    lambda_mix = opts.get("similarity", "lambda_mix", 0.8, float)
    sim_norm = opts.get("similarity", "sim_norm", "cotag")
    ks = opts.get("evaluation", "ks", (1, 3, 5), parse_ks)
    cfg = _training_config(opts)

    data_split = corpus.split(tensor, test_fraction, split_seed)
    corr_table = affinity.build_correlation_table(graph, data_split.train)
    input_hashes = {str(p): file_sha256(p) for p in inputs}

    def cluster_model_for(mode):
        path = args.clusters_soft if mode == "soft" else args.clusters_hard
        what = f"{mode}-similarity cluster checkpoint"
        path = _require_file(path, what)
        model, meta = clustering.load_cluster_model(path)
        _check_cluster_meta(meta, checksum, test_fraction, split_seed, path)
        input_hashes[str(path)] = file_sha256(path)
        return model

    model_tables = {}
    overrides = {}
    for name in model_names:
        if name == "rsbosn":
            model = cluster_model_for("hard")
            table = affinity.build_similarity_table(
                graph, data_split.train, model, "hard", lambda_mix, sim_norm)
            model_tables[name] = (table, corr_table)
        elif name == "frsbosn":
            model = cluster_model_for("soft")
            table = affinity.build_similarity_table(
                graph, data_split.train, model, "soft", lambda_mix, sim_norm)
            model_tables[name] = (table, corr_table)
        elif name == "soreg":
            if parameter == "alpha":
                raise ConfigError("cannot sweep alpha for soreg (alpha is fixed at 0)")
            model = cluster_model_for("hard")
            table = affinity.build_similarity_table(
                graph, data_split.train, model, "hard", lambda_mix, sim_norm)
            model_tables[name] = (table, affinity.CorrelationTable({}, {}))
            overrides[name] = {"alpha": 0.0}
        else:
            raise ConfigError(
                f"unknown sweep model {name!r}; expected rsbosn, frsbosn, or soreg"
            )

    rows = evaluator.sweep(
        parameter, values, cfg, data_split.train, data_split, model_tables, ks,
        model_overrides=overrides,
    )
    out = _out_dir(args)
    table_path = out / f"sweep_{parameter}.tsv"
    evaluator.write_sweep(rows, table_path)
    write_manifest(
        out, "sweep", opts.resolved, input_hashes, [table_path.name],
        watch.elapsed(), extra={"parameter": parameter, "models": model_names},
    )
    print(f"swept {parameter} over {len(values)} values x {model_names} -> {table_path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="softrec",
        description="Socially regularized tag recommender: pipeline commands",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--preset", help="built-in experiment preset name")
        p.add_argument("--out-dir", required=True, help="output directory")
        if seed:
            p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("gen-synthetic", help="generate a clustered synthetic corpus")
    common(p)
    for name, typ in [
        ("--num-clusters", int), ("--users-per-cluster", int),
        ("--overlap-fraction", float), ("--items-per-cluster", int),
        ("--entries-per-user", int), ("--max-tags-per-entry", int),
        ("--tags-per-cluster", int), ("--item-signature-size", int),
        ("--group-size", int),
    ]:
        p.add_argument(name, type=typ, default=None)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("ingest", help="load, validate, and prune raw corpus files")
    common(p, seed=False)
    p.add_argument("--interactions", required=True)
    p.add_argument("--friendships", required=True)
    p.add_argument("--min-items", type=int, default=None)
    p.add_argument("--require-friends", dest="require_friends", default=None,
                   action="store_true")
    p.add_argument("--no-require-friends", dest="require_friends",
                   action="store_false")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("cluster", help="cluster users on train-split tag profiles")
    common(p)
    p.add_argument("--corpus", required=True, help="ingested corpus directory")
    p.add_argument("--algorithm", choices=["kmeans", "cmeans"], default=None)
    p.add_argument("--clusters", type=int, default=None)
    p.add_argument("--fuzzifier", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--test-fraction", type=float, default=None)
    p.add_argument("--split-seed", type=int, default=None)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("train", help="train latent factors on the train split")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--clusters", required=True, help="cluster checkpoint path")
    p.add_argument("--sim-mode", choices=["hard", "soft"], default=None)
    p.add_argument("--lambda-mix", type=float, default=None)
    p.add_argument("--sim-norm", choices=["cotag", "catalog"], default=None)
    for name, typ in [
        ("--eta", float), ("--alpha", float), ("--beta", float),
        ("--lambda1", float), ("--lambda2", float), ("--latent-dim", int),
        ("--max-iter", int), ("--conv-tol", float), ("--init-scale", float),
    ]:
        p.add_argument(name, type=typ, default=None)
    p.add_argument("--scalar-mode", choices=["binary", "tag-count"], default=None)
    p.add_argument("--update-mode", choices=["per-entry", "epoch-social"], default=None)
    p.add_argument("--test-fraction", type=float, default=None)
    p.add_argument("--split-seed", type=int, default=None)
    p.add_argument("--dump-tables", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="top-k precision/recall on the test split")
    common(p, seed=False)
    p.add_argument("--corpus", required=True)
    p.add_argument("--checkpoint", help="factor checkpoint (for factor scorers)")
    p.add_argument("--scorer", choices=["pop", "ucf", "soreg", "rsbosn", "frsbosn"],
                   default=None)
    p.add_argument("--ks", default=None)
    p.add_argument("--neighbors", type=int, default=None)
    p.add_argument("--test-fraction", type=float, default=None)
    p.add_argument("--split-seed", type=int, default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="retrain/evaluate across a parameter grid")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--clusters-hard", help="kmeans checkpoint (rsbosn/soreg)")
    p.add_argument("--clusters-soft", help="cmeans checkpoint (frsbosn)")
    p.add_argument("--parameter", choices=list(evaluator.SWEEP_PARAMETERS), default=None)
    p.add_argument("--values", default=None)
    p.add_argument("--models", default=None)
    p.add_argument("--lambda-mix", type=float, default=None)
    p.add_argument("--sim-norm", choices=["cotag", "catalog"], default=None)
    p.add_argument("--ks", default=None)
    for name, typ in [
        ("--eta", float), ("--alpha", float), ("--beta", float),
        ("--lambda1", float), ("--lambda2", float), ("--latent-dim", int),
        ("--max-iter", int), ("--conv-tol", float), ("--init-scale", float),
    ]:
        p.add_argument(name, type=typ, default=None)
    p.add_argument("--scalar-mode", choices=["binary", "tag-count"], default=None)
    p.add_argument("--update-mode", choices=["per-entry", "epoch-social"], default=None)
    p.add_argument("--test-fraction", type=float, default=None)
    p.add_argument("--split-seed", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SoftrecError as exc:
        print(f"ERROR\t{exc.category}\t{exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
