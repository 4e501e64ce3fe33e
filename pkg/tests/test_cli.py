import json
from pathlib import Path

import pytest

from softrec.cli import main
from softrec.config import PRESETS, load_config_file
from softrec.factorizer import TrainingConfig


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """gen-synthetic -> ingest -> cluster(x2) on a tiny corpus."""
    root = tmp_path_factory.mktemp("pipeline")
    assert run(
        "gen-synthetic", "--out-dir", root / "raw", "--seed", 1,
        "--users-per-cluster", 12, "--items-per-cluster", 20,
        "--entries-per-user", 6, "--group-size", 4,
    ) == 0
    assert run(
        "ingest", "--interactions", root / "raw" / "interactions.tsv",
        "--friendships", root / "raw" / "friendships.tsv",
        "--min-items", 2, "--out-dir", root / "corpus",
    ) == 0
    for algo, out in (("kmeans", "ck_hard"), ("cmeans", "ck_soft")):
        assert run(
            "cluster", "--corpus", root / "corpus", "--algorithm", algo,
            "--clusters", 2, "--seed", 0, "--out-dir", root / out,
        ) == 0
    return root


TRAIN_FLAGS = ["--eta", 0.03, "--latent-dim", 8, "--max-iter", 6,
               "--lambda1", 0.1, "--lambda2", 0.1]


class TestPipeline:
    def test_outputs_and_manifests_exist(self, pipeline):
        for rel in ("raw", "corpus", "ck_hard", "ck_soft"):
            assert (pipeline / rel / "manifest.json").is_file()
        manifest = json.loads((pipeline / "corpus" / "manifest.json").read_text())
        assert manifest["command"] == "ingest"
        assert manifest["outputs"] == [
            "interactions.tsv", "friendships.tsv", "users.ids.tsv",
            "items.ids.tsv", "tags.ids.tsv",
        ]
        assert all(len(h) == 64 for h in manifest["inputs"].values())

    def test_id_sidecars_match_reload_order(self, pipeline):
        lines = (pipeline / "corpus" / "users.ids.tsv").read_text().splitlines()
        assert lines[0].split("\t")[0] == "0"
        assert len(lines) == len(set(lines))

    def test_train_evaluate(self, pipeline):
        assert run(
            "train", "--corpus", pipeline / "corpus",
            "--clusters", pipeline / "ck_soft" / "clusters.ckpt",
            "--sim-mode", "soft", *TRAIN_FLAGS,
            "--out-dir", pipeline / "run_soft",
        ) == 0
        assert (pipeline / "run_soft" / "factors.ckpt").is_file()
        trace = (pipeline / "run_soft" / "loss_trace.tsv").read_text().splitlines()
        assert trace[0].startswith("epoch\ttotal")
        assert len(trace) == 7  # header + 6 epochs
        assert run(
            "evaluate", "--corpus", pipeline / "corpus",
            "--checkpoint", pipeline / "run_soft" / "factors.ckpt",
            "--out-dir", pipeline / "eval_soft",
        ) == 0
        report = (pipeline / "eval_soft" / "report.tsv").read_text()
        assert "P@1\t" in report and "R@5\t" in report

    def test_train_max_iter_zero_checkpoints_init(self, pipeline):
        assert run(
            "train", "--corpus", pipeline / "corpus",
            "--clusters", pipeline / "ck_soft" / "clusters.ckpt",
            "--max-iter", 0, "--out-dir", pipeline / "run_zero",
        ) == 0
        assert (pipeline / "run_zero" / "factors.ckpt").is_file()
        assert (pipeline / "run_zero" / "manifest.json").is_file()

    def test_pop_and_ucf_scorers(self, pipeline):
        for scorer in ("pop", "ucf"):
            assert run(
                "evaluate", "--corpus", pipeline / "corpus",
                "--scorer", scorer, "--out-dir", pipeline / f"eval_{scorer}",
            ) == 0

    def test_sweep(self, pipeline):
        assert run(
            "sweep", "--corpus", pipeline / "corpus",
            "--clusters-hard", pipeline / "ck_hard" / "clusters.ckpt",
            "--clusters-soft", pipeline / "ck_soft" / "clusters.ckpt",
            "--parameter", "beta", "--values", "0.01,0.1",
            "--models", "rsbosn,frsbosn,soreg", *TRAIN_FLAGS,
            "--ks", "1",
            "--out-dir", pipeline / "sweep_out",
        ) == 0
        lines = (pipeline / "sweep_out" / "sweep_beta.tsv").read_text().splitlines()
        assert lines[0] == "param_value\tmodel\tmetric\tvalue"
        # 2 values x 3 models x (P@1, R@1)
        assert len(lines) == 1 + 2 * 3 * 2

    def test_dump_tables(self, pipeline):
        assert run(
            "train", "--corpus", pipeline / "corpus",
            "--clusters", pipeline / "ck_hard" / "clusters.ckpt",
            "--sim-mode", "hard", "--eta", 0.03, "--latent-dim", 8,
            "--max-iter", 1, "--dump-tables",
            "--out-dir", pipeline / "run_dump",
        ) == 0
        sim_lines = (pipeline / "run_dump" / "similarity.tsv").read_text().splitlines()
        assert all(len(line.split("\t")) == 3 for line in sim_lines)


class TestErrors:
    def test_stale_checkpoint_refused(self, pipeline, tmp_path, capsys):
        assert run(
            "gen-synthetic", "--out-dir", tmp_path / "raw", "--seed", 9,
            "--users-per-cluster", 12, "--items-per-cluster", 20,
            "--entries-per-user", 6, "--group-size", 4,
        ) == 0
        assert run(
            "ingest", "--interactions", tmp_path / "raw" / "interactions.tsv",
            "--friendships", tmp_path / "raw" / "friendships.tsv",
            "--min-items", 2, "--out-dir", tmp_path / "corpus2",
        ) == 0
        code = run(
            "evaluate", "--corpus", tmp_path / "corpus2",
            "--checkpoint", pipeline / "run_soft" / "factors.ckpt",
            "--out-dir", tmp_path / "eval",
        )
        assert code == 2
        err = capsys.readouterr().err
        assert err.startswith("ERROR\tstale-checkpoint\t")

    def test_stale_cluster_checkpoint_for_train(self, pipeline, tmp_path, capsys):
        run("gen-synthetic", "--out-dir", tmp_path / "raw", "--seed", 8,
            "--users-per-cluster", 12, "--items-per-cluster", 20,
            "--entries-per-user", 6, "--group-size", 4)
        run("ingest", "--interactions", tmp_path / "raw" / "interactions.tsv",
            "--friendships", tmp_path / "raw" / "friendships.tsv",
            "--min-items", 2, "--out-dir", tmp_path / "corpus3")
        code = run(
            "train", "--corpus", tmp_path / "corpus3",
            "--clusters", pipeline / "ck_soft" / "clusters.ckpt",
            "--out-dir", tmp_path / "run",
        )
        assert code == 2
        assert "stale-checkpoint" in capsys.readouterr().err

    def test_unknown_config_key(self, pipeline, tmp_path, capsys):
        bad = tmp_path / "bad.ini"
        bad.write_text("[training]\nbogus = 1\n")
        code = run(
            "train", "--corpus", pipeline / "corpus",
            "--clusters", pipeline / "ck_soft" / "clusters.ckpt",
            "--config", bad, "--out-dir", tmp_path / "x",
        )
        assert code == 2
        err = capsys.readouterr().err
        assert err.startswith("ERROR\tconfig\t")
        assert "bogus" in err

    def test_missing_corpus(self, tmp_path, capsys):
        code = run("cluster", "--corpus", tmp_path / "nope",
                   "--out-dir", tmp_path / "y")
        assert code == 2
        assert capsys.readouterr().err.startswith("ERROR\tconfig\t")

    def test_unknown_preset(self, tmp_path, capsys):
        code = run("gen-synthetic", "--preset", "nope", "--out-dir", tmp_path / "z")
        assert code == 2
        assert "preset" in capsys.readouterr().err


class TestConfigLayering:
    def test_config_file_applies_and_flags_override(self, pipeline, tmp_path):
        ini = tmp_path / "exp.ini"
        ini.write_text(
            "[training]\neta = 0.03\nlatent_dim = 8\nmax_iter = 2\n"
            "lambda1 = 0.1\nlambda2 = 0.1\n"
        )
        assert run(
            "train", "--corpus", pipeline / "corpus",
            "--clusters", pipeline / "ck_soft" / "clusters.ckpt",
            "--config", ini, "--max-iter", 3,
            "--out-dir", tmp_path / "run",
        ) == 0
        manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
        assert manifest["config"]["training.max_iter"] == 3
        assert manifest["config"]["training.eta"] == 0.03

    def test_presets_build_valid_configs(self):
        for name, preset in PRESETS.items():
            kwargs = {
                key: value for (section, key), value in preset.items()
                if section == "training"
            }
            TrainingConfig(**kwargs)  # must not raise

    def test_beta_sweep_preset_grid(self):
        preset = PRESETS["paper-beta-sweep"]
        assert preset[("sweep", "values")] == "0.0001,0.001,0.01,0.1,0.3"

    def test_schema_rejects_unknown_section(self, tmp_path):
        bad = tmp_path / "bad.ini"
        bad.write_text("[nonsense]\nx = 1\n")
        from softrec.errors import ConfigError
        with pytest.raises(ConfigError, match="nonsense"):
            load_config_file(bad)


class TestDeterminism:
    def test_pipeline_rerun_is_byte_identical(self, tmp_path):
        outputs = {}
        for tag in ("a", "b"):
            base = tmp_path / tag
            run("gen-synthetic", "--out-dir", base / "raw", "--seed", 5,
                "--users-per-cluster", 10, "--items-per-cluster", 15,
                "--entries-per-user", 5, "--group-size", 4)
            run("ingest", "--interactions", base / "raw" / "interactions.tsv",
                "--friendships", base / "raw" / "friendships.tsv",
                "--min-items", 2, "--out-dir", base / "corpus")
            run("cluster", "--corpus", base / "corpus", "--algorithm", "cmeans",
                "--clusters", 2, "--out-dir", base / "ck")
            run("train", "--corpus", base / "corpus",
                "--clusters", base / "ck" / "clusters.ckpt", *TRAIN_FLAGS,
                "--out-dir", base / "run")
            run("evaluate", "--corpus", base / "corpus",
                "--checkpoint", base / "run" / "factors.ckpt",
                "--out-dir", base / "eval")
            outputs[tag] = {
                p.relative_to(base): p.read_bytes()
                for p in sorted(base.rglob("*"))
                if p.is_file() and p.name != "manifest.json"
            }
        assert outputs["a"].keys() == outputs["b"].keys()
        for rel, blob in outputs["a"].items():
            assert outputs["b"][rel] == blob, f"{rel} differs between reruns"
