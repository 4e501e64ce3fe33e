import numpy as np
import pytest

from softrec.baselines import FactorScorer
from softrec.corpus import DataSplit, split
from softrec.errors import ConfigError, EvaluationError
from softrec.evaluator import evaluate, sweep, top_k, write_report, write_sweep
from softrec.factorizer import train

from conftest import Instance, make_tensor


class FixedScorer:
    """Scores straight out of a lookup table; unknown items get 0."""

    def __init__(self, table):
        self.table = table

    def score(self, u, item_ids):
        return np.array([self.table.get((u, int(i)), 0.0) for i in item_ids])


class TestTopK:
    def test_highest_score_wins(self):
        tensor = make_tensor({(0, 5): {0: 1}}, num_items=6)
        scorer = FixedScorer({(0, 0): 5.0, (0, 1): 3.0})
        assert top_k(0, scorer, 1, tensor) == [0]

    def test_ties_break_on_ascending_id(self):
        tensor = make_tensor({(0, 5): {0: 1}}, num_items=6)
        scorer = FixedScorer({(0, 2): 1.0, (0, 1): 1.0, (0, 4): 1.0})
        assert top_k(0, scorer, 3, tensor) == [1, 2, 4]

    def test_never_recommends_training_items(self):
        tensor = make_tensor({(0, 0): {0: 1}, (0, 1): {0: 1}}, num_items=4)
        scorer = FixedScorer({(0, 0): 99.0, (0, 2): 1.0})
        got = top_k(0, scorer, 4, tensor)
        assert 0 not in got and 1 not in got
        assert got == [2, 3]

    def test_k_zero_empty(self, toy_tensor):
        assert top_k(0, FixedScorer({}), 0, toy_tensor) == []

    def test_matches_bruteforce_sort(self):
        rng = np.random.default_rng(6)
        tensor = make_tensor({(0, 19): {0: 1}}, num_items=20)
        for _ in range(20):
            scores = np.round(rng.normal(size=20), 1)  # rounding forces ties
            table = {(0, i): float(scores[i]) for i in range(19)}
            scorer = FixedScorer(table)
            candidates = [i for i in range(20) if i != 19]
            want = sorted(candidates, key=lambda i: (-table.get((0, i), 0.0), i))
            for k in (1, 3, 7, 19):
                assert top_k(0, scorer, k, tensor) == want[:k]


def two_user_split():
    train_tensor = make_tensor(
        {(0, 0): {0: 1}, (1, 1): {0: 1}}, num_users=2, num_items=10)
    test = {
        0: {1: {0: 1}, 2: {0: 1}, 3: {0: 1}, 4: {0: 1}},
        1: {5: {0: 1}, 6: {0: 1}},
    }
    return DataSplit(train_tensor, test, seed=0, test_fraction=0.5)


class TestEvaluate:
    def test_perfect_recommendations(self):
        ds = two_user_split()
        scorer = FixedScorer({(0, i): 10.0 - i for i in (1, 2, 3, 4)} |
                             {(1, i): 10.0 - i for i in (5, 6)})
        report = evaluate(scorer, ds, ks=(2,))
        assert report.metrics["P@2"] == 1.0
        assert report.metrics["R@2"] == pytest.approx((2 / 4 + 2 / 2) / 2)

    def test_no_hits(self):
        ds = two_user_split()
        scorer = FixedScorer({(0, 9): 1.0, (1, 9): 1.0})
        report = evaluate(scorer, ds, ks=(1,))
        assert report.metrics["P@1"] == 0.0
        assert report.metrics["R@1"] == 0.0

    def test_hand_arithmetic_case(self):
        # |T(u)| = 4, top-5 hits 2 of them: P@5 = 0.4, R@5 = 0.5
        train_tensor = make_tensor({(0, 0): {0: 1}}, num_items=10)
        test = {0: {1: {0: 1}, 2: {0: 1}, 3: {0: 1}, 4: {0: 1}}}
        ds = DataSplit(train_tensor, test, seed=0, test_fraction=0.5)
        scorer = FixedScorer({(0, 1): 9.0, (0, 2): 8.0,
                              (0, 7): 7.5, (0, 8): 7.2, (0, 9): 7.1})
        report = evaluate(scorer, ds, ks=(5,))
        assert report.metrics["P@5"] == pytest.approx(0.4)
        assert report.metrics["R@5"] == pytest.approx(0.5)

    def test_integer_hit_identity_and_monotone_hits(self):
        inst = Instance(14, num_users=10, num_items=12, eta=0.01,
                        max_iter=6, conv_tol=1e-12)
        ds = split(inst.tensor, 0.4, seed=9)
        factors, _ = train(inst.tensor, inst.sim_table, inst.corr_table,
                           inst.cfg)
        report = evaluate(FactorScorer(factors), ds, ks=(1, 2, 3, 5))
        by_user = {}
        for row in report.per_user:
            assert row["hits"] == pytest.approx(row["precision"] * row["k"])
            assert row["hits"] == pytest.approx(row["recall"] * row["test_size"])
            by_user.setdefault(row["user"], []).append((row["k"], row["hits"], row["recall"]))
        for rows in by_user.values():
            rows.sort()
            hits = [h for _, h, _ in rows]
            recalls = [r for _, _, r in rows]
            assert hits == sorted(hits)
            assert recalls == sorted(recalls)

    def test_empty_test_raises(self):
        ds = DataSplit(make_tensor({(0, 0): {0: 1}}), {}, 0, 0.5)
        with pytest.raises(EvaluationError):
            evaluate(FixedScorer({}), ds, ks=(1,))

    def test_excluded_users_counted(self):
        ds = two_user_split()
        ds.test[1] = {}
        report = evaluate(FixedScorer({}), ds, ks=(1,))
        assert report.evaluated_users == 1
        assert report.excluded_users == 1

    def test_pure_function(self):
        ds = two_user_split()
        scorer = FixedScorer({(0, 1): 1.0})
        a = evaluate(scorer, ds, ks=(1, 3))
        b = evaluate(scorer, ds, ks=(1, 3))
        assert a.metrics == b.metrics

    def test_bad_ks(self):
        ds = two_user_split()
        with pytest.raises(ConfigError):
            evaluate(FixedScorer({}), ds, ks=(0,))


class TestSweep:
    def _setup(self):
        inst = Instance(19, num_users=8, num_items=10, latent_dim=2,
                        eta=0.01, max_iter=4, conv_tol=1e-12)
        ds = split(inst.tensor, 0.3, seed=2)
        # retrain on the full tensor for simplicity: tables stay valid
        return inst, ds

    def test_single_value_equals_direct_run(self):
        inst, ds = self._setup()
        rows = sweep("beta", [0.02], inst.cfg, inst.tensor, ds,
                     {"model": (inst.sim_table, inst.corr_table)}, ks=(1, 3))
        from dataclasses import replace
        factors, _ = train(inst.tensor, inst.sim_table, inst.corr_table,
                           replace(inst.cfg, beta=0.02))
        report = evaluate(FactorScorer(factors), ds, ks=(1, 3))
        assert {(m, v) for _, _, m, v in rows} == set(report.metrics.items())

    def test_unknown_parameter(self):
        inst, ds = self._setup()
        with pytest.raises(ConfigError, match="unknown sweep parameter"):
            sweep("gamma", [1.0], inst.cfg, inst.tensor, ds, {}, ks=(1,))

    def test_override_conflict(self):
        inst, ds = self._setup()
        with pytest.raises(ConfigError, match="pins"):
            sweep("alpha", [0.1], inst.cfg, inst.tensor, ds,
                  {"m": (inst.sim_table, inst.corr_table)},
                  model_overrides={"m": {"alpha": 0.0}})

    def test_row_shape(self):
        inst, ds = self._setup()
        rows = sweep("latent_dim", [2, 3], inst.cfg, inst.tensor, ds,
                     {"a": (inst.sim_table, inst.corr_table)}, ks=(1,))
        assert len(rows) == 2 * 1 * 2  # values x models x (P@1, R@1)
        assert {r[0] for r in rows} == {2, 3}


class TestReportFiles:
    def test_report_tsv(self, tmp_path):
        ds = two_user_split()
        report = evaluate(FixedScorer({(0, 1): 1.0}), ds, ks=(1,))
        path = tmp_path / "report.tsv"
        write_report(report, path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# evaluated_users\t")
        assert any(line.startswith("P@1\t") for line in lines)

    def test_sweep_tsv(self, tmp_path):
        rows = [(0.1, "rsbosn", "P@1", 0.25)]
        path = tmp_path / "sweep.tsv"
        write_sweep(rows, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "param_value\tmodel\tmetric\tvalue"
        assert lines[1] == "0.1\trsbosn\tP@1\t0.25"
