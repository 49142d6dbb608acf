import json

import numpy as np
import pytest

from test_config_cli import write_config
from selftrain.classifier import Hyperparams, ProbDist
from selftrain.cli import main
from selftrain.config import load_config
from selftrain.data import make_vocab, sample_n_shot, synth_generate
from selftrain.engine import EngineConfig, TerminationRule, run_self_training
from selftrain.errors import ConfigError
from selftrain.strategies import ConfThreshold, Prediction, select
from selftrain.sweep import (
    SweepRow,
    SweepSpec,
    compute_aggregates,
    load_rows,
    render_report,
    run_sweep,
)


class TestSpecValidation:
    def _base(self, tmp_path):
        return load_config(write_config(tmp_path))

    def test_axis_and_grid_checks(self, tmp_path):
        base = self._base(tmp_path)
        with pytest.raises(ConfigError):
            SweepSpec(axis="learning_rate", grid=(0.1,), seeds=(1,), base=base)
        with pytest.raises(ConfigError):
            SweepSpec(axis="conf_threshold", grid=(), seeds=(1,), base=base)
        with pytest.raises(ConfigError):
            SweepSpec(axis="conf_threshold", grid=(0.5, 0.5), seeds=(1,), base=base)
        with pytest.raises(ConfigError):
            SweepSpec(axis="n_shot", grid=(5, 2.5), seeds=(1,), base=base)
        SweepSpec(axis="conf_threshold", grid=(0.9, 0.8), seeds=(1,), base=base)  # decreasing ok


class TestSelftrainSweep:
    def test_rows_and_cell_independence(self, tmp_path):
        base = load_config(write_config(tmp_path))
        spec = SweepSpec(axis="conf_threshold", grid=(0.5, 0.7), seeds=(1, 2), base=base)
        rows = run_sweep(spec)
        assert len(rows) == 4
        assert all(r.error is None for r in rows)
        # permuting the grid permutes rows but changes no values
        flipped = run_sweep(
            SweepSpec(axis="conf_threshold", grid=(0.7, 0.5), seeds=(1, 2), base=base)
        )
        by_key = {(r.value, r.seed): r for r in rows}
        assert all(by_key[(r.value, r.seed)] == r for r in flipped)

    def test_nshot_axis(self, tmp_path):
        base = load_config(write_config(tmp_path))
        spec = SweepSpec(axis="n_shot", grid=(5, 10), seeds=(1,), base=base)
        rows = run_sweep(spec)
        assert [r.value for r in rows] == [5, 10]
        assert all(r.test_metric is not None for r in rows)

    def test_cell_failure_becomes_error_row(self, tmp_path):
        base = load_config(write_config(tmp_path, n_shot=35))
        # 35-shot exceeds what any class retains after the splits: cells error out
        spec = SweepSpec(axis="conf_threshold", grid=(0.5,), seeds=(1,), base=base)
        rows = run_sweep(spec)
        assert len(rows) == 1
        assert rows[0].error is not None
        assert rows[0].test_metric is None


class TestScoreThresholdSweep:
    def _llm_config(self, tmp_path):
        corpus_vocab = make_vocab(3, 25)
        corpus = synth_generate(40, corpus_vocab, 0.05, seed=3, words_min=4, words_max=8)
        lines = []
        for k, inst in enumerate(corpus.instances):
            name = corpus.class_names[inst.gold_label]
            score = 0.1 + 0.8 * ((k * 37) % 100) / 100.0  # deterministic, inside (0,1)
            lines.append(
                json.dumps(
                    {
                        "match": {"mode": "by_id", "key": inst.id},
                        "response": f"{name} | score: {score:.3f}",
                    }
                )
            )
        fixture = tmp_path / "scores.jsonl"
        fixture.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return load_config(
            write_config(
                tmp_path,
                llm={"mode": "obj-conf-score", "threshold": 0.8, "fixtures": str(fixture)},
                seeds=[1],
            )
        )

    def test_boundary_thresholds(self, tmp_path):
        base = self._llm_config(tmp_path)
        spec = SweepSpec(axis="score_threshold", grid=(0.0, 1.0), seeds=(1,), base=base)
        rows = run_sweep(spec)
        assert rows[0].error is None and rows[1].error is None
        # corpus 120 -> test 30, train 90 -> val 9, labeled 15 -> pool 66
        assert rows[0].num_added == 66  # every score is > 0
        assert rows[1].num_added == 0  # nothing is > 1
        assert rows[0].pseudo_label_accuracy == 1.0

    def test_kept_counts_non_increasing_across_grid(self, tmp_path):
        base = self._llm_config(tmp_path)
        grid = (0.2, 0.4, 0.6, 0.8)
        rows = run_sweep(SweepSpec(axis="score_threshold", grid=grid, seeds=(1,), base=base))
        counts = [r.num_added for r in rows]
        assert counts == sorted(counts, reverse=True)


class TestMonotonicity:
    def test_frozen_model_selection_is_monotone(self):
        rng = np.random.default_rng(17)
        preds = []
        for i in range(200):
            probs = rng.dirichlet(np.ones(3))
            preds.append(Prediction.from_dist(f"m{i:03d}", ProbDist(tuple(probs))))
        grid = [0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
        counts = [len(select(ConfThreshold(t=t), preds)) for t in grid]
        assert counts == sorted(counts, reverse=True)

    def test_full_runs_can_invert_the_trend(self):
        # with retraining in the loop, a stricter threshold can select
        # cleaner data early, yielding a better model that then admits
        # MORE instances overall
        vocab = make_vocab(3, 120)
        train = synth_generate(90, vocab, 0.1, seed=51, words_min=3, words_max=10)
        hp = Hyperparams(
            feature_dim=2**13, epochs=80, learning_rate=0.15, lr_decay=False,
            batch_size=10, patience=None,
        )
        labeled, pool = sample_n_shot(train, 10, seed=2)
        total = {}
        for t in (0.6, 0.7):
            _, hist = run_self_training(
                labeled, pool, ConfThreshold(t=t),
                TerminationRule(max_iterations=8),
                EngineConfig(hyperparams=hp, seed=2),
            )
            total[t] = sum(r.num_selected for r in hist)
        assert total[0.7] > total[0.6]


class TestReportRendering:
    def _rows(self):
        rows = []
        for value in (0.5, 0.55, 0.6, 0.65, 0.7, 0.75):
            for seed in (1, 2, 3):
                rows.append(
                    SweepRow(
                        value=value, seed=seed,
                        num_added=int(100 * value) + seed,
                        pseudo_label_accuracy=0.9 + 0.01 * seed,
                        test_metric=0.8 + 0.01 * seed + value / 10,
                    )
                )
        return rows

    def test_tsv_row_counts(self, tmp_path):
        rows = self._rows()
        paths = render_report(rows, "conf_threshold", str(tmp_path))
        lines = open(paths["tsv"]).read().splitlines()
        assert len(lines) == 1 + 18 + 6  # header + raw + aggregates

    def test_aggregate_means(self):
        rows = self._rows()
        aggregates = compute_aggregates(rows)
        first = aggregates[0]
        seed_rows = [r for r in rows if r.value == 0.5]
        assert first["test_metric_mean"] == pytest.approx(
            sum(r.test_metric for r in seed_rows) / 3, abs=1e-12
        )
        assert first["num_added_mean"] == pytest.approx(
            sum(r.num_added for r in seed_rows) / 3, abs=1e-12
        )

    def test_rerender_is_byte_identical(self, tmp_path):
        rows = self._rows()
        a = render_report(rows, "conf_threshold", str(tmp_path / "a"))
        b = render_report(rows, "conf_threshold", str(tmp_path / "b"))
        for key in ("tsv", "json", "plotdata"):
            assert open(a[key], "rb").read() == open(b[key], "rb").read()

    def test_load_rows_round_trip(self, tmp_path):
        rows = self._rows()
        paths = render_report(rows, "conf_threshold", str(tmp_path))
        axis, reloaded = load_rows(paths["json"])
        assert axis == "conf_threshold"
        assert reloaded == rows

    def test_plotdata_series(self, tmp_path):
        rows = self._rows()
        paths = render_report(rows, "score_threshold", str(tmp_path))
        plot = json.loads(open(paths["plotdata"]).read())
        assert set(plot) == {
            "axis", "x", "bars_num_added", "line_labeling_accuracy", "line_test_metric",
        }
        assert len(plot["x"]) == 6


class TestSweepCli:
    def test_end_to_end_and_report_subcommand(self, tmp_path):
        config_path = write_config(tmp_path, seeds=[1])
        out = tmp_path / "out"
        code = main(
            ["sweep", "--config", config_path, "--axis", "conf_threshold",
             "--grid", "0.5,0.7", "--seeds", "1"]
        )
        assert code == 0
        assert (out / "sweep.tsv").exists()
        rerender = tmp_path / "rerender"
        assert main(["report", "--rows", str(out / "sweep.json"), "--out", str(rerender)]) == 0
        assert (rerender / "plotdata.json").read_bytes() == (out / "plotdata.json").read_bytes()
