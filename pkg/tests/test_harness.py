"""Benchmark harness: synthetic data, CSV I/O, sweep orchestration,
reports, and the command line."""

import json
import math

import numpy as np
import pytest

from pcaimpute.cli import main
from pcaimpute.core import ContractError, apply_mcar
from pcaimpute.evaluation import ExperimentRecord, derive_seed
from pcaimpute.harness import (
    RunConfig,
    SyntheticSpec,
    default_partition,
    emit_report,
    format_table,
    generate_synthetic,
    load_csv,
    load_run_config,
    minmax_normalize,
    read_report_jsonl,
    run_experiments,
    write_csv,
    write_report_jsonl,
)


class TestSynthetic:
    def test_noiseless_rank_one_is_rank_one(self):
        ds = generate_synthetic(SyntheticSpec(rows=40, cols=10, rank=1, sigma=0.0, seed=3))
        s = np.linalg.svd(ds.data - ds.data.mean(axis=0), compute_uv=False)
        assert s[1] < 1e-8 * max(s[0], 1.0)

    def test_deterministic(self):
        a = generate_synthetic(SyntheticSpec(rows=30, cols=8, rank=2, seed=5))
        b = generate_synthetic(SyntheticSpec(rows=30, cols=8, rank=2, seed=5))
        np.testing.assert_array_equal(a.data, b.data)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_seed_changes_data(self):
        a = generate_synthetic(SyntheticSpec(rows=30, cols=8, rank=2, seed=5))
        b = generate_synthetic(SyntheticSpec(rows=30, cols=8, rank=2, seed=6))
        assert not np.array_equal(a.data, b.data)

    def test_low_rank_signal_dominates_at_benchmark_scale(self):
        ds = generate_synthetic(
            SyntheticSpec(rows=1000, cols=300, rank=8, sigma=0.01, seed=1)
        )
        centered = ds.data - ds.data.mean(axis=0)
        s = np.linalg.svd(centered, compute_uv=False)
        explained = np.cumsum(s**2) / np.sum(s**2)
        assert explained[7] >= 0.95

    def test_values_in_unit_interval(self):
        ds = generate_synthetic(SyntheticSpec(rows=50, cols=9, rank=3, seed=7))
        assert ds.data.min() >= 0.0 and ds.data.max() <= 1.0

    def test_labels_cover_classes(self):
        ds = generate_synthetic(
            SyntheticSpec(rows=200, cols=12, rank=4, n_classes=3, seed=9)
        )
        assert set(np.unique(ds.labels)) == {0, 1, 2}

    def test_mask_starts_empty_and_unpartitioned(self):
        ds = generate_synthetic(SyntheticSpec(rows=20, cols=6, rank=2, seed=11))
        assert not ds.mask.any()
        assert ds.q == ds.n_cols

    def test_spec_validation(self):
        with pytest.raises(ContractError):
            SyntheticSpec(rows=10, cols=5, rank=6)
        with pytest.raises(ContractError):
            SyntheticSpec(rows=0, cols=5, rank=2)
        with pytest.raises(ContractError):
            SyntheticSpec(rows=10, cols=5, rank=2, sigma=-0.1)
        with pytest.raises(ContractError):
            SyntheticSpec(rows=10, cols=5, rank=2, n_classes=1)


class TestMinmax:
    def test_columns_scaled_to_unit_interval(self):
        rng = np.random.default_rng(0)
        X = rng.normal(5.0, 3.0, size=(30, 4))
        Z = minmax_normalize(X)
        np.testing.assert_allclose(Z.min(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(Z.max(axis=0), 1.0, atol=1e-12)

    def test_constant_column_maps_to_zero(self):
        X = np.array([[2.0, 1.0], [2.0, 3.0], [2.0, 5.0]])
        Z = minmax_normalize(X)
        np.testing.assert_array_equal(Z[:, 0], 0.0)


class TestCsvIo:
    def write(self, tmp_path, text, name="data.csv"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)

    def test_happy_path_with_rearrangement(self, tmp_path):
        path = self.write(
            tmp_path,
            "a,b,c,y\n1.0,,3.0,cat\n4.0,5.0,6.0,dog\n7.0,8.0,,cat\n",
        )
        loaded = load_csv(path, label_column="y")
        ds = loaded.dataset
        # b and c each have a hole, a is complete, so a leads
        assert loaded.feature_names[0] == "a"
        assert set(loaded.feature_names) == {"a", "b", "c"}
        assert ds.q == 1
        assert ds.n_missing() == 2
        assert loaded.label_names == ["cat", "dog"]
        np.testing.assert_array_equal(ds.labels, [0, 1, 0])

    def test_missing_tokens(self, tmp_path):
        path = self.write(tmp_path, "a,b\n1.0,NaN\nnAn,2.0\n,3.0\n")
        ds = load_csv(path).dataset
        assert ds.n_missing() == 3

    def test_whitespace_trimmed(self, tmp_path):
        path = self.write(tmp_path, " a , b \n 1.5 , 2.5 \n 3.5 , 4.5 \n")
        loaded = load_csv(path)
        assert loaded.feature_names == ["a", "b"]
        assert loaded.dataset.data[0, 0] == 1.5

    def test_bad_float_names_row_and_column(self, tmp_path):
        path = self.write(tmp_path, "a,b\n1.0,2.0\n1.0,oops\n")
        with pytest.raises(ContractError, match=r"row 3.*'b'.*'oops'"):
            load_csv(path)

    def test_ragged_row_rejected(self, tmp_path):
        path = self.write(tmp_path, "a,b\n1.0,2.0\n3.0\n")
        with pytest.raises(ContractError, match="row 3"):
            load_csv(path)

    def test_missing_label_rejected(self, tmp_path):
        path = self.write(tmp_path, "a,y\n1.0,cat\n2.0,\n")
        with pytest.raises(ContractError, match="row 3.*missing label"):
            load_csv(path, label_column="y")

    def test_unknown_label_column(self, tmp_path):
        path = self.write(tmp_path, "a,b\n1.0,2.0\n")
        with pytest.raises(ContractError, match="unknown label column"):
            load_csv(path, label_column="z")

    def test_empty_and_headerless_files(self, tmp_path):
        with pytest.raises(ContractError, match="empty file"):
            load_csv(self.write(tmp_path, "", "empty.csv"))
        with pytest.raises(ContractError, match="no data rows"):
            load_csv(self.write(tmp_path, "a,b\n", "bare.csv"))

    def test_write_read_round_trip(self, tmp_path):
        truth = generate_synthetic(
            SyntheticSpec(rows=25, cols=7, rank=2, n_classes=3, seed=13)
        ).with_partition(5)
        masked = apply_mcar(truth, 0.3, seed=14)
        path = str(tmp_path / "rt.csv")
        write_csv(path, masked, label_names=["u", "v", "w"])
        loaded = load_csv(path, label_column="label")
        back = loaded.dataset
        np.testing.assert_array_equal(back.mask, masked.mask)
        np.testing.assert_allclose(back.data[~back.mask], masked.data[~masked.mask])
        # integer codes follow first-appearance order on reload, so compare
        # the decoded strings rather than the codes themselves
        decoded = [loaded.label_names[c] for c in back.labels]
        original = [["u", "v", "w"][c] for c in masked.labels]
        assert decoded == original
        assert sorted(loaded.label_names) == ["u", "v", "w"]
        # column order is preserved: observed block was already leading
        assert loaded.feature_names == [f"f{j}" for j in range(7)]


class TestRunConfig:
    def synth_kwargs(self):
        return dict(synth_rows=30, synth_cols=10, synth_rank=2)

    def test_requires_exactly_one_source(self):
        with pytest.raises(ContractError, match="exactly one data source"):
            RunConfig()
        with pytest.raises(ContractError, match="exactly one data source"):
            RunConfig(csv_path="x.csv", **self.synth_kwargs())

    def test_validation(self):
        with pytest.raises(ContractError, match="missing_rates"):
            RunConfig(missing_rates=[0.0], **self.synth_kwargs())
        with pytest.raises(ContractError, match="unknown strategy"):
            RunConfig(strategies=["bogus"], **self.synth_kwargs())
        with pytest.raises(ContractError, match="unknown imputer"):
            RunConfig(imputers=["bogus"], **self.synth_kwargs())
        with pytest.raises(ContractError, match="folds"):
            RunConfig(folds=1, **self.synth_kwargs())

    def test_load_from_json_with_overrides(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(
            {"synth_rows": 30, "synth_cols": 10, "synth_rank": 2, "seed": 1}
        ))
        config = load_run_config(str(path), overrides={"seed": 9, "output": None})
        assert config.seed == 9
        assert config.output == "report"  # None override is skipped

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"synth_rows": 30, "typo_key": 1}))
        with pytest.raises(ContractError, match="typo_key"):
            load_run_config(str(path))

    def test_invalid_json_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{not json")
        with pytest.raises(ContractError, match="not valid JSON"):
            load_run_config(str(path))

    def test_default_partition(self):
        assert default_partition(300) == 250
        assert default_partition(6) == 5
        assert default_partition(7) == math.ceil(35 / 6)


class TestSweep:
    def small_config(self, **kw):
        base = dict(
            synth_rows=60,
            synth_cols=12,
            synth_rank=2,
            q=9,
            missing_rates=[0.2, 0.4],
            strategies=["traditional", "pcai"],
            imputers=["mean"],
            seed=3,
        )
        base.update(kw)
        return RunConfig(**base)

    def test_complete_sweep_produces_grid(self):
        records = run_experiments(self.small_config())
        assert len(records) == 4
        keys = {(r.strategy, r.missing_rate) for r in records}
        assert keys == {("traditional", 0.2), ("traditional", 0.4),
                        ("pcai", 0.2), ("pcai", 0.4)}
        for r in records:
            assert not r.na
            assert r.mse is not None and r.mse >= 0.0
            assert r.total_seconds >= 0.0

    def test_mask_shared_across_strategies_at_a_rate(self):
        config = self.small_config()
        truth = generate_synthetic(
            SyntheticSpec(rows=60, cols=12, rank=2, sigma=config.synth_sigma,
                          n_classes=config.synth_classes,
                          seed=derive_seed(config.seed, "synthetic"))
        ).with_partition(9)
        m1 = apply_mcar(truth, 0.2, derive_seed(config.seed, "mask", 0.2))
        m2 = apply_mcar(truth, 0.2, derive_seed(config.seed, "mask", 0.2))
        np.testing.assert_array_equal(m1.mask, m2.mask)
        m3 = apply_mcar(truth, 0.4, derive_seed(config.seed, "mask", 0.4))
        assert m3.n_missing() != m1.n_missing()

    def test_deterministic_across_runs(self):
        a = run_experiments(self.small_config())
        b = run_experiments(self.small_config())
        for ra, rb in zip(a, b):
            assert ra.mse == rb.mse

    def test_classification_strategies_report_accuracy(self):
        config = self.small_config(
            synth_rows=120, strategies=["pic", "pic_reduce", "pca_on_full"],
            missing_rates=[0.3], folds=3,
        )
        records = run_experiments(config)
        assert len(records) == 3
        for r in records:
            assert not r.na, r.na_reason
            assert r.mse is None
            assert 0.0 <= r.accuracy <= 1.0
            assert len(r.fold_accuracies) == 3

    def test_tiny_time_budget_yields_na_not_crash(self):
        config = self.small_config(
            synth_rows=300, synth_cols=40, q=30,
            imputers=["soft_impute"], time_budget_seconds=1e-4,
        )
        records = run_experiments(config)
        assert len(records) == 4
        assert all(r.na for r in records)
        assert all(r.na_reason == "time budget exceeded" for r in records)

    def test_cell_exception_becomes_na_record(self):
        # knn_k too large for the row count fails the cell, not the sweep
        config = self.small_config(
            imputers=["knn"], imputer_params={"knn_k": 500}, missing_rates=[0.2],
        )
        records = run_experiments(config)
        assert all(r.na for r in records)
        assert all("ContractError" in r.na_reason for r in records)


class TestReports:
    def records(self):
        config = RunConfig(
            synth_rows=50, synth_cols=10, synth_rank=2, q=8,
            missing_rates=[0.2, 0.4], strategies=["traditional", "pcai"],
            imputers=["mean"], seed=5,
        )
        return run_experiments(config)

    def test_jsonl_round_trip_is_exact(self, tmp_path):
        records = self.records()
        path = str(tmp_path / "report.jsonl")
        write_report_jsonl(records, path)
        back = read_report_jsonl(path)
        assert len(back) == len(records)
        for ra, rb in zip(records, back):
            assert ra.strategy == rb.strategy
            assert ra.mse == rb.mse
            assert ra.stage_seconds == rb.stage_seconds
            assert ra.total_seconds == rb.total_seconds

    def test_table_layout(self):
        records = self.records()
        table = format_table(records)
        lines = table.splitlines()
        assert lines[0].startswith("#")
        assert "workers: 1" in lines[0]
        assert "20%" in lines[1] and "40%" in lines[1]
        # one body row per (imputer, strategy) pair
        assert len(lines) == 3 + 2

    def test_table_renders_na_literally(self):
        records = self.records()
        records[1] = ExperimentRecord(
            strategy=records[1].strategy, imputer=records[1].imputer,
            missing_rate=records[1].missing_rate, na=True, na_reason="timed out",
        )
        table = format_table(records)
        assert "NA" in table

    def test_emit_report_writes_both_files(self, tmp_path):
        base = str(tmp_path / "out")
        jsonl_path, table_path = emit_report(self.records(), base)
        assert jsonl_path.endswith(".jsonl") and table_path.endswith(".txt")
        assert read_report_jsonl(jsonl_path)
        with open(table_path) as fh:
            assert "traditional" in fh.read()


class TestCli:
    def test_synth_mask_impute_pipeline(self, tmp_path, capsys):
        full = str(tmp_path / "full.csv")
        holes = str(tmp_path / "holes.csv")
        filled = str(tmp_path / "filled.csv")
        assert main(["synth", "--rows", "40", "--cols", "8", "--rank", "2",
                     "--seed", "3", "--out", full]) == 0
        assert main(["mask", full, "--label-column", "label", "--rate", "0.25",
                     "--q", "6", "--seed", "4", "--out", holes]) == 0
        assert main(["impute", holes, "--label-column", "label",
                     "--imputer", "knn", "--truth", full, "--out", filled]) == 0
        out = capsys.readouterr().out
        assert "mse" in out
        back = load_csv(filled, label_column="label").dataset
        assert back.n_missing() == 0

    def test_accelerated_impute_reports_components(self, tmp_path, capsys):
        full = str(tmp_path / "full.csv")
        holes = str(tmp_path / "holes.csv")
        filled = str(tmp_path / "filled.csv")
        main(["synth", "--rows", "60", "--cols", "10", "--rank", "2",
              "--seed", "5", "--out", full])
        main(["mask", full, "--label-column", "label", "--rate", "0.3",
              "--q", "7", "--seed", "6", "--out", holes])
        assert main(["impute", holes, "--label-column", "label", "--accelerated",
                     "--out", filled]) == 0
        out = capsys.readouterr().out
        assert "kept" in out
        back = load_csv(filled, label_column="label").dataset
        assert back.n_missing() == 0

    def test_pic_prints_accuracy(self, tmp_path, capsys):
        full = str(tmp_path / "full.csv")
        holes = str(tmp_path / "holes.csv")
        main(["synth", "--rows", "120", "--cols", "10", "--rank", "2",
              "--seed", "7", "--out", full])
        main(["mask", full, "--label-column", "label", "--rate", "0.2",
              "--q", "7", "--seed", "8", "--out", holes])
        assert main(["pic", holes, "--label-column", "label", "--seed", "9"]) == 0
        out = capsys.readouterr().out
        assert "accuracy" in out

    def test_bench_writes_report(self, tmp_path, capsys):
        config_path = tmp_path / "bench.json"
        config_path.write_text(json.dumps({
            "synth_rows": 50, "synth_cols": 10, "synth_rank": 2, "q": 8,
            "missing_rates": [0.2], "strategies": ["traditional", "pcai"],
            "imputers": ["mean"], "seed": 2,
            "output": str(tmp_path / "report"),
        }))
        assert main(["bench", str(config_path)]) == 0
        out = capsys.readouterr().out
        assert "traditional" in out
        records = read_report_jsonl(str(tmp_path / "report.jsonl"))
        assert len(records) == 2

    def test_bench_all_na_exits_2(self, tmp_path, capsys):
        config_path = tmp_path / "bench.json"
        config_path.write_text(json.dumps({
            "synth_rows": 200, "synth_cols": 30, "synth_rank": 2,
            "missing_rates": [0.2], "strategies": ["traditional"],
            "imputers": ["soft_impute"],
            "output": str(tmp_path / "report"),
        }))
        assert main(["bench", str(config_path), "--time-budget", "1e-4"]) == 2
        capsys.readouterr()

    def test_mask_rejects_existing_missing(self, tmp_path, capsys):
        full = str(tmp_path / "full.csv")
        holes = str(tmp_path / "holes.csv")
        main(["synth", "--rows", "30", "--cols", "6", "--rank", "2",
              "--seed", "1", "--out", full])
        main(["mask", full, "--label-column", "label", "--rate", "0.2",
              "--q", "4", "--seed", "2", "--out", holes])
        assert main(["mask", holes, "--label-column", "label", "--rate", "0.2",
                     "--q", "4", "--seed", "3", "--out", str(tmp_path / "x.csv")]) == 1
        capsys.readouterr()

    def test_missing_file_exits_1(self, tmp_path, capsys):
        assert main(["impute", str(tmp_path / "ghost.csv"),
                     "--out", str(tmp_path / "y.csv")]) == 1
        capsys.readouterr()

    def test_bad_flag_exits_1(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["synth", "--rows", "10"])
        assert exc.value.code == 1
        capsys.readouterr()
