import json
import os

import numpy as np
import pandas as pd
import pytest

import cli_runner.benchmark as benchmark_module
from cli_runner import (
    BenchmarkCommand,
    SweepCell,
    SweepConfig,
    cmd_evaluate,
    cmd_fit,
    cmd_simulate,
    complete_case_dataset,
    experiment_from_dict,
    graph_metrics,
    heldout_loglik,
    load_checkpoint,
    load_experiment,
    mean_impute_dataset,
    method_dataset,
    run_sweep,
    save_checkpoint,
    sweep_cells,
    sweep_columns,
)
from em_trainer import TrainConfig, initialize_state
from graph_model import EdgePattern
from sem_engine import read_document
from shared.config import to_dict
from shared.exceptions import ConfigError, DataError, DimensionMismatchError
from shared.manifest import config_hash, verify_manifest
from synthetic_bench import Dataset, InstanceSpec

SMALL = {
    "schema_version": 1,
    "instance": {"k": 3, "n_per_intervention": 20, "missing_rate": 0.2, "seed": 4},
    "train": {"epochs": 1, "batch_size": 64},
    "threads": 1,
}


def _config_file(tmp_path, data=None):
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(data or SMALL))
    return str(path)


def _chain(k=3):
    m = np.zeros((k, k), dtype=np.int8)
    for j in range(k - 1):
        m[j, j + 1] = 1
    return EdgePattern(m)


class TestExperimentConfig:
    def test_defaults(self):
        config = load_experiment(None, output_dir="out", threads=1)
        assert config.instance.k == 10
        assert config.sweep is None
        assert config.output_directory == "out"

    def test_unknown_root_key(self):
        with pytest.raises(ConfigError):
            experiment_from_dict({"instnace": {}})

    def test_unknown_section_key(self):
        with pytest.raises(ConfigError):
            experiment_from_dict({"train": {"epoch": 3}})

    def test_invalid_value_names_field(self):
        with pytest.raises(ConfigError) as exc:
            experiment_from_dict({"instance": {"k": 0}})
        assert "k" in str(exc.value)

    def test_overrides(self):
        config = experiment_from_dict(SMALL, output_dir="elsewhere", threads=3, seed=9)
        assert config.instance.seed == 9
        assert config.train.seed == 9
        assert config.train.threads == 3
        assert config.threads == 3
        assert config.output_directory == "elsewhere"

    def test_schema_version(self, tmp_path):
        with pytest.raises(ConfigError):
            load_experiment(_config_file(tmp_path, {"schema_version": 99}))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_experiment(str(tmp_path / "absent.json"))

    def test_round_trip_through_json(self):
        config = experiment_from_dict({**SMALL, "sweep": {"missing_rates": [0.1], "seeds": 2}})
        again = experiment_from_dict(config.to_json())
        assert again.instance == config.instance
        assert again.train == config.train
        assert again.sweep == config.sweep

    def test_sweep_rejects_unknown_method(self):
        with pytest.raises(ConfigError):
            SweepConfig(methods=["em", "oracle"])


class TestBaselines:
    def _data(self):
        y = np.array([[1.0, np.nan], [3.0, 4.0], [np.nan, 6.0]])
        r = np.isfinite(y).astype(np.int8)
        return Dataset(y, r, np.ones((3, 2)))

    def test_complete_case(self):
        kept = complete_case_dataset(self._data())
        assert kept.n == 1
        assert np.array_equal(kept.y, [[3.0, 4.0]])

    def test_complete_case_without_complete_rows(self):
        data = Dataset(np.array([[np.nan, 1.0]]), np.array([[0, 1]]), np.ones((1, 2)))
        with pytest.raises(DataError):
            complete_case_dataset(data)

    def test_mean_impute(self):
        filled = mean_impute_dataset(self._data())
        assert filled.pre_imputed
        assert np.array_equal(filled.y, [[1.0, 5.0], [3.0, 4.0], [2.0, 6.0]])
        assert np.array_equal(filled.r, self._data().r)

    def test_mean_impute_all_missing_column(self):
        data = Dataset(np.array([[1.0, np.nan], [2.0, np.nan]]), np.array([[1, 0], [1, 0]]), np.ones((2, 2)))
        assert np.all(mean_impute_dataset(data).y[:, 1] == 0.0)

    def test_method_rates(self):
        data = self._data()
        values = np.nan_to_num(data.y)
        control, rate = method_dataset("complete_data", data, values)
        assert rate == 0.0
        assert not control.has_missing
        assert method_dataset("em", data)[1] is None
        with pytest.raises(ValueError):
            method_dataset("complete_data", data)
        with pytest.raises(ValueError):
            method_dataset("oracle", data)


class TestGraphMetrics:
    def test_empty_estimate(self):
        truth = _chain(4)
        metrics = graph_metrics(EdgePattern.empty(4), EdgePattern.empty(4), truth, EdgePattern.empty(4))
        assert metrics["shd_target"] == 3
        assert metrics["precision"] == 1.0
        assert metrics["recall"] == 0.0
        assert metrics["edges_true"] == 3

    def test_perfect_estimate(self):
        truth = _chain(3)
        m = EdgePattern(np.array([[0, 0, 1], [0, 0, 0], [0, 0, 0]]))
        metrics = graph_metrics(truth, m, truth, m)
        assert metrics["shd_target"] == 0
        assert metrics["shd_m"] == 0
        assert metrics["recall"] == 1.0

    def test_missingness_reversal_counts_twice(self):
        a = EdgePattern(np.array([[0, 1], [0, 0]]))
        b = EdgePattern(np.array([[0, 0], [1, 0]]))
        metrics = graph_metrics(EdgePattern.empty(2), a, EdgePattern.empty(2), b)
        assert metrics["shd_m"] == 2

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            graph_metrics(EdgePattern.empty(3), EdgePattern.empty(3), EdgePattern.empty(4), EdgePattern.empty(4))

    def test_heldout_without_complete_rows(self):
        data = Dataset(np.array([[np.nan, 1.0]]), np.array([[0, 1]]), np.ones((1, 2)))
        state = initialize_state(Dataset(np.zeros((4, 2)), np.ones((4, 2)), np.ones((4, 2))), TrainConfig(threads=1))
        assert heldout_loglik(state, data) is None

    def test_heldout_is_finite(self):
        rng = np.random.default_rng(0)
        data = Dataset(rng.standard_normal((20, 2)), np.ones((20, 2)), np.ones((20, 2)))
        state = initialize_state(data, TrainConfig(threads=1))
        assert np.isfinite(heldout_loglik(state, data))


class TestSweepGrid:
    def test_cells_in_table_order(self):
        sweep = SweepConfig(missing_rates=[0.1, 0.2], seeds=2, n_per_intervention=[10, 20])
        cells = sweep_cells(sweep)
        assert len(cells) == 8
        assert cells[0] == SweepCell(0.1, 0, 10, None)
        assert cells[-1] == SweepCell(0.2, 1, 20, None)
        assert sweep_columns(sweep)[:3] == ["rate", "seed", "n_per_intervention"]

    def test_cell_instance(self):
        spec = SweepCell(0.3, 2, max_parents=1).instance(InstanceSpec(seed=10))
        assert (spec.missing_rate, spec.seed, spec.max_parents) == (0.3, 12, 1)


class TestSweepCheckpoint:
    def test_save_and_load(self, tmp_path):
        path = str(tmp_path / "checkpoint.json")
        save_checkpoint(path, "abc", 4, ["cell-a"], [{"method": "em"}])
        data = load_checkpoint(path, "abc")
        assert data["completed_cells"] == ["cell-a"]
        assert not os.path.exists(path + ".tmp")

    def test_other_configuration(self, tmp_path):
        path = str(tmp_path / "checkpoint.json")
        save_checkpoint(path, "abc", 1, [], [])
        assert load_checkpoint(path, "xyz") is None

    def test_expiry(self, tmp_path):
        path = tmp_path / "checkpoint.json"
        save_checkpoint(str(path), "abc", 1, [], [])
        data = json.loads(path.read_text())
        data["timestamp"] = "2000-01-01T00:00:00"
        path.write_text(json.dumps(data))
        assert load_checkpoint(str(path), "abc", ttl_hours=48) is None
        assert load_checkpoint(str(path), "abc", ttl_hours=0) is not None

    def test_corrupted(self, tmp_path):
        path = tmp_path / "checkpoint.json"
        path.write_text("{not json")
        assert load_checkpoint(str(path), "abc") is None

    def test_missing(self, tmp_path):
        assert load_checkpoint(str(tmp_path / "absent.json"), "abc") is None


class TestRunSweep:
    def _setup(self):
        instance = InstanceSpec(k=3, n_per_intervention=20, seed=4)
        train = TrainConfig(epochs=1, batch_size=64, threads=1)
        return instance, train

    def test_one_rate_three_methods(self, tmp_path):
        instance, train = self._setup()
        sweep = SweepConfig(missing_rates=[0.1], seeds=1, methods=["em", "complete_data", "complete_case"])
        checkpoint = str(tmp_path / "sweep_checkpoint.json")
        summary = run_sweep(instance, train, sweep, str(tmp_path / "benchmark.csv"), checkpoint_file=checkpoint, progress=False)
        table = pd.read_csv(summary["table"])
        assert summary["rows"] == 3
        assert list(table.columns) == ["rate", "seed", "method", "shd_target", "shd_m", "seconds", "error"]
        assert list(table["method"]) == ["em", "complete_data", "complete_case"]
        assert list(table["rate"]) == [0.1, 0.0, 0.1]
        assert table["error"].isna().all()
        assert not os.path.exists(checkpoint)

    def test_resume_skips_completed_cells(self, tmp_path):
        instance, train = self._setup()
        sweep = SweepConfig(missing_rates=[0.1, 0.2], seeds=1, methods=["mean_impute"])
        cells = sweep_cells(sweep)
        fingerprint = config_hash({"instance": to_dict(instance), "train": to_dict(train), "sweep": to_dict(sweep)})
        checkpoint = str(tmp_path / "sweep_checkpoint.json")
        done = {"cell": cells[0].key, "rate": 0.1, "seed": 0, "method": "mean_impute", "shd_target": 99, "shd_m": 0, "seconds": 0.0, "error": ""}
        save_checkpoint(checkpoint, fingerprint, len(cells), [cells[0].key], [done])
        summary = run_sweep(instance, train, sweep, str(tmp_path / "benchmark.csv"), checkpoint_file=checkpoint, resume=True, progress=False)
        table = pd.read_csv(summary["table"])
        assert list(table["rate"]) == [0.1, 0.2]
        assert table["shd_target"].iloc[0] == 99

    def test_failed_method_is_recorded(self, tmp_path, monkeypatch):
        original = benchmark_module.fit_method

        def flaky(method, *args, **kwargs):
            if method == "complete_case":
                raise DataError("complete-case deletion left no records")
            return original(method, *args, **kwargs)

        monkeypatch.setattr(benchmark_module, "fit_method", flaky)
        instance, train = self._setup()
        sweep = SweepConfig(missing_rates=[0.1], seeds=1, methods=["complete_case", "mean_impute"])
        summary = run_sweep(instance, train, sweep, str(tmp_path / "benchmark.csv"), progress=False)
        table = pd.read_csv(summary["table"])
        errors = table.set_index("method")["error"]
        assert str(errors["complete_case"]).startswith("DataError")
        assert pd.isna(errors["mean_impute"])
        assert summary["failed_rows"] == 1

    def test_rerun_reproduces_table(self, tmp_path):
        instance, train = self._setup()
        sweep = SweepConfig(missing_rates=[0.1, 0.2], seeds=2, methods=["em", "mean_impute"])
        tables = []
        for run, workers in enumerate((1, 2)):
            summary = run_sweep(instance, train, sweep, str(tmp_path / f"benchmark_{run}.csv"), workers=workers, progress=False)
            table = pd.read_csv(summary["table"], dtype=str, keep_default_na=False)
            tables.append(table.drop(columns="seconds").to_csv(index=False))
        assert tables[0] == tables[1]

    def test_benchmark_needs_sweep(self, tmp_path):
        config = experiment_from_dict(SMALL, output_dir=str(tmp_path))
        with pytest.raises(ConfigError):
            BenchmarkCommand(config)


class TestCommands:
    def test_simulate_writes_files_and_manifest(self, tmp_path):
        out = str(tmp_path / "sim")
        files = cmd_simulate(_config_file(tmp_path, {**SMALL, "test_fraction": 0.25}), out=out, progress=False)
        for role in ("dataset", "truth", "train_split", "test_split", "manifest"):
            assert os.path.exists(files[role])
        assert verify_manifest(files["manifest"])
        manifest = json.loads(open(files["manifest"]).read())
        assert manifest["seed"] == 4
        assert manifest["spec_hash"] == InstanceSpec(**SMALL["instance"]).spec_hash()

    def test_fit_and_evaluate(self, tmp_path):
        config = _config_file(tmp_path)
        sim = cmd_simulate(config, out=str(tmp_path / "sim"), progress=False)
        fit = cmd_fit(sim["dataset"], config, out=str(tmp_path / "fit"), diagnostics=True, progress=False)
        document = read_document(fit["checkpoint"])
        assert document["dataset"]["records"] == 60
        assert "graphs" in document
        assert len(pd.read_csv(fit["history"])) == 1
        assert len(pd.read_csv(fit["diagnostics"])) <= 10

        evaluated = cmd_evaluate(fit["checkpoint"], sim["truth"], out=str(tmp_path / "eval"), test_path=sim["dataset"])
        metrics = json.loads(open(evaluated["metrics"]).read())
        assert metrics["k"] == 3
        assert "heldout_loglik" in metrics

    def test_truth_against_itself(self, tmp_path):
        sim = cmd_simulate(_config_file(tmp_path), out=str(tmp_path / "sim"), progress=False)
        evaluated = cmd_evaluate(sim["truth"], sim["truth"], out=str(tmp_path / "eval"))
        metrics = json.loads(open(evaluated["metrics"]).read())
        assert metrics["shd_target"] == 0
        assert metrics["shd_m"] == 0
        assert metrics["precision"] == 1.0

    def test_evaluate_without_graphs_extracts_from_state(self, tmp_path):
        config = _config_file(tmp_path)
        sim = cmd_simulate(config, out=str(tmp_path / "sim"), progress=False)
        fit = cmd_fit(sim["dataset"], config, out=str(tmp_path / "fit"), progress=False)
        with_graphs = json.loads(open(cmd_evaluate(fit["checkpoint"], sim["truth"], out=str(tmp_path / "a"))["metrics"]).read())

        document = json.loads(open(fit["checkpoint"]).read())
        del document["graphs"]
        bare = tmp_path / "bare.json"
        bare.write_text(json.dumps(document))
        from_state = json.loads(open(cmd_evaluate(str(bare), sim["truth"], out=str(tmp_path / "b"))["metrics"]).read())
        assert from_state["shd_target"] == with_graphs["shd_target"]
        assert from_state["shd_m"] == with_graphs["shd_m"]
