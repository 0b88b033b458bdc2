"""
The four command-line commands: simulate, fit, evaluate and benchmark.

Each command writes its outputs plus a ``<command>_manifest.json`` into the
output directory and prints a summary.
"""

import dataclasses
import os
from typing import Any, Dict, List, Optional

import numpy as np

from em_trainer import (
    FitState,
    TrainConfig,
    extract_graph,
    run_em_dag,
    save_state,
    state_from_document,
    train_config_from_document,
    write_acceptance,
    write_history,
)
from sem_engine import expected_mask, read_document
from shared.base_command import BaseCommand
from shared.config import BaseConfig, to_dict
from shared.constants import DEFAULT_EDGE_THRESHOLD
from shared.exceptions import ConfigError
from shared.manifest import file_sha256
from shared.output_utils import save_table, write_json_document
from synthetic_bench import (
    gen_instance,
    graph_sections,
    graphs_from_sections,
    read_dataset,
    simulate,
    split_dataset,
    write_dataset,
    write_truth,
)
from target_likelihood import estimator_diagnostics
from target_likelihood.config import DEFAULT_DIAGNOSTIC_REPEATS

from .benchmark import run_sweep
from .config import ExperimentConfig, load_experiment
from .evaluation import evaluate_state, graph_metrics, heldout_loglik

DIAGNOSTIC_RECORDS = 10
DIAGNOSTIC_COLUMNS = ["record", "repeats", "mean", "se", "mean_terms", "exact"]
# stream tag for the diagnostics draws, next to the trainer's E/M/eval tags
_DIAGNOSTIC_STREAM = 4


class SimulateCommand(BaseCommand):
    """Generate an instance, simulate its coarsened interventional dataset and write both."""

    name = "simulate"

    def __init__(self, config: ExperimentConfig, progress: bool = True):
        super().__init__(config, progress)
        self.spec = config.instance

    def execute(self) -> Dict[str, Any]:
        truth = gen_instance(self.spec)
        data = simulate(truth, self.spec, threads=self.config.threads)
        self.files["dataset"] = write_dataset(data, self.output_path("dataset"))
        self.files["truth"] = write_truth(truth, self.spec, self.output_path("truth"))
        if self.config.test_fraction:
            train, test = split_dataset(data, self.config.test_fraction, seed=self.spec.seed)
            self.files["train_split"] = write_dataset(train, self.output_path("train_split"))
            self.files["test_split"] = write_dataset(test, self.output_path("test_split"))
        return {
            "records": data.n,
            "nodes": data.k,
            "target_edges": truth.target.num_edges,
            "m_edges": truth.m_edges.num_edges,
            "missing_rate": data.missing_rate,
            "spec_hash": self.spec.spec_hash(),
        }

    def manifest_config(self) -> Dict[str, Any]:
        return {"instance": to_dict(self.spec), "test_fraction": self.config.test_fraction}

    def manifest_seed(self) -> Optional[int]:
        return self.spec.seed

    def manifest_extra(self) -> Dict[str, Any]:
        return {"spec_hash": self.spec.spec_hash()}


class FitCommand(BaseCommand):
    """Run penalized EM on a dataset file and write checkpoint, history and acceptance tables."""

    name = "fit"

    def __init__(
        self,
        config: ExperimentConfig,
        dataset_path: str,
        pre_imputed: bool = False,
        diagnostics: bool = False,
        progress: bool = True,
    ):
        super().__init__(config, progress)
        self.train: TrainConfig = config.train
        self.dataset_path = dataset_path
        self.pre_imputed = pre_imputed
        self.diagnostics = diagnostics
        self.provenance = ""

    def execute(self) -> Dict[str, Any]:
        data = read_dataset(self.dataset_path, pre_imputed=self.pre_imputed)
        self.logger.info(f"Fitting {self.train.model} model on {data.n} records, K={data.k}")
        state = run_em_dag(data, self.train, progress=self.progress)
        target, m_edges = extract_graph(state, self.train.edge_threshold)

        self.provenance = file_sha256(self.dataset_path)
        dataset_section = {
            "file": os.path.basename(self.dataset_path),
            "sha256": self.provenance,
            "records": data.n,
            "pre_imputed": self.pre_imputed,
        }
        self.files["checkpoint"] = save_state(
            state,
            self.output_path("checkpoint"),
            self.train,
            extra={"graphs": graph_sections(target, m_edges), "dataset": dataset_section},
        )
        self.files["history"] = write_history(state, self.output_path("history"))
        self.files["acceptance"] = write_acceptance(state, self.output_path("acceptance"))
        if self.diagnostics:
            self.files["diagnostics"] = self.write_diagnostics(state, data)

        last = state.history[-1] if state.history else {}
        return {
            "records": data.n,
            "epochs": state.epoch,
            "objective": last.get("objective", float("nan")),
            "target_edges": target.num_edges,
            "m_edges": m_edges.num_edges,
        }

    def write_diagnostics(self, state: FitState, data) -> str:
        """Log-det estimator diagnostics at the first complete records."""
        rows: List[Dict[str, Any]] = []
        complete = np.flatnonzero(data.complete_rows)[:DIAGNOSTIC_RECORDS]
        if complete.size == 0:
            self.logger.warning("No complete records; diagnostics table is empty")
        rng = np.random.default_rng([self.train.seed, _DIAGNOSTIC_STREAM])
        mask = expected_mask(state.mask)
        iv = data.interventions()
        for i in complete:
            report = estimator_diagnostics(state.model, mask, data.y[i], iv.rows(i), self.train.logdet, DEFAULT_DIAGNOSTIC_REPEATS, rng)
            rows.append({"record": int(i), **report})
        return save_table(rows, self.output_path("diagnostics"), DIAGNOSTIC_COLUMNS)

    def manifest_config(self) -> Dict[str, Any]:
        return {"train": to_dict(self.train), "dataset": os.path.basename(self.dataset_path), "pre_imputed": self.pre_imputed}

    def manifest_seed(self) -> Optional[int]:
        return self.train.seed

    def manifest_extra(self) -> Dict[str, Any]:
        return {"dataset_sha256": self.provenance}


class EvaluateCommand(BaseCommand):
    """Score a checkpoint's graphs against a truth sidecar."""

    name = "evaluate"

    def __init__(
        self,
        config: BaseConfig,
        checkpoint_path: str,
        truth_path: str,
        test_path: Optional[str] = None,
        progress: bool = True,
    ):
        super().__init__(config, progress)
        self.checkpoint_path = checkpoint_path
        self.truth_path = truth_path
        self.test_path = test_path
        self.train: Optional[TrainConfig] = None

    def execute(self) -> Dict[str, Any]:
        document = read_document(self.checkpoint_path)
        self.train = train_config_from_document(document)
        threshold = self.train.edge_threshold if self.train is not None else DEFAULT_EDGE_THRESHOLD
        truth_target, truth_m = graphs_from_sections(read_document(self.truth_path))
        test = read_dataset(self.test_path) if self.test_path else None

        if "graphs" in document:
            target, m_edges = graphs_from_sections(document)
            metrics = graph_metrics(target, m_edges, truth_target, truth_m)
            if test is not None:
                metrics["heldout_loglik"] = heldout_loglik(state_from_document(document), test, self.train)
        else:
            metrics = evaluate_state(state_from_document(document), truth_target, truth_m, threshold, test, self.train)
        self.files["metrics"] = write_json_document(self.output_path("metrics"), metrics)
        return metrics

    def manifest_config(self) -> Dict[str, Any]:
        return {
            "checkpoint": os.path.basename(self.checkpoint_path),
            "truth": os.path.basename(self.truth_path),
            "test": os.path.basename(self.test_path) if self.test_path else None,
        }

    def manifest_seed(self) -> Optional[int]:
        return self.train.seed if self.train is not None else None

    def manifest_extra(self) -> Dict[str, Any]:
        return {
            "inputs": {
                "checkpoint_sha256": file_sha256(self.checkpoint_path),
                "truth_sha256": file_sha256(self.truth_path),
            }
        }


class BenchmarkCommand(BaseCommand):
    """Run the sweep grid and write the long-format results table."""

    name = "benchmark"

    def __init__(self, config: ExperimentConfig, resume: bool = False, checkpoint: bool = True, progress: bool = True):
        super().__init__(config, progress)
        if config.sweep is None:
            raise ConfigError("benchmark needs a 'sweep' section", field="sweep")
        self.sweep = config.sweep
        self.resume = resume
        self.checkpoint = checkpoint

    def execute(self) -> Dict[str, Any]:
        checkpoint_file = self.output_path("sweep_checkpoint") if self.checkpoint else None
        summary = run_sweep(
            self.config.instance,
            self.config.train,
            self.sweep,
            self.output_path("sweep"),
            checkpoint_file=checkpoint_file,
            resume=self.resume,
            workers=self.config.threads,
            progress=self.progress,
        )
        self.files["sweep"] = summary.pop("table")
        return summary

    def manifest_config(self) -> Dict[str, Any]:
        return {"instance": to_dict(self.config.instance), "train": to_dict(self.config.train), "sweep": to_dict(self.sweep)}

    def manifest_seed(self) -> Optional[int]:
        return self.config.instance.seed


def cmd_simulate(config_path: Optional[str], out: Optional[str] = None, seed: Optional[int] = None, threads: Optional[int] = None, progress: bool = True) -> Dict[str, str]:
    """Simulate a dataset and its truth sidecar; returns the written files by role."""
    config = load_experiment(config_path, output_dir=out, threads=threads, seed=seed)
    return SimulateCommand(config, progress=progress).run()


def cmd_fit(
    dataset_path: str,
    config_path: Optional[str],
    out: Optional[str] = None,
    pre_imputed: bool = False,
    diagnostics: bool = False,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
    progress: bool = True,
) -> Dict[str, str]:
    """Fit a model to a dataset file; returns the written files by role."""
    config = load_experiment(config_path, output_dir=out, threads=threads, seed=seed)
    return FitCommand(config, dataset_path, pre_imputed=pre_imputed, diagnostics=diagnostics, progress=progress).run()


def cmd_evaluate(checkpoint_path: str, truth_path: str, out: Optional[str] = None, test_path: Optional[str] = None) -> Dict[str, str]:
    """Score a checkpoint against a truth sidecar; returns the written files by role."""
    config = BaseConfig(output_directory=out) if out else BaseConfig()
    return EvaluateCommand(config, checkpoint_path, truth_path, test_path=test_path).run()


def cmd_benchmark(
    config_path: Optional[str],
    out: Optional[str] = None,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
    resume: bool = False,
    checkpoint: bool = True,
    checkpoint_ttl_hours: Optional[int] = None,
    progress: bool = True,
) -> Dict[str, str]:
    """Run the benchmark sweep; returns the written files by role."""
    config = load_experiment(config_path, output_dir=out, threads=threads, seed=seed)
    if config.sweep is not None and checkpoint_ttl_hours is not None:
        config.sweep = dataclasses.replace(config.sweep, checkpoint_ttl_hours=checkpoint_ttl_hours)
    return BenchmarkCommand(config, resume=resume, checkpoint=checkpoint, progress=progress).run()
