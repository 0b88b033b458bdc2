"""
Benchmark sweep: simulate, fit and score every method over the grid of
missing rates, seeds and the optional extra axes.
"""

import dataclasses
import itertools
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from datetime import datetime, timedelta
from typing import Any, Dict, List, Optional

from tqdm import tqdm

from em_trainer import TrainConfig
from shared.config import to_dict
from shared.manifest import config_hash
from shared.output_utils import save_table, write_json_document
from synthetic_bench import InstanceSpec, gen_instance, simulate_complete

from .baselines import fit_method
from .config import SweepConfig
from .evaluation import evaluate_state

logger = logging.getLogger(__name__)

BASE_COLUMNS = ["rate", "seed"]
RESULT_COLUMNS = ["method", "shd_target", "shd_m", "seconds", "error"]


@dataclasses.dataclass(frozen=True)
class SweepCell:
    """One instance of the grid; every method is scored on it."""

    rate: float
    seed: int
    n_per_intervention: Optional[int] = None
    max_parents: Optional[int] = None

    @property
    def key(self) -> str:
        return f"rate={self.rate!r}|seed={self.seed}|n={self.n_per_intervention}|parents={self.max_parents}"

    def instance(self, base: InstanceSpec) -> InstanceSpec:
        changes: Dict[str, Any] = {"missing_rate": self.rate, "seed": base.seed + self.seed}
        if self.n_per_intervention is not None:
            changes["n_per_intervention"] = self.n_per_intervention
        if self.max_parents is not None:
            changes["max_parents"] = self.max_parents
        return dataclasses.replace(base, **changes)


def sweep_columns(sweep: SweepConfig) -> List[str]:
    columns = list(BASE_COLUMNS)
    if sweep.n_per_intervention:
        columns.append("n_per_intervention")
    if sweep.max_parents:
        columns.append("max_parents")
    return columns + RESULT_COLUMNS


def sweep_cells(sweep: SweepConfig) -> List[SweepCell]:
    """Grid cells in table order: rate, seed, then the extra axes."""
    sizes = sweep.n_per_intervention or [None]
    parents = sweep.max_parents or [None]
    return [
        SweepCell(float(rate), seed, n, p)
        for rate, seed, n, p in itertools.product(sweep.missing_rates, range(sweep.seeds), sizes, parents)
    ]


def run_cell(cell: SweepCell, instance: InstanceSpec, train: TrainConfig, methods: List[str], threads: int = 1) -> List[Dict[str, Any]]:
    """
    Simulate one instance and score every method on it.

    A failing method yields a row with its error message; the other methods still run.
    """
    spec = cell.instance(instance)
    truth = gen_instance(spec)
    data, complete_values = simulate_complete(truth, spec, threads=threads)
    cfg = dataclasses.replace(train, seed=spec.seed, threads=threads)
    rows = []
    for method in methods:
        row: Dict[str, Any] = {"cell": cell.key, "rate": cell.rate, "seed": cell.seed, "method": method}
        if method == "complete_data":
            row["rate"] = 0.0
        if cell.n_per_intervention is not None:
            row["n_per_intervention"] = cell.n_per_intervention
        if cell.max_parents is not None:
            row["max_parents"] = cell.max_parents
        start = time.perf_counter()
        try:
            state, _ = fit_method(method, data, cfg, complete_values)
            metrics = evaluate_state(state, truth.target, truth.m_edges, cfg.edge_threshold)
            row.update(shd_target=metrics["shd_target"], shd_m=metrics["shd_m"], error="")
        except Exception as e:
            logger.warning(f"{cell.key} {method}: {e}")
            row.update(shd_target=None, shd_m=None, error=f"{type(e).__name__}: {e}")
        row["seconds"] = round(time.perf_counter() - start, 3)
        rows.append(row)
    return rows


def save_checkpoint(checkpoint_file: str, fingerprint: str, total: int, completed: List[str], rows: List[Dict[str, Any]], errors=None) -> None:
    """Save current progress to checkpoint file."""
    data = {
        "timestamp": datetime.now().isoformat(),
        "config_sha256": fingerprint,
        "total_cells": total,
        "completed_cells": completed,
        "rows": rows,
        "errors": errors or [],
    }
    try:
        write_json_document(checkpoint_file, data, atomic=True)
        print(f"Checkpoint saved: {len(completed)}/{total} cells completed.")
    except (OSError, TypeError, ValueError) as e:
        print(f"Warning: Failed to save checkpoint: {e}")


def load_checkpoint(checkpoint_file: str, fingerprint: str, ttl_hours: int = 48) -> Optional[Dict[str, Any]]:
    """Load checkpoint data if valid, recent and written for the same configuration."""
    if not os.path.exists(checkpoint_file):
        return None
    try:
        with open(checkpoint_file, "r", encoding="utf-8") as f:
            data = json.load(f)
        timestamp = datetime.fromisoformat(data["timestamp"])
        if ttl_hours > 0 and datetime.now() - timestamp > timedelta(hours=ttl_hours):
            print(f"Checkpoint expired ({ttl_hours}h TTL). Starting fresh sweep.")
            return None
        if data["config_sha256"] != fingerprint:
            print("Checkpoint belongs to a different configuration. Starting fresh sweep.")
            return None
        return data
    except (json.JSONDecodeError, KeyError, ValueError) as e:
        print(f"Warning: Checkpoint file is corrupted or incompatible ({e}). Starting fresh sweep.")
        return None


def run_sweep(
    instance: InstanceSpec,
    train: TrainConfig,
    sweep: SweepConfig,
    output_path: str,
    checkpoint_file: Optional[str] = None,
    resume: bool = False,
    workers: int = 1,
    progress: bool = True,
) -> Dict[str, Any]:
    """
    Run every cell of the sweep and write the long-format table.

    Args:
        instance: Base instance; rate, seed and the extra axes are overridden per cell
        train: Training configuration shared by all methods
        sweep: Grid and methods
        output_path: CSV destination
        checkpoint_file: Progress file saved after each cell (None disables checkpointing)
        resume: Continue from a matching checkpoint
        workers: Cells run concurrently
        progress: Show a progress bar

    Returns:
        Summary with cell, row and error counts
    """
    cells = sweep_cells(sweep)
    order = {cell.key: i for i, cell in enumerate(cells)}
    fingerprint = config_hash({"instance": to_dict(instance), "train": to_dict(train), "sweep": to_dict(sweep)})

    completed: List[str] = []
    rows: List[Dict[str, Any]] = []
    errors: List[Dict[str, str]] = []
    if checkpoint_file and resume:
        checkpoint_data = load_checkpoint(checkpoint_file, fingerprint, sweep.checkpoint_ttl_hours)
        if checkpoint_data:
            completed = list(checkpoint_data["completed_cells"])
            rows = list(checkpoint_data["rows"])
            errors = list(checkpoint_data.get("errors", []))
            print(f"Resuming from checkpoint: skipping {len(completed)} of {len(cells)} cells")
    pending = [cell for cell in cells if cell.key not in set(completed)]

    lock = threading.Lock()
    inner_threads = 1 if workers > 1 else train.threads
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        future_to_cell = {executor.submit(run_cell, cell, instance, train, sweep.methods, inner_threads): cell for cell in pending}
        with tqdm(total=len(cells), initial=len(completed), desc="Cells", disable=not progress) as pbar:
            for future in as_completed(future_to_cell):
                cell = future_to_cell[future]
                try:
                    cell_rows = future.result()
                    with lock:
                        rows.extend(cell_rows)
                        completed.append(cell.key)
                        errors.extend({"cell": cell.key, "method": r["method"], "error": r["error"]} for r in cell_rows if r["error"])
                        if checkpoint_file:
                            save_checkpoint(checkpoint_file, fingerprint, len(cells), completed, rows, errors)
                except Exception as e:
                    with lock:
                        errors.append({"cell": cell.key, "method": "*", "error": str(e)})
                        rows.extend(
                            {"cell": cell.key, "rate": cell.rate, "seed": cell.seed, "method": m, "seconds": 0.0, "error": f"{type(e).__name__}: {e}"}
                            for m in sweep.methods
                        )
                        logger.warning(f"{cell.key}: FAILED -- {e}")
                pbar.update(1)

    methods = {m: i for i, m in enumerate(sweep.methods)}
    rows.sort(key=lambda r: (order[r["cell"]], methods[r["method"]]))
    save_table(rows, output_path, sweep_columns(sweep))

    if checkpoint_file and os.path.exists(checkpoint_file):
        os.remove(checkpoint_file)
    if errors:
        print(f"\nFAILED ({len(errors)}):")
        for err in errors:
            print(f"  - {err['cell']} {err['method']}: {err['error']}")
    return {"cells": len(cells), "rows": len(rows), "failed_rows": len(errors), "table": output_path}
