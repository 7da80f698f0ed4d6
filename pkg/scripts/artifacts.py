#!/usr/bin/env python3
"""
Experiment artifacts: resumable JSONL run ledger and atomically written CSV/JSON tables.

The ledger is append-only and written by a single consumer (the orchestrating
process). On --resume, completed (spec_hash, run_index) records are reused and
only the missing indices are simulated.
"""

import csv
import io
import json
import os
from datetime import datetime
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence, Tuple

from logger_config import get_logger

logger = get_logger("artifacts")

LEDGER_VERSION = 1

SWEEP_COLUMNS = (
    "sweep_var", "t_m", "m_hat", "std_error", "n_samples", "n_failed",
    "converged", "stop_reason", "config_hash", "tool_version",
)
CHSH_COLUMNS = (
    "term", "alpha", "beta", "value", "std_error", "n_samples", "n_failed",
    "converged", "verdict", "config_hash", "tool_version",
)
TRAJECTORY_COLUMNS = ("t", "x_A", "v_A", "x_B", "v_B", "config_hash", "tool_version")


def write_text_atomic(path: Path, text: str) -> Path:
    """Write text to path through a temp file and an atomic rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp = path.with_suffix(path.suffix + ".tmp")
    try:
        with open(temp, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        temp.replace(path)
    except Exception:
        if temp.exists():
            temp.unlink()
        raise
    return path


def write_json_atomic(path: Path, data: Dict) -> Path:
    return write_text_atomic(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def write_csv_atomic(path: Path, columns: Sequence[str], rows: Iterable[Dict]) -> Path:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _cell(v) for k, v in row.items()})
    written = write_text_atomic(path, buffer.getvalue())
    logger.info(f"Wrote {written}")
    return written


def _cell(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return value


def write_sweep_csv(path: Path, table, config_hash: str, tool_version: str) -> Path:
    """One row per sweep cell; unconverged cells carry converged=false."""
    rows = [
        {
            "sweep_var": row.sweep_var,
            "t_m": row.t_m,
            "m_hat": row.m_hat,
            "std_error": row.std_error,
            "n_samples": row.n_samples,
            "n_failed": row.n_failed,
            "converged": row.converged,
            "stop_reason": row.stop_reason,
            "config_hash": config_hash,
            "tool_version": tool_version,
        }
        for row in table.rows
    ]
    return write_csv_atomic(path, SWEEP_COLUMNS, rows)


def write_chsh_csv(path: Path, experiment, config_hash: str, tool_version: str) -> Path:
    """Four correlation rows followed by the S row; the verdict sits on the S row."""
    rows = []
    for label, alpha, beta in experiment.settings.pairs():
        est = experiment.estimates[label]
        rows.append(
            {
                "term": f"M({label})",
                "alpha": alpha,
                "beta": beta,
                "value": est.m_hat,
                "std_error": est.std_error,
                "n_samples": est.n_samples,
                "n_failed": est.n_failed,
                "converged": est.converged,
                "verdict": "",
                "config_hash": config_hash,
                "tool_version": tool_version,
            }
        )
    estimates = experiment.estimates.values()
    rows.append(
        {
            "term": "S",
            "alpha": "",
            "beta": "",
            "value": experiment.result.s_value,
            "std_error": experiment.result.s_error,
            "n_samples": sum(e.n_samples for e in estimates),
            "n_failed": sum(e.n_failed for e in estimates),
            "converged": all(e.converged for e in estimates),
            "verdict": experiment.verdict.verdict,
            "config_hash": config_hash,
            "tool_version": tool_version,
        }
    )
    return write_csv_atomic(path, CHSH_COLUMNS, rows)


def write_trajectory_csv(path: Path, samples, config_hash: str, tool_version: str) -> Path:
    rows = (
        {
            "t": s.t, "x_A": s.x_a, "v_A": s.v_a, "x_B": s.x_b, "v_B": s.v_b,
            "config_hash": config_hash, "tool_version": tool_version,
        }
        for s in samples
    )
    return write_csv_atomic(path, TRAJECTORY_COLUMNS, rows)


class RunLedger:
    """
    Append-only JSONL ledger of completed runs.

    Line types:
        {"type": "header", ...}  written once per session with the resolved config
        {"type": "run", "spec_hash": ..., "run_index": ..., ...}

    Args:
        path: Ledger file location
        resume: Reuse existing records instead of starting a fresh ledger
    """

    def __init__(self, path: Path, resume: bool = False):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._records: Dict[Tuple[str, int], Dict] = {}
        if resume and self.path.exists():
            self._load()
        elif self.path.exists():
            logger.info(f"Starting a fresh ledger, replacing {self.path}")
            self.path.unlink()

    def _load(self) -> None:
        skipped = 0
        with open(self.path, "r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError:
                    # Interrupted write; the run is simply redone
                    skipped += 1
                    continue
                if record.get("type") == "run":
                    self._records[(record["spec_hash"], int(record["run_index"]))] = record
        if skipped:
            logger.warning(f"Ignored {skipped} unreadable ledger line(s) in {self.path}")
        logger.info(f"Resuming from {self.path}: {len(self._records)} completed run(s)")

    def __len__(self) -> int:
        return len(self._records)

    def get(self, spec_hash: str, run_index: int) -> Optional[Dict]:
        return self._records.get((spec_hash, int(run_index)))

    def _write_lines(self, records: Sequence[Dict]) -> None:
        if not records:
            return
        with open(self.path, "a", encoding="utf-8") as f:
            for record in records:
                f.write(json.dumps(record, sort_keys=True) + "\n")
            f.flush()
            os.fsync(f.fileno())

    def write_header(self, config: Dict, config_hash: str, tool_version: str, command: str) -> None:
        header = {
            "type": "header",
            "ledger_version": LEDGER_VERSION,
            "command": command,
            "config_hash": config_hash,
            "tool_version": tool_version,
            "started": datetime.now().isoformat(),
            "config": config,
        }
        self._write_lines([header])

    def append_many(self, records: Iterable[Dict]) -> None:
        batch = []
        for record in records:
            record = {"type": "run", **record}
            self._records[(record["spec_hash"], int(record["run_index"]))] = record
            batch.append(record)
        self._write_lines(batch)

    def append(self, record: Dict) -> None:
        self.append_many([record])
