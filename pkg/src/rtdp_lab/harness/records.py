"""On-disk run artifacts: ``run.csv``, ``run.json``, ``checkpoint.bin``, ``entropy_map.csv``.

``run.csv`` columns: ``episode,real_steps,traces,seconds,return``. The
``seconds`` column is left empty for trace-budgeted runs so the file is
byte-reproducible; ``run.json`` carries the run's metadata, including the
consumed budget used for windowed aggregation.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..agent import RunRecord
from ..net import checkpoint

RUN_SCHEMA = 1
RUN_COLUMNS = ("episode", "real_steps", "traces", "seconds", "return")
ENTROPY_COLUMNS = ("episode", "x", "y", "entropy")


def fmt(x: float) -> str:
    """Shortest round-trip float text."""
    return repr(float(x))


@dataclass(frozen=True)
class RunData:
    """What aggregation needs from one run, from memory or from disk."""

    n_mcts: int
    seed: int
    budget_mode: str
    consumed: float
    positions: np.ndarray  # cumulative budget at each episode end
    returns: np.ndarray

    @classmethod
    def from_record(cls, rec: RunRecord) -> "RunData":
        return cls(rec.config.search.n_mcts, rec.seed, rec.config.budget.mode, rec.consumed,
                   rec.budget_positions(), rec.returns)


def run_csv_text(rec: RunRecord) -> str:
    timed = rec.config.budget.mode == "wall_clock_seconds"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RUN_COLUMNS)
    for r in rec.rows:
        w.writerow([r.episode, r.real_steps, r.traces, fmt(r.seconds) if timed else "", fmt(r.ret)])
    return buf.getvalue()


def run_metadata(rec: RunRecord) -> dict:
    partial = None
    if rec.partial is not None:
        p = rec.partial
        partial = {"episode": p.episode, "real_steps": p.real_steps, "traces": p.traces,
                   "return": p.ret, "truncated": True}
    return {
        "schema": RUN_SCHEMA,
        "env": rec.config.env,
        "n_mcts": rec.config.search.n_mcts,
        "seed": rec.seed,
        "budget_mode": rec.config.budget.mode,
        "budget_amount": rec.config.budget.amount,
        "consumed": rec.consumed,
        "real_steps": rec.real_steps,
        "traces": rec.traces,
        "episodes": len(rec.rows),
        "partial_episode": partial,
        "config": rec.config.to_dict(),
    }


def entropy_csv_text(maps) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ENTROPY_COLUMNS)
    for m in maps:
        for x, y, h in zip(m.x, m.y, m.entropy):
            w.writerow([m.episode, fmt(x), fmt(y), fmt(h)])
    return buf.getvalue()


def write_run(rec: RunRecord, out_dir) -> list:
    """Write every artifact of one run; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    (out / "run.csv").write_text(run_csv_text(rec), encoding="utf-8")
    written.append(out / "run.csv")
    meta = run_metadata(rec)
    (out / "run.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(out / "run.json")
    checkpoint.save(rec.params, out / "checkpoint.bin")
    written.append(out / "checkpoint.bin")
    if rec.entropy_maps:
        (out / "entropy_map.csv").write_text(entropy_csv_text(rec.entropy_maps), encoding="utf-8")
        written.append(out / "entropy_map.csv")
    return written


def read_run_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RUN_COLUMNS:
            raise ValueError(f"{path}: expected columns {RUN_COLUMNS}, got {reader.fieldnames}")
        return list(reader)


def load_run(run_dir) -> RunData:
    run_dir = Path(run_dir)
    rows = read_run_csv(run_dir / "run.csv")
    meta = json.loads((run_dir / "run.json").read_text(encoding="utf-8"))
    col = "traces" if meta["budget_mode"] == "total_traces" else "seconds"
    return RunData(
        n_mcts=int(meta["n_mcts"]),
        seed=int(meta["seed"]),
        budget_mode=meta["budget_mode"],
        consumed=float(meta["consumed"]),
        positions=np.array([float(r[col]) for r in rows]),
        returns=np.array([float(r["return"]) for r in rows]),
    )
