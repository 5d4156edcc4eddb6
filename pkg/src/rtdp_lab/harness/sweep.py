"""Sweep the per-step planning budget under a fixed total budget, with repetitions."""
from __future__ import annotations

import hashlib
import json
import logging
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..agent import AgentConfig, BudgetSpec, run_training
from ..mdp import ContractViolation
from .aggregate import aggregate_tradeoff, tradeoff_csv_text
from .records import RunData, load_run, write_run

log = logging.getLogger(__name__)

MANIFEST_SCHEMA = 1
WORKERS_ENV = "RTDP_LAB_WORKERS"


@dataclass(frozen=True)
class SweepConfig:
    env: str = "cartpole"
    n_mcts_values: tuple = (4, 8, 16, 32, 64, 128)
    repetitions: int = 3
    budget: BudgetSpec = field(default_factory=BudgetSpec)
    base_seed: int = 0
    out_dir: str = "results"
    aggregation_fraction: float = 0.15
    agent_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        values = tuple(int(n) for n in self.n_mcts_values)
        object.__setattr__(self, "n_mcts_values", values)
        if not values or min(values) < 1 or len(set(values)) != len(values):
            raise ContractViolation("n_mcts values must be positive and distinct")
        if self.repetitions < 1:
            raise ContractViolation("repetitions must be >= 1")
        if not 0.0 < self.aggregation_fraction < 1.0:
            raise ContractViolation("aggregation_fraction must lie in (0, 1)")

    def seeds(self) -> list:
        return [self.base_seed + rep for rep in range(self.repetitions)]

    def agent_config(self, n_mcts: int) -> AgentConfig:
        return AgentConfig.for_env(self.env, n_mcts=n_mcts, budget=self.budget,
                                   **dict(self.agent_overrides))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_mcts_values"] = list(self.n_mcts_values)
        d.pop("out_dir")  # where results land does not change them
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class SweepResult:
    runs: list  # RunData per successful run
    rows: list  # TradeoffRow per n_mcts
    failures: list
    manifest_path: Path


def run_dir_name(n_mcts: int, seed: int) -> str:
    return f"n{n_mcts:04d}_seed{seed}"


def _run_job(job):
    config, n_mcts, seed, out_dir = job
    try:
        rec = run_training(config.agent_config(n_mcts), seed)
        paths = write_run(rec, Path(out_dir) / run_dir_name(n_mcts, seed))
        return n_mcts, seed, [str(p) for p in paths], RunData.from_record(rec), None
    except Exception:  # one crashed run must not sink the sweep
        return n_mcts, seed, [], None, traceback.format_exc()


def ensure_writable(out_dir) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("ok")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc
    return out


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def resolve_workers(workers: int | None = None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    return max(1, int(workers))


def run_sweep(config: SweepConfig, workers: int | None = None, progress=None) -> SweepResult:
    """Run every (n_mcts, seed) pair, write per-run artifacts, ``tradeoff.csv`` and ``manifest.json``."""
    out = ensure_writable(config.out_dir)
    jobs = [(config, n, s, str(out)) for n in config.n_mcts_values for s in config.seeds()]
    workers = resolve_workers(workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = []
        for job in jobs:
            results.append(_run_job(job))
            if progress is not None:
                progress(results[-1])

    runs, files, failures = [], [], []
    for n, seed, paths, data, error in results:
        if error is not None:
            log.error("run n_mcts=%d seed=%d failed:\n%s", n, seed, error)
            failures.append({"n_mcts": n, "seed": seed, "error": error.strip().splitlines()[-1]})
            continue
        runs.append(data)
        files.extend(paths)

    rows = aggregate_tradeoff(runs, config.aggregation_fraction)
    tradeoff = out / "tradeoff.csv"
    tradeoff.write_text(tradeoff_csv_text(rows), encoding="utf-8")
    files.append(str(tradeoff))
    manifest = write_manifest(out, config, files, failures)
    return SweepResult(runs, rows, failures, manifest)


def write_manifest(out: Path, config: SweepConfig, files, failures) -> Path:
    entries = [{"path": Path(p).relative_to(out).as_posix(), "sha256": sha256_file(p)}
               for p in sorted(files)]
    doc = {
        "schema": MANIFEST_SCHEMA,
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "files": entries,
        "failures": failures,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def verify_manifest(out_dir) -> list:
    """Problems found when re-hashing a sweep directory (empty list = consistent)."""
    out = Path(out_dir)
    try:
        doc = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        return [f"cannot read manifest: {exc}"]
    problems = []
    for entry in doc.get("files", []):
        path = out / entry["path"]
        if not path.exists():
            problems.append(f"missing: {entry['path']}")
        elif sha256_file(path) != entry["sha256"]:
            problems.append(f"hash mismatch: {entry['path']}")
    listed = {e["path"] for e in doc.get("files", [])}
    for path in sorted(out.rglob("*")):
        rel = path.relative_to(out).as_posix()
        if path.is_file() and rel != "manifest.json" and rel not in listed:
            problems.append(f"unlisted: {rel}")
    return problems


def reaggregate(out_dir, fraction: float = 0.15) -> str:
    """Recompute ``tradeoff.csv`` text from the run directories alone."""
    out = Path(out_dir)
    runs = [load_run(p.parent) for p in sorted(out.glob("*/run.csv"))]
    if not runs:
        raise FileNotFoundError(f"no run directories under {out}")
    return tradeoff_csv_text(aggregate_tradeoff(runs, fraction))
