"""Final-performance estimate per planning budget: mean return over the last slice of budget."""
from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from ..mdp import ContractViolation
from .records import RunData, fmt

TRADEOFF_COLUMNS = ("n_mcts", "seed", "last_fraction_return", "mean", "min", "max")


@dataclass(frozen=True)
class TradeoffRow:
    n_mcts: int
    per_seed: dict  # seed -> windowed mean return, or None when the window was empty
    mean: float
    min: float
    max: float

    @property
    def flagged(self) -> list:
        return sorted(s for s, v in self.per_seed.items() if v is None)


def window_mask(run: RunData, fraction: float, tail: bool = True) -> np.ndarray:
    """Episodes finishing in the last (or first) ``fraction`` of the consumed budget."""
    if tail:
        return run.positions > (1.0 - fraction) * run.consumed
    return run.positions <= fraction * run.consumed


def windowed_return(run: RunData, fraction: float, tail: bool = True):
    mask = window_mask(run, fraction, tail)
    if not mask.any():
        return None
    return float(run.returns[mask].mean())


def aggregate_tradeoff(runs, fraction: float = 0.15) -> list:
    """One ``TradeoffRow`` per ``n_mcts`` (ascending); seeds with empty windows are flagged."""
    if not 0.0 < fraction < 1.0:
        raise ContractViolation("fraction must lie in (0, 1)")
    groups = defaultdict(dict)
    for run in runs:
        run = run if isinstance(run, RunData) else RunData.from_record(run)
        groups[run.n_mcts][run.seed] = windowed_return(run, fraction)
    rows = []
    for n in sorted(groups):
        per_seed = dict(sorted(groups[n].items()))
        vals = [v for v in per_seed.values() if v is not None]
        if vals:
            rows.append(TradeoffRow(n, per_seed, float(np.mean(vals)), min(vals), max(vals)))
        else:
            rows.append(TradeoffRow(n, per_seed, float("nan"), float("nan"), float("nan")))
    return rows


def tradeoff_csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRADEOFF_COLUMNS)
    for row in rows:
        for seed, v in row.per_seed.items():
            w.writerow([row.n_mcts, seed, "" if v is None else fmt(v),
                        fmt(row.mean), fmt(row.min), fmt(row.max)])
    return buf.getvalue()
