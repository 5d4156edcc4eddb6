"""Experiment driver: sweeps, aggregation, entropy maps and the CLI."""
from .aggregate import TradeoffRow, aggregate_tradeoff
from .entropy import EntropyMap, entropy_map, policy_entropy
from .records import RunData, load_run, write_run
from .sweep import SweepConfig, run_sweep, verify_manifest
