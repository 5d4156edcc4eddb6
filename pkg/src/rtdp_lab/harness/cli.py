"""Command-line entry point: ``rtdp-lab <subcommand> [flags]``.

Every flag can also come from ``--config FILE`` (JSON or TOML), keyed by the
flag name with dashes or underscores (``n_mcts = 8`` or ``"n-mcts": 8``).
Flags given on the command line win over the file.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..agent import BUDGET_MODES, COMMIT_MODES, AgentConfig, BudgetSpec, greedy_rollouts, run_training
from ..envs import ENV_NAMES, make_env
from ..mcts import UNVISITED_RULES, VARIANTS, SearchConfig
from ..mdp import ContractViolation
from ..net import checkpoint
from ..oracle import NonConvergence, TabularMdp, greedy_policy, load_mdp_json, q_value_iteration
from .entropy import entropy_map
from .records import entropy_csv_text, fmt, write_run
from .sweep import SweepConfig, reaggregate, run_sweep, verify_manifest

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("rtdp_lab")

DEFAULTS = {
    "env": "cartpole",
    "n_mcts": None,
    "seed": 0,
    "seeds": 3,
    "base_seed": 0,
    "budget_traces": None,
    "budget_seconds": None,
    "out": None,
    "fraction": 0.15,
    "workers": None,
    "episodes": 10,
    "resolution": 21,
    "episode": 0,
    "tol": 1e-10,
    "max_iter": 100_000,
    "verbose": False,
}


class UsageError(Exception):
    pass


def _csv_ints(text) -> list:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from exc


def _agent_flags(p):
    g = p.add_argument_group("agent")
    g.add_argument("--env", choices=ENV_NAMES, help="task name (default cartpole)")
    g.add_argument("--budget-traces", type=float, metavar="N",
                   help="total MCTS traces for the whole run (default 200000)")
    g.add_argument("--budget-seconds", type=float, metavar="S",
                   help="wall-clock budget instead of a trace budget")
    g.add_argument("--gamma", type=float, help="discount (default: task value, 1.0)")
    g.add_argument("--c-start", type=float, help="initial exploration constant")
    g.add_argument("--c-end", type=float, help="final exploration constant")
    g.add_argument("--c-decay", type=int, metavar="STEPS", help="real steps of linear c decay")
    g.add_argument("--variant", choices=VARIANTS, help="selection formula")
    g.add_argument("--unvisited", choices=UNVISITED_RULES,
                   help="unvisited-edge rule: 'first' visits them before scoring, 'zero' scores Q=0")
    g.add_argument("--commit", choices=COMMIT_MODES, help="how the real action is chosen from root counts")
    g.add_argument("--train-steps", type=int, metavar="K", help="gradient steps per real step (default 1)")
    g.add_argument("--batch-size", type=int, help="minibatch size (default 16)")
    g.add_argument("--buffer", type=int, metavar="CAP", help="replay capacity (default 5000)")
    g.add_argument("--lr", type=float, help="ADAM learning rate (default 1e-3)")
    g.add_argument("--hidden", type=int, help="hidden units per layer (default 256)")
    g.add_argument("--entropy-every", type=int, metavar="K",
                   help="entropy-map snapshot every K episodes on 2-D tasks (0 = off)")
    g.add_argument("--env-overrides", type=json.loads, metavar="JSON",
                   help="task constants to override, as a JSON object")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rtdp-lab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", default=None, help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="one training run")
    p.add_argument("--config", help="JSON or TOML file with flag values")
    p.add_argument("--n-mcts", help="traces per real step (default 16)")
    p.add_argument("--seed", type=int, help="run seed (default 0)")
    p.add_argument("--out", help="output directory (required)")
    _agent_flags(p)

    p = sub.add_parser("sweep", help="sweep n_mcts under a fixed total budget")
    p.add_argument("--config", help="JSON or TOML file with flag values")
    p.add_argument("--n-mcts", help="comma-separated budgets (default 4,8,16,32,64,128)")
    p.add_argument("--seeds", type=int, help="repetitions per budget (default 3)")
    p.add_argument("--base-seed", type=int, help="seed of the first repetition (default 0)")
    p.add_argument("--fraction", type=float, help="aggregation window (default 0.15)")
    p.add_argument("--workers", type=int, help="process pool size (default $RTDP_LAB_WORKERS or 1)")
    p.add_argument("--out", help="output directory (required)")
    _agent_flags(p)

    p = sub.add_parser("eval", help="greedy rollouts from a checkpoint")
    p.add_argument("--config", help="JSON or TOML file with flag values")
    p.add_argument("--checkpoint", help="checkpoint.bin path (required)")
    p.add_argument("--env", choices=ENV_NAMES, help="task name (default cartpole)")
    p.add_argument("--episodes", type=int, help="number of episodes (default 10)")
    p.add_argument("--n-mcts", help="search traces per step; 0 acts on the policy head (default 16)")
    p.add_argument("--seed", type=int, help="rollout seed (default 0)")

    p = sub.add_parser("oracle", help="Q-value iteration on a JSON MDP file; prints Q as CSV")
    p.add_argument("--config", help="JSON or TOML file with flag values")
    p.add_argument("--mdp", help="MDP file (required)")
    p.add_argument("--gamma", type=float, help="discount (overrides the file)")
    p.add_argument("--tol", type=float, help="sup-norm stopping tolerance (default 1e-10)")
    p.add_argument("--max-iter", type=int, help="sweep limit (default 100000)")

    p = sub.add_parser("entropy-map", help="policy entropy over a 2-D state grid")
    p.add_argument("--config", help="JSON or TOML file with flag values")
    p.add_argument("--checkpoint", help="checkpoint.bin path (required)")
    p.add_argument("--env", choices=ENV_NAMES, help="task name (default cartpole)")
    p.add_argument("--resolution", type=int, help="grid points per axis (default 21)")
    p.add_argument("--episode", type=int, help="episode label for the output rows (default 0)")
    p.add_argument("--out", help="CSV path (default stdout)")

    p = sub.add_parser("aggregate", help="recompute tradeoff.csv from run directories")
    p.add_argument("--config", help="JSON or TOML file with flag values")
    p.add_argument("--out", help="sweep directory (required)")
    p.add_argument("--fraction", type=float, help="aggregation window (default 0.15)")

    p = sub.add_parser("verify", help="re-hash a sweep directory against its manifest")
    p.add_argument("--out", help="sweep directory (required)")
    return parser


def load_config_file(path) -> dict:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".toml":
            data = tomllib.loads(raw.decode("utf-8"))
        else:
            data = json.loads(raw)
    except (ValueError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("config file must hold a table / object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def resolve(args) -> argparse.Namespace:
    """Merge command line over config file over defaults."""
    given = {k: v for k, v in vars(args).items() if v is not None}
    from_file = load_config_file(args.config) if getattr(args, "config", None) else {}
    allowed = set(vars(args)) - {"command", "config"}
    unknown = set(from_file) - allowed
    if unknown:
        raise UsageError(f"unknown config keys for '{args.command}': {sorted(unknown)}")
    merged = {k: DEFAULTS.get(k) for k in allowed}
    merged.update(from_file)
    merged.update(given)
    return argparse.Namespace(**merged)


def _require(ns, *names):
    for name in names:
        if getattr(ns, name, None) in (None, ""):
            raise UsageError(f"--{name.replace('_', '-')} is required")


def _budget(ns) -> BudgetSpec:
    if ns.budget_traces is not None and ns.budget_seconds is not None:
        raise UsageError("give --budget-traces or --budget-seconds, not both")
    if ns.budget_seconds is not None:
        return BudgetSpec(BUDGET_MODES[1], float(ns.budget_seconds))
    return BudgetSpec(BUDGET_MODES[0], int(ns.budget_traces if ns.budget_traces is not None else 200_000))


def _agent_overrides(ns) -> dict:
    mapping = {
        "gamma": "gamma", "c_start": "c_start", "c_end": "c_end", "c_decay": "decay_steps",
        "variant": "selection_variant", "unvisited": "unvisited", "commit": "action_commit",
        "train_steps": "train_steps_per_real_step", "batch_size": "batch_size",
        "buffer": "buffer_capacity", "lr": "lr", "hidden": "hidden",
        "entropy_every": "entropy_every", "env_overrides": "env_overrides",
    }
    out = {dst: getattr(ns, src) for src, dst in mapping.items() if getattr(ns, src, None) is not None}
    # giving only one end of the schedule keeps it valid
    if "c_start" in out and "c_end" not in out:
        out["c_end"] = min(out["c_start"], AgentConfig.for_env(ns.env).c_end)
    if "c_end" in out and "c_start" not in out:
        out["c_start"] = max(out["c_end"], AgentConfig.for_env(ns.env).c_start)
    return out


def _progress(verbose):
    if not verbose:
        return None

    def report(row):
        log.info("episode %d  return %.3f  traces %d", row.episode, row.ret, row.traces)
    return report


def cmd_train(ns) -> int:
    _require(ns, "out")
    n = _csv_ints(ns.n_mcts if ns.n_mcts is not None else 16)
    if len(n) != 1:
        raise UsageError("train takes a single --n-mcts value")
    config = AgentConfig.for_env(ns.env, n_mcts=n[0], budget=_budget(ns), **_agent_overrides(ns))
    rec = run_training(config, int(ns.seed), progress=_progress(ns.verbose))
    for path in write_run(rec, ns.out):
        print(path)
    print(f"episodes={len(rec.rows)} real_steps={rec.real_steps} traces={rec.traces}", file=sys.stderr)
    return 0


def cmd_sweep(ns) -> int:
    _require(ns, "out")
    values = _csv_ints(ns.n_mcts) if ns.n_mcts is not None else list(SweepConfig.n_mcts_values)
    cfg = SweepConfig(env=ns.env, n_mcts_values=tuple(values), repetitions=int(ns.seeds),
                      budget=_budget(ns), base_seed=int(ns.base_seed), out_dir=str(ns.out),
                      aggregation_fraction=float(ns.fraction), agent_overrides=_agent_overrides(ns))
    cfg.agent_config(values[0])  # reject bad overrides before any run starts
    result = run_sweep(cfg, workers=ns.workers)
    for row in result.rows:
        flag = f"  flagged seeds {row.flagged}" if row.flagged else ""
        print(f"n_mcts={row.n_mcts:<5d} mean={row.mean:.3f} min={row.min:.3f} max={row.max:.3f}{flag}")
    print(result.manifest_path)
    if result.failures:
        print(f"{len(result.failures)} run(s) failed; see manifest", file=sys.stderr)
        return 1
    return 0


def cmd_eval(ns) -> int:
    _require(ns, "checkpoint")
    params = checkpoint.load(ns.checkpoint)
    env = make_env(ns.env)
    n = _csv_ints(ns.n_mcts if ns.n_mcts is not None else 16)
    if len(n) != 1 or n[0] < 0:
        raise UsageError("eval takes a single non-negative --n-mcts value")
    returns = greedy_rollouts(params, env, int(ns.episodes), n[0], int(ns.seed),
                              SearchConfig(gamma=env.spec.gamma))
    print("episode,return")
    for i, r in enumerate(returns):
        print(f"{i},{fmt(r)}")
    print(f"mean={sum(returns) / len(returns):.4f}", file=sys.stderr)
    return 0


def cmd_oracle(ns) -> int:
    _require(ns, "mdp")
    try:
        text = Path(ns.mdp).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {ns.mdp}: {exc}") from exc
    mdp = load_mdp_json(text)
    if ns.gamma is not None:
        mdp = TabularMdp(mdp.transition_probs, mdp.rewards, float(ns.gamma))
    q = q_value_iteration(mdp, float(ns.tol), int(ns.max_iter))
    policy = greedy_policy(q)
    print("state," + ",".join(f"q{a}" for a in range(mdp.n_actions)) + ",greedy")
    for s in range(mdp.n_states):
        print(f"{s}," + ",".join(fmt(v) for v in q.values[s]) + f",{policy[s]}")
    print(f"iterations={q.iterations}", file=sys.stderr)
    return 0


def cmd_entropy_map(ns) -> int:
    _require(ns, "checkpoint")
    params = checkpoint.load(ns.checkpoint)
    m = entropy_map(params, make_env(ns.env).spec, int(ns.resolution), int(ns.episode))
    text = entropy_csv_text([m])
    if ns.out:
        Path(ns.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_aggregate(ns) -> int:
    _require(ns, "out")
    text = reaggregate(ns.out, float(ns.fraction))
    (Path(ns.out) / "tradeoff.csv").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def cmd_verify(ns) -> int:
    _require(ns, "out")
    problems = verify_manifest(ns.out)
    for p in problems:
        print(p, file=sys.stderr)
    print("ok" if not problems else f"{len(problems)} problem(s)")
    return 0 if not problems else 1


COMMANDS = {
    "train": cmd_train, "sweep": cmd_sweep, "eval": cmd_eval, "oracle": cmd_oracle,
    "entropy-map": cmd_entropy_map, "aggregate": cmd_aggregate, "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    try:
        ns = resolve(args)
        logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](ns)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"rtdp-lab: error: {exc}", file=sys.stderr)
        return 2
    except (ContractViolation, TypeError) as exc:
        print(f"rtdp-lab: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except NonConvergence as exc:
        print(f"rtdp-lab: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"rtdp-lab: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
