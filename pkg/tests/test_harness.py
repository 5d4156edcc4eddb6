import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rtdp_lab.agent import BudgetSpec
from rtdp_lab.envs import make_env
from rtdp_lab.harness.aggregate import TRADEOFF_COLUMNS, aggregate_tradeoff, tradeoff_csv_text
from rtdp_lab.harness.cli import main
from rtdp_lab.harness.entropy import entropy_map, policy_entropy
from rtdp_lab.harness.records import ENTROPY_COLUMNS, RUN_COLUMNS, RunData, load_run
from rtdp_lab.harness.sweep import SweepConfig, reaggregate, run_sweep, verify_manifest
from rtdp_lab.mdp import ContractViolation
from rtdp_lab.net import init_params


def run_data(returns, n=8, seed=0, positions=None, consumed=None):
    r = np.asarray(returns, dtype=np.float64)
    pos = np.arange(1, len(r) + 1, dtype=np.float64) if positions is None else np.asarray(positions, float)
    return RunData(n, seed, "total_traces", float(consumed if consumed is not None else len(r)), pos, r)


def tiny_sweep(tmp_path, name="sw", **kw):
    cfg = SweepConfig(env=kw.pop("env", "cartpole"), n_mcts_values=kw.pop("values", (2, 4)),
                      repetitions=kw.pop("reps", 2), budget=BudgetSpec("total_traces", kw.pop("traces", 160)),
                      out_dir=str(tmp_path / name), agent_overrides={"hidden": 8, **kw})
    return cfg, run_sweep(cfg, workers=1)


def test_window_covering_last_two_episodes():
    rows = aggregate_tradeoff([run_data([0] * 11 + [10, 10])], 0.15)
    assert rows[0].mean == 10.0


def test_twenty_episode_fixture_uses_final_three():
    returns = np.arange(20, dtype=float) ** 2
    rows = aggregate_tradeoff([run_data(returns)], 0.15)
    assert rows[0].mean == pytest.approx((17**2 + 18**2 + 19**2) / 3)


def test_identical_repetitions_have_degenerate_spread():
    runs = [run_data([1, 2, 3, 4, 5, 6, 7], seed=s) for s in range(3)]
    row = aggregate_tradeoff(runs)[0]
    assert row.min == row.max == row.mean


def test_window_uses_budget_position_not_episode_index():
    # one long early episode then many short ones late: window is in budget units
    run = run_data([5, 1, 1, 9], positions=[80, 90, 95, 100], consumed=100)
    assert aggregate_tradeoff([run], 0.15)[0].mean == pytest.approx((1 + 1 + 9) / 3)


def test_empty_window_is_flagged_and_excluded():
    good = run_data([1, 2, 3, 4], seed=0)
    empty = run_data([7], seed=1, positions=[10], consumed=100)
    row = aggregate_tradeoff([good, empty])[0]
    assert row.flagged == [1]
    assert row.mean == 4.0
    none = aggregate_tradeoff([empty])[0]
    assert math.isnan(none.mean) and none.flagged == [1]


@given(st.lists(st.lists(st.floats(-100, 100), min_size=1, max_size=30), min_size=1, max_size=4))
@settings(max_examples=60, deadline=None)
def test_mean_within_spread(per_seed):
    rows = aggregate_tradeoff([run_data(r, seed=i) for i, r in enumerate(per_seed)], 0.15)
    for row in rows:
        if not math.isnan(row.mean):
            assert row.min - 1e-9 <= row.mean <= row.max + 1e-9


def test_aggregate_rejects_bad_fraction():
    with pytest.raises(ContractViolation):
        aggregate_tradeoff([run_data([1])], 1.0)


def test_tradeoff_csv_schema():
    text = tradeoff_csv_text(aggregate_tradeoff([run_data([1, 2], n=4), run_data([3, 4], n=2)]))
    rows = list(csv.reader(text.splitlines()))
    assert tuple(rows[0]) == TRADEOFF_COLUMNS
    assert [r[0] for r in rows[1:]] == ["2", "4"]


def test_policy_entropy_values():
    assert policy_entropy([0.2] * 5) == pytest.approx(math.log(5))
    assert policy_entropy([1.0, 0.0, 0.0]) == 0.0


def test_zero_init_network_gives_uniform_entropy():
    spec = make_env("racegrid").spec
    params = init_params(2, 5, np.random.default_rng(0), hidden=32)
    m = entropy_map(params, spec, 11, episode_label=7)
    assert m.entropy.shape == (121,) and m.episode == 7
    assert np.abs(m.entropy - math.log(5)).max() <= 1e-9
    assert m.x.min() == 0.0 and m.x.max() == 1.0


def test_one_hot_policy_gives_zero_entropy():
    params = init_params(2, 5, np.random.default_rng(0), hidden=8)
    params.bp[:] = [0.0, 0.0, 1000.0, 0.0, 0.0]
    m = entropy_map(params, make_env("racegrid").spec, 5)
    assert np.all(m.entropy == 0.0)


@given(st.integers(0, 2**31 - 1), st.floats(0.1, 20.0))
@settings(max_examples=25, deadline=None)
def test_entropy_bounds_for_any_net(seed, scale):
    params = init_params(2, 5, np.random.default_rng(seed), hidden=16, head_scale=scale)
    m = entropy_map(params, make_env("racegrid").spec, 6)
    assert np.all(m.entropy >= 0.0) and np.all(m.entropy <= math.log(5))


def test_entropy_map_rejects_non_planar_env():
    params = init_params(4, 2, np.random.default_rng(0), hidden=8)
    with pytest.raises(ContractViolation):
        entropy_map(params, make_env("cartpole").spec, 5)
    with pytest.raises(ContractViolation):
        entropy_map(init_params(2, 5, np.random.default_rng(0), hidden=8), make_env("racegrid").spec, 1)


def test_sweep_config_validation():
    with pytest.raises(ContractViolation):
        SweepConfig(n_mcts_values=(4, 4))
    with pytest.raises(ContractViolation):
        SweepConfig(n_mcts_values=(0, 4))
    with pytest.raises(ContractViolation):
        SweepConfig(repetitions=0)
    with pytest.raises(ContractViolation):
        SweepConfig(aggregation_fraction=0.0)
    assert SweepConfig(base_seed=10, repetitions=3).seeds() == [10, 11, 12]


def test_sweep_writes_every_artifact(tmp_path):
    cfg, res = tiny_sweep(tmp_path, values=(2, 4, 8), reps=3, traces=200)
    out = tmp_path / "sw"
    assert len(list(out.glob("*/run.csv"))) == 9
    assert len(list(out.glob("tradeoff.csv"))) == 1
    assert not res.failures
    assert verify_manifest(out) == []
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config_hash"] == cfg.config_hash()
    listed = {e["path"] for e in manifest["files"]}
    on_disk = {p.relative_to(out).as_posix() for p in out.rglob("*") if p.is_file()}
    assert on_disk - listed == {"manifest.json"}


def test_run_csv_schema_and_reload(tmp_path):
    tiny_sweep(tmp_path, values=(4,), reps=1)
    run_dir = next((tmp_path / "sw").glob("n*"))
    header = (run_dir / "run.csv").read_text(encoding="utf-8").splitlines()[0]
    assert tuple(header.split(",")) == RUN_COLUMNS
    data = load_run(run_dir)
    assert data.n_mcts == 4 and data.consumed <= 160
    assert np.all(np.diff(data.positions) > 0)


def test_sweep_is_deterministic_and_reaggregation_idempotent(tmp_path):
    tiny_sweep(tmp_path, "a")
    tiny_sweep(tmp_path, "b")
    a, b = tmp_path / "a", tmp_path / "b"
    assert (a / "tradeoff.csv").read_bytes() == (b / "tradeoff.csv").read_bytes()
    for p in a.glob("*/run.csv"):
        assert p.read_bytes() == (b / p.relative_to(a)).read_bytes()
    assert reaggregate(a) == (a / "tradeoff.csv").read_text(encoding="utf-8")


def test_verify_detects_tampering(tmp_path):
    tiny_sweep(tmp_path, values=(2,), reps=1)
    out = tmp_path / "sw"
    run_csv = next(out.glob("*/run.csv"))
    run_csv.write_text(run_csv.read_text() + "999,1,1,,1.0\n")
    (out / "extra.txt").write_text("x")
    problems = verify_manifest(out)
    assert any("hash mismatch" in p for p in problems)
    assert any("unlisted: extra.txt" in p for p in problems)
    assert verify_manifest(tmp_path / "nowhere")


def test_crashing_run_is_recorded_and_sweep_continues(tmp_path):
    # the unknown env constant only surfaces inside the worker
    cfg = SweepConfig(env="cartpole", n_mcts_values=(2,), repetitions=1,
                      budget=BudgetSpec("total_traces", 40), out_dir=str(tmp_path / "sw"),
                      agent_overrides={"hidden": 8, "env_overrides": {"no_such_constant": 1.0}})
    res = run_sweep(cfg, workers=1)
    assert len(res.failures) == 1 and res.failures[0]["n_mcts"] == 2
    manifest = json.loads(res.manifest_path.read_text())
    assert manifest["failures"][0]["seed"] == 0
    assert verify_manifest(tmp_path / "sw") == []


def test_unwritable_output_fails_fast(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = SweepConfig(out_dir=str(blocker / "sub"), n_mcts_values=(2,), repetitions=1,
                      budget=BudgetSpec("total_traces", 40))
    with pytest.raises(OSError):
        run_sweep(cfg)


def test_cli_train_is_byte_deterministic(tmp_path):
    args = ["train", "--env", "cartpole", "--n-mcts", "4", "--budget-traces", "200", "--seed", "1",
            "--hidden", "8"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a/run.csv").read_bytes() == (tmp_path / "b/run.csv").read_bytes()
    assert ",," in (tmp_path / "a/run.csv").read_text()  # seconds left empty in trace mode


def test_cli_config_file_and_flag_precedence(tmp_path):
    (tmp_path / "c.toml").write_text('env = "racegrid"\nn_mcts = 2\nbudget-traces = 60\nhidden = 8\nseed = 4\n')
    assert main(["train", "--config", str(tmp_path / "c.toml"), "--n-mcts", "3",
                 "--out", str(tmp_path / "r")]) == 0
    meta = json.loads((tmp_path / "r/run.json").read_text())
    assert meta["env"] == "racegrid" and meta["n_mcts"] == 3 and meta["seed"] == 4
    assert meta["traces"] == 60
    (tmp_path / "c.json").write_text(json.dumps({"env": "cartpole", "frobnicate": 1}))
    assert main(["train", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "x")]) == 2


def test_cli_sweep_verify_aggregate(tmp_path, capsys):
    out = str(tmp_path / "s")
    assert main(["sweep", "--env", "cartpole", "--n-mcts", "2,4", "--seeds", "2",
                 "--budget-traces", "120", "--hidden", "8", "--out", out]) == 0
    assert main(["verify", "--out", out]) == 0
    before = (tmp_path / "s/tradeoff.csv").read_bytes()
    assert main(["aggregate", "--out", out]) == 0
    assert (tmp_path / "s/tradeoff.csv").read_bytes() == before


def test_cli_eval_and_entropy_map(tmp_path, capsys):
    assert main(["train", "--env", "racegrid", "--n-mcts", "2", "--budget-traces", "80",
                 "--hidden", "8", "--out", str(tmp_path / "r")]) == 0
    ck = str(tmp_path / "r/checkpoint.bin")
    capsys.readouterr()
    assert main(["eval", "--checkpoint", ck, "--env", "racegrid", "--episodes", "2", "--n-mcts", "0"]) == 0
    assert capsys.readouterr().out.startswith("episode,return\n")
    target = tmp_path / "h.csv"
    assert main(["entropy-map", "--checkpoint", ck, "--env", "racegrid", "--resolution", "4",
                 "--out", str(target)]) == 0
    rows = list(csv.reader(target.read_text().splitlines()))
    assert tuple(rows[0]) == ENTROPY_COLUMNS and len(rows) == 17
    assert all(0.0 <= float(r[3]) <= math.log(5) for r in rows[1:])
    assert main(["entropy-map", "--checkpoint", ck, "--env", "cartpole"]) == 2


def test_cli_oracle_prints_q_table(tmp_path, capsys):
    mdp = {"n_states": 1, "n_actions": 1, "transitions": [{"s": 0, "a": 0, "next": 0, "r": 1.0}]}
    (tmp_path / "loop.json").write_text(json.dumps(mdp))
    assert main(["oracle", "--mdp", str(tmp_path / "loop.json"), "--gamma", "0.5", "--tol", "1e-8"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "state,q0,greedy"
    assert float(lines[1].split(",")[1]) == pytest.approx(2.0, abs=1e-6)


@pytest.mark.parametrize("argv", [
    ["train", "--bogus"],
    ["frobnicate"],
    ["train", "--env", "pong", "--out", "x"],
    ["train", "--n-mcts", "4,8", "--out", "x"],
    ["train", "--budget-traces", "10", "--budget-seconds", "1", "--out", "x"],
    ["train"],
    ["oracle"],
])
def test_cli_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2


def test_cli_help_lists_every_flag(capsys):
    assert main(["train", "--help"]) == 0
    text = capsys.readouterr().out
    for flag in ("--env", "--n-mcts", "--budget-traces", "--budget-seconds", "--seed", "--config",
                 "--gamma", "--c-start", "--variant", "--unvisited", "--commit"):
        assert flag in text
