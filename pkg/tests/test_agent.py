import dataclasses

import numpy as np
import pytest

from rtdp_lab.agent import (
    AgentConfig, BudgetSpec, c_schedule, commit_action, greedy_rollouts, run_training,
)
from rtdp_lab.envs import make_env
from rtdp_lab.mcts import SearchResult, policy_target
from rtdp_lab.mdp import ContractViolation, RngStream


def result_from_counts(counts):
    counts = np.asarray(counts, dtype=np.int64)
    return SearchResult(counts, np.zeros(len(counts)), policy_target(counts), 0.0, int(counts.sum()))


def small(env="cartpole", n=4, traces=400, **kw):
    return AgentConfig.for_env(env, n_mcts=n, budget=BudgetSpec("total_traces", traces),
                               hidden=kw.pop("hidden", 16), **kw)


@pytest.mark.parametrize("step,expected", [(0, 0.8), (250, 0.425), (500, 0.05), (10_000, 0.05)])
def test_c_schedule_cartpole_defaults(step, expected):
    assert c_schedule(step, AgentConfig.for_env("cartpole")) == pytest.approx(expected, abs=1e-15)


def test_c_schedule_other_domains():
    mc = AgentConfig.for_env("mountaincar")
    assert c_schedule(0, mc) == 5.0 and c_schedule(5000, mc) == 0.5
    rg = AgentConfig.for_env("racegrid")
    assert c_schedule(0, rg) == 1.0 and c_schedule(1500, rg) == pytest.approx(0.05)


def test_c_schedule_is_nonincreasing():
    cfg = AgentConfig.for_env("cartpole")
    cs = [c_schedule(i, cfg) for i in range(0, 700, 7)]
    assert all(a >= b for a, b in zip(cs, cs[1:]))
    with pytest.raises(ContractViolation):
        c_schedule(-1, cfg)


@pytest.mark.parametrize("mode", ["sample_counts", "argmax_counts"])
def test_commit_one_hot_counts(mode):
    rng = RngStream(0)
    assert all(commit_action(result_from_counts([0, 0, 7]), mode, rng) == 2 for _ in range(50))


def test_commit_argmax_lowest_index_tie():
    assert commit_action(result_from_counts([3, 1]), "argmax_counts", RngStream(0)) == 0
    assert commit_action(result_from_counts([2, 5, 5]), "argmax_counts", RngStream(0)) == 1


def test_commit_sample_frequency():
    rng = RngStream(7)
    res = result_from_counts([3, 1])
    draws = [commit_action(res, "sample_counts", rng) for _ in range(10_000)]
    assert abs(draws.count(0) / 10_000 - 0.75) <= 0.02


def test_commit_unknown_mode():
    with pytest.raises(ContractViolation):
        commit_action(result_from_counts([1, 1]), "greedy", RngStream(0))


def test_budget_of_ten_searches_gives_ten_real_steps():
    rec = run_training(small(n=6, traces=60), seed=3)
    assert rec.real_steps == 10
    assert rec.traces == 60


@pytest.mark.parametrize("n,budget", [(4, 401), (7, 1000), (16, 999)])
def test_trace_accounting_bounds(n, budget):
    rec = run_training(small(n=n, traces=budget), seed=0)
    assert budget - n < rec.traces <= budget
    assert rec.consumed == rec.traces
    # rows record cumulative traces, strictly increasing
    t = [r.traces for r in rec.rows]
    assert all(a < b for a, b in zip(t, t[1:]))
    assert rec.traces == rec.real_steps * n


def test_truncated_episode_is_flagged_not_counted():
    rec = run_training(small(n=4, traces=400), seed=0)
    done_steps = rec.rows[-1].real_steps if rec.rows else 0
    if rec.real_steps > done_steps:
        assert rec.partial is not None
        assert rec.partial.real_steps == rec.real_steps
    else:
        assert rec.partial is None


def test_same_seed_is_bit_identical():
    a = run_training(small(traces=600), seed=11)
    b = run_training(small(traces=600), seed=11)
    assert [(r.episode, r.real_steps, r.traces, r.ret) for r in a.rows] == \
           [(r.episode, r.real_steps, r.traces, r.ret) for r in b.rows]
    assert np.array_equal(a.params.flat, b.params.flat)


def test_different_seeds_differ():
    a = run_training(small(traces=600), seed=1)
    b = run_training(small(traces=600), seed=2)
    assert not np.array_equal(a.params.flat, b.params.flat)


def test_parameters_change_once_buffer_fills():
    cfg = small(traces=4 * 40, batch_size=8)
    rec = run_training(cfg, seed=0)
    fresh = run_training(dataclasses.replace(cfg, train_steps_per_real_step=0), seed=0)
    assert not np.array_equal(rec.params.flat, fresh.params.flat)
    assert rec.params.is_finite()


def test_racegrid_episode_counts_nonincreasing_in_n_mcts():
    counts = [len(run_training(small("racegrid", n=n, traces=3000), seed=5).rows) for n in (2, 8, 32)]
    assert counts[0] >= counts[1] >= counts[2]
    assert counts[0] > counts[2]


def test_wall_clock_budget_stops():
    cfg = AgentConfig.for_env("cartpole", n_mcts=4, budget=BudgetSpec("wall_clock_seconds", 0.3),
                              hidden=16)
    rec = run_training(cfg, seed=0)
    assert rec.real_steps > 0
    assert rec.consumed == rec.wall_seconds
    assert rec.wall_seconds < 5.0


def test_entropy_snapshots_on_two_dimensional_task():
    rec = run_training(small("racegrid", n=4, traces=2000, entropy_every=3), seed=0)
    labels = [m.episode for m in rec.entropy_maps]
    assert labels[0] == 0
    assert labels[1:] == list(range(3, len(rec.rows) + 1, 3))


def test_config_round_trip_and_validation():
    cfg = AgentConfig.for_env("mountaincar", n_mcts=32, selection_variant="literal_eq7", gamma=0.99)
    assert cfg.search.selection_variant == "literal_eq7" and cfg.search.gamma == 0.99
    assert AgentConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ContractViolation):
        AgentConfig.from_dict({**cfg.to_dict(), "bogus": 1})
    with pytest.raises(ContractViolation):
        AgentConfig.for_env("pong")
    with pytest.raises(ContractViolation):
        AgentConfig.for_env("cartpole", c_start=0.1, c_end=0.5)
    with pytest.raises(ContractViolation):
        BudgetSpec("total_traces", 0)
    with pytest.raises(ContractViolation):
        BudgetSpec("episodes", 10)


def test_greedy_rollouts_policy_head_and_search():
    rec = run_training(small(traces=200), seed=0)
    env = make_env("cartpole")
    head = greedy_rollouts(rec.params, env, 3, n_mcts=0, seed=4)
    searched = greedy_rollouts(rec.params, env, 2, n_mcts=4, seed=4)
    assert len(head) == 3 and len(searched) == 2
    assert all(1 <= r <= 200 for r in head + searched)
    assert head == greedy_rollouts(rec.params, env, 3, n_mcts=0, seed=4)
