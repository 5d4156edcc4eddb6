"""Plan / learn / act loop under a fixed total compute budget."""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .envs import make_env
from .mcts import SearchConfig, SearchResult, net_evaluator, run_search
from .mdp import ContractViolation, RngStream
from .net import OptState, ReplayBuffer, TrainingTarget, init_params, loss_and_gradients
from .net.network import adam_step

log = logging.getLogger(__name__)

COMMIT_MODES = ("sample_counts", "argmax_counts")
BUDGET_MODES = ("total_traces", "wall_clock_seconds")

# Exploration schedules per task; wall-clock budgets are the original protocol's.
ENV_DEFAULTS = {
    "cartpole": {"c_start": 0.8, "c_end": 0.05, "decay_steps": 500, "wall_clock_seconds": 500.0},
    "mountaincar": {"c_start": 5.0, "c_end": 0.5, "decay_steps": 5000, "wall_clock_seconds": 150 * 60.0},
    "racegrid": {"c_start": 1.0, "c_end": 0.05, "decay_steps": 1500, "wall_clock_seconds": 270 * 60.0},
}


@dataclass(frozen=True)
class BudgetSpec:
    mode: str = "total_traces"
    amount: float = 200_000

    def __post_init__(self):
        if self.mode not in BUDGET_MODES:
            raise ContractViolation(f"budget mode must be one of {BUDGET_MODES}")
        if not self.amount > 0:
            raise ContractViolation("budget amount must be positive")


@dataclass(frozen=True)
class AgentConfig:
    env: str = "cartpole"
    search: SearchConfig = field(default_factory=SearchConfig)
    c_start: float = 0.8
    c_end: float = 0.05
    decay_steps: int = 500
    train_steps_per_real_step: int = 1
    action_commit: str = "sample_counts"
    budget: BudgetSpec = field(default_factory=BudgetSpec)
    batch_size: int = 16
    buffer_capacity: int = 5000
    lr: float = 1e-3
    hidden: int = 256
    env_overrides: dict = field(default_factory=dict)
    # entropy-map snapshots every k completed episodes (2-D envs only); 0 disables
    entropy_every: int = 0
    entropy_resolution: int = 21

    def __post_init__(self):
        if not self.c_start >= self.c_end >= 0:
            raise ContractViolation("need c_start >= c_end >= 0")
        if self.decay_steps < 1:
            raise ContractViolation("decay_steps must be >= 1")
        if self.train_steps_per_real_step < 0:
            raise ContractViolation("train_steps_per_real_step must be >= 0")
        if self.action_commit not in COMMIT_MODES:
            raise ContractViolation(f"action_commit must be one of {COMMIT_MODES}")

    @classmethod
    def for_env(cls, env: str, n_mcts: int = 16, budget: BudgetSpec | None = None,
                **overrides) -> "AgentConfig":
        """Task defaults (exploration schedule, discount) with keyword overrides."""
        if env not in ENV_DEFAULTS:
            raise ContractViolation(f"unknown env {env!r}")
        d = ENV_DEFAULTS[env]
        search_kw = {k: overrides.pop(k) for k in ("gamma", "selection_variant", "unvisited")
                     if k in overrides}
        if "gamma" not in search_kw:
            search_kw["gamma"] = make_env(env, overrides.get("env_overrides")).spec.gamma
        search = SearchConfig(n_mcts=n_mcts, c=d["c_start"], **search_kw)
        kw = {"c_start": d["c_start"], "c_end": d["c_end"], "decay_steps": d["decay_steps"]}
        kw.update(overrides)
        return cls(env=env, search=search, budget=budget or BudgetSpec(), **kw)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "AgentConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ContractViolation(f"unknown agent config keys: {sorted(unknown)}")
        if isinstance(d.get("search"), dict):
            d["search"] = SearchConfig(**d["search"])
        if isinstance(d.get("budget"), dict):
            d["budget"] = BudgetSpec(**d["budget"])
        return cls(**d)


@dataclass(frozen=True)
class EpisodeRow:
    episode: int
    real_steps: int
    traces: int
    seconds: float
    ret: float


@dataclass
class RunRecord:
    rows: list
    params: object
    seed: int
    config: AgentConfig
    consumed: float = 0.0  # budget used, in the budget's own unit
    partial: EpisodeRow | None = None  # episode cut off by the budget
    real_steps: int = 0
    traces: int = 0
    wall_seconds: float = 0.0
    entropy_maps: list = field(default_factory=list)

    @property
    def returns(self) -> np.ndarray:
        return np.array([r.ret for r in self.rows], dtype=np.float64)

    def budget_positions(self) -> np.ndarray:
        """Cumulative budget (traces or seconds) at which each episode finished."""
        if self.config.budget.mode == "total_traces":
            return np.array([r.traces for r in self.rows], dtype=np.float64)
        return np.array([r.seconds for r in self.rows], dtype=np.float64)


def c_schedule(real_step_index: int, config: AgentConfig) -> float:
    """Linear decay from ``c_start`` to ``c_end`` over ``decay_steps`` real steps, then flat."""
    if real_step_index < 0:
        raise ContractViolation("real_step_index must be >= 0")
    frac = min(real_step_index / config.decay_steps, 1.0)
    return config.c_start + (config.c_end - config.c_start) * frac


def commit_action(result: SearchResult, mode: str, rng: RngStream) -> int:
    """Real-step action from root statistics: sampled from, or argmax of, the visit counts."""
    if mode == "sample_counts":
        return rng.categorical(result.policy_target)
    if mode == "argmax_counts":
        return int(np.argmax(result.root_counts))  # first maximum = lowest index
    raise ContractViolation(f"unknown commit mode {mode!r}")


class _Budget:
    def __init__(self, spec: BudgetSpec, n_mcts: int):
        self.spec = spec
        self.n_mcts = n_mcts
        self.start = time.perf_counter()

    def elapsed(self) -> float:
        return time.perf_counter() - self.start

    def allows_step(self, traces_used: int) -> bool:
        if self.spec.mode == "total_traces":
            return traces_used + self.n_mcts <= self.spec.amount
        return self.elapsed() < self.spec.amount


def run_training(config: AgentConfig, seed: int, env=None, progress=None) -> RunRecord:
    """Iterate planning, learning and real steps until the budget is spent.

    ``progress``, when given, is called with each finished ``EpisodeRow``.
    """
    env = env if env is not None else make_env(config.env, config.env_overrides)
    spec = env.spec
    root_rng = RngStream(seed)
    env_rng, mcts_rng = root_rng.child("env"), root_rng.child("mcts")
    act_rng, buf_rng = root_rng.child("act"), root_rng.child("buffer")
    params = init_params(spec.obs_dim, spec.action_count, root_rng.child("net-init").generator,
                         hidden=config.hidden)
    opt = OptState.for_params(params, lr=config.lr)
    buffer = ReplayBuffer(spec.obs_dim, spec.action_count, config.buffer_capacity)
    grads = params.zeros_like()
    evaluator = net_evaluator(params, env)  # reads params in place, so sees every update
    budget = _Budget(config.budget, config.search.n_mcts)

    record = RunRecord(rows=[], params=params, seed=seed, config=config)
    if config.entropy_every and spec.obs_dim == 2:
        from .harness.entropy import entropy_map
        record.entropy_maps.append(entropy_map(params, spec, config.entropy_resolution, 0))

    real_steps = traces = 0
    low = np.asarray(spec.obs_low, dtype=np.float64)
    scale = 2.0 / (np.asarray(spec.obs_high, dtype=np.float64) - low)
    exhausted = False
    while not exhausted:
        state = env.reset(env_rng)
        ep_return, ep_steps = 0.0, 0
        while not state.done:
            if not budget.allows_step(traces):
                exhausted = True
                break
            search = config.search.with_c(c_schedule(real_steps, config))
            result = run_search(state, evaluator, env, search, mcts_rng)
            traces += result.traces_used

            x = (np.asarray(state.obs, dtype=np.float64) - low) * scale - 1.0
            buffer.push(TrainingTarget(x, result.policy_target, result.value_target))
            for _ in range(config.train_steps_per_real_step):
                batch = buffer.sample_arrays(buf_rng.generator, config.batch_size)
                if batch is None:
                    break
                loss_and_gradients(params, *batch, out=grads)
                adam_step(params, grads, opt, inplace=True)

            action = commit_action(result, config.action_commit, act_rng)
            tr = env.step(state, action, env_rng)
            state = tr.next_state
            ep_return += tr.reward
            ep_steps += 1
            real_steps += 1

        row = EpisodeRow(len(record.rows), real_steps, traces, budget.elapsed(), ep_return)
        if exhausted:
            if ep_steps:
                record.partial = row
            break
        record.rows.append(row)
        if progress is not None:
            progress(row)
        if config.entropy_every and spec.obs_dim == 2 and len(record.rows) % config.entropy_every == 0:
            record.entropy_maps.append(
                entropy_map(params, spec, config.entropy_resolution, len(record.rows)))

    record.real_steps, record.traces = real_steps, traces
    record.wall_seconds = budget.elapsed()
    record.consumed = float(traces) if config.budget.mode == "total_traces" else record.wall_seconds
    if not params.is_finite():
        log.warning("non-finite network weights at end of run (seed %d)", seed)
    return record


def greedy_rollouts(params, env, episodes: int, n_mcts: int, seed: int,
                    search: SearchConfig | None = None) -> list:
    """Evaluation returns with argmax commitment; ``n_mcts=0`` acts on the policy head alone."""
    rng = RngStream(seed)
    env_rng, mcts_rng = rng.child("env"), rng.child("mcts")
    evaluator = net_evaluator(params, env)
    returns = []
    for _ in range(episodes):
        state = env.reset(env_rng)
        total = 0.0
        while not state.done:
            if n_mcts > 0:
                cfg = replace(search or SearchConfig(gamma=env.spec.gamma), n_mcts=n_mcts)
                result = run_search(state, evaluator, env, cfg, mcts_rng)
                action = int(np.argmax(result.root_counts))
            else:
                priors, _ = evaluator(state)
                action = int(np.argmax(priors))
            tr = env.step(state, action, env_rng)
            state = tr.next_state
            total += tr.reward
        returns.append(total)
    return returns
