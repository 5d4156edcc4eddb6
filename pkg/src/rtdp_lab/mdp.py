"""Core MDP types: states, transitions, environment interface and seeded RNG."""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class ContractViolation(ValueError):
    """Raised when a caller breaks an operation's preconditions."""


@dataclass(frozen=True)
class EnvState:
    obs: tuple
    steps_taken: int = 0
    done: bool = False

    def __post_init__(self):
        if self.steps_taken < 0:
            raise ContractViolation("steps_taken must be nonnegative")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.obs, dtype=np.float64)


@dataclass(frozen=True)
class Transition:
    next_state: EnvState
    reward: float
    terminal: bool


@dataclass(frozen=True)
class EnvSpec:
    name: str
    action_count: int
    obs_dim: int
    max_episode_steps: int
    gamma: float = 1.0
    # Nominal observation box, used for input scaling and state-space grids.
    obs_low: tuple = ()
    obs_high: tuple = ()

    def __post_init__(self):
        if self.action_count < 2:
            raise ContractViolation("action_count must be >= 2")
        if not 0.0 <= self.gamma <= 1.0:
            raise ContractViolation(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.obs_dim < 1 or self.max_episode_steps < 1:
            raise ContractViolation("obs_dim and max_episode_steps must be positive")


class RngStream:
    """Counter-based (Philox) generator with named, independent substreams.

    ``RngStream(7).child("env")`` always yields the same draws regardless of
    how many numbers other substreams have consumed.
    """

    def __init__(self, seed: int, _key: tuple = ()):
        self.seed = int(seed)
        self._key = tuple(_key)
        ss = np.random.SeedSequence(self.seed & (2**64 - 1), spawn_key=self._key)
        self.generator = np.random.Generator(np.random.Philox(ss))

    def child(self, name: str) -> "RngStream":
        return RngStream(self.seed, self._key + (zlib.crc32(name.encode()),))

    def random(self) -> float:
        return float(self.generator.random())

    def uniform(self, low, high, size=None):
        return self.generator.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def choice_index(self, n: int) -> int:
        return int(self.generator.integers(n))

    def categorical(self, probs) -> int:
        """Draw an index from a probability vector by inverse CDF."""
        u = self.random()
        acc = 0.0
        for i, p in enumerate(probs):
            acc += p
            if u < acc:
                return i
        # rounding left u above the final partial sum
        for i in range(len(probs) - 1, -1, -1):
            if probs[i] > 0:
                return i
        raise ContractViolation("probability vector has no positive entry")


class Env:
    """Deterministic-or-stochastic episodic environment with a pure step function.

    Subclasses implement ``initial_obs(rng)`` and ``dynamics(obs, action)``,
    which returns ``(next_obs, reward, terminal)``. Step-cap accounting and
    contract checks live here.
    """

    spec: EnvSpec

    def initial_obs(self, rng: RngStream) -> tuple:
        raise NotImplementedError

    def dynamics(self, obs: tuple, action: int) -> tuple:
        raise NotImplementedError

    def reset(self, rng: RngStream) -> EnvState:
        return EnvState(tuple(self.initial_obs(rng)), 0, False)

    def step(self, state: EnvState, action: int, rng: RngStream | None = None) -> Transition:
        if state.done:
            raise ContractViolation("step called on a terminal state")
        self.check_action(action)
        obs, reward, terminal = self.dynamics(state.obs, action)
        steps = state.steps_taken + 1
        terminal = bool(terminal) or steps >= self.spec.max_episode_steps
        return Transition(EnvState(obs, steps, terminal), float(reward), terminal)

    def check_action(self, action) -> None:
        if not (isinstance(action, (int, np.integer)) and 0 <= action < self.spec.action_count):
            raise ContractViolation(
                f"action {action!r} outside [0, {self.spec.action_count}) for {self.spec.name}"
            )

    def normalize(self, obs) -> np.ndarray:
        """Map an observation into roughly [-1, 1] using the nominal box."""
        low = np.asarray(self.spec.obs_low, dtype=np.float64)
        high = np.asarray(self.spec.obs_high, dtype=np.float64)
        return (2.0 * (np.asarray(obs, dtype=np.float64) - low) / (high - low)) - 1.0


def reset(env: Env, rng: RngStream) -> EnvState:
    return env.reset(rng)


def step(env: Env, state: EnvState, action: int, rng: RngStream | None = None) -> Transition:
    return env.step(state, action, rng)


def discounted_return(rewards: Sequence[float], gamma: float) -> float:
    """Sum of ``gamma**k * rewards[k]``, accumulated back to front."""
    total = 0.0
    for r in reversed(rewards):
        if not math.isfinite(r):
            raise ContractViolation("rewards must be finite")
        total = r + gamma * total
    return float(total)
