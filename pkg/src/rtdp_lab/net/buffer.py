"""Fixed-capacity FIFO replay buffer of training targets."""
import numpy as np

from ..mdp import ContractViolation
from .network import TrainingTarget


class ReplayBuffer:
    """Ring buffer; the oldest target is overwritten once ``capacity`` is reached."""

    def __init__(self, obs_dim: int, action_count: int, capacity: int = 5000):
        if capacity < 1:
            raise ContractViolation("capacity must be positive")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.policy = np.zeros((capacity, action_count))
        self.value = np.zeros(capacity)
        self.inserted = 0

    def __len__(self):
        return min(self.inserted, self.capacity)

    def push(self, target: TrainingTarget) -> "ReplayBuffer":
        i = self.inserted % self.capacity
        self.obs[i] = target.state_obs
        self.policy[i] = target.policy_target
        self.value[i] = target.value_target
        self.inserted += 1
        return self

    def ready(self, batch_size: int) -> bool:
        return len(self) >= batch_size

    def sample_arrays(self, rng, batch_size: int = 16):
        """Uniform with-replacement draw as ``(X, P, V)``; ``None`` while underfilled."""
        if not self.ready(batch_size):
            return None
        idx = rng.integers(0, len(self), size=batch_size)
        return self.obs[idx], self.policy[idx], self.value[idx]

    def sample(self, rng, batch_size: int = 16):
        """Like ``sample_arrays`` but returns a list of ``TrainingTarget``."""
        arrays = self.sample_arrays(rng, batch_size)
        if arrays is None:
            return None
        return [TrainingTarget(x, p, float(v)) for x, p, v in zip(*arrays)]

    def oldest(self) -> TrainingTarget:
        i = self.inserted % self.capacity if self.inserted >= self.capacity else 0
        return TrainingTarget(self.obs[i].copy(), self.policy[i].copy(), float(self.value[i]))


def buffer_push(buffer: ReplayBuffer, target: TrainingTarget) -> ReplayBuffer:
    return buffer.push(target)


def buffer_sample(buffer: ReplayBuffer, rng, batch_size: int = 16):
    return buffer.sample(rng, batch_size)
