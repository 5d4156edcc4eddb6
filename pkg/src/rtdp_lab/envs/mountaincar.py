"""Mountain car with a small per-step cost and a unit goal bonus."""
import math
from dataclasses import dataclass

from ..mdp import Env, EnvSpec


@dataclass(frozen=True)
class MountainCarParams:
    min_position: float = -1.2
    max_position: float = 0.6
    velocity_bound: float = 0.07
    force: float = 0.001
    gravity_scale: float = 0.0025
    goal_position: float = 0.5
    reset_low: float = -0.6
    reset_high: float = -0.4
    step_reward: float = -0.005
    goal_reward: float = 1.0
    max_episode_steps: int = 1000
    gamma: float = 1.0

    def __post_init__(self):
        if not self.min_position <= self.goal_position <= self.max_position:
            raise ValueError("goal_position must lie within the position bounds")
        if not self.step_reward < 0 < self.goal_reward:
            raise ValueError("need step_reward < 0 < goal_reward")


def mountaincar_dynamics(obs, action, p: MountainCarParams):
    position, velocity = obs
    velocity += (action - 1) * p.force - math.cos(3 * position) * p.gravity_scale
    velocity = min(max(velocity, -p.velocity_bound), p.velocity_bound)
    position += velocity
    position = min(max(position, p.min_position), p.max_position)
    if position == p.min_position and velocity < 0:
        velocity = 0.0
    if position >= p.goal_position:
        return (position, velocity), p.goal_reward, True
    return (position, velocity), p.step_reward, False


class MountainCar(Env):
    def __init__(self, params: MountainCarParams | None = None):
        self.params = params or MountainCarParams()
        p = self.params
        self.spec = EnvSpec(
            name="mountaincar",
            action_count=3,
            obs_dim=2,
            max_episode_steps=p.max_episode_steps,
            gamma=p.gamma,
            obs_low=(p.min_position, -p.velocity_bound),
            obs_high=(p.max_position, p.velocity_bound),
        )

    def initial_obs(self, rng):
        p = self.params
        return (float(rng.uniform(p.reset_low, p.reset_high)), 0.0)

    def dynamics(self, obs, action):
        return mountaincar_dynamics(obs, action, self.params)
