"""RaceGrid: drive a point to a circular goal inside the unit square.

Stand-in for a physics-engine racing task. It keeps a two-dimensional state
(so policy entropy can be drawn as a map) and a five-way action set.
"""
import math
from dataclasses import dataclass

from ..mdp import Env, EnvSpec

# N, E, S, W, stay
MOVES = ((0.0, 1.0), (1.0, 0.0), (0.0, -1.0), (-1.0, 0.0), (0.0, 0.0))


@dataclass(frozen=True)
class RaceGridParams:
    goal_center: tuple = (0.75, 0.75)
    goal_radius: float = 0.15
    move_step: float = 0.1
    step_reward: float = -0.01
    goal_reward: float = 1.0
    max_episode_steps: int = 200
    gamma: float = 1.0
    action_count: int = 5

    def __post_init__(self):
        gx, gy = self.goal_center
        r = self.goal_radius
        if not (r > 0 and r <= gx <= 1 - r and r <= gy <= 1 - r):
            raise ValueError("goal disk must lie fully inside the unit square")
        if not self.move_step > 0:
            raise ValueError("move_step must be positive")
        if self.action_count != len(MOVES):
            raise ValueError("RaceGrid has exactly 5 actions")


def in_goal(x, y, p: RaceGridParams) -> bool:
    return math.hypot(x - p.goal_center[0], y - p.goal_center[1]) <= p.goal_radius


def racegrid_dynamics(obs, action, p: RaceGridParams):
    dx, dy = MOVES[action]
    x = min(max(obs[0] + dx * p.move_step, 0.0), 1.0)
    y = min(max(obs[1] + dy * p.move_step, 0.0), 1.0)
    if in_goal(x, y, p):
        return (x, y), p.goal_reward, True
    return (x, y), p.step_reward, False


class RaceGrid(Env):
    def __init__(self, params: RaceGridParams | None = None):
        self.params = params or RaceGridParams()
        p = self.params
        self.spec = EnvSpec(
            name="racegrid",
            action_count=5,
            obs_dim=2,
            max_episode_steps=p.max_episode_steps,
            gamma=p.gamma,
            obs_low=(0.0, 0.0),
            obs_high=(1.0, 1.0),
        )

    def initial_obs(self, rng):
        # uniform over the arena outside the goal disk
        while True:
            x, y = (float(v) for v in rng.uniform(0.0, 1.0, 2))
            if not in_goal(x, y, self.params):
                return (x, y)

    def dynamics(self, obs, action):
        return racegrid_dynamics(obs, action, self.params)
