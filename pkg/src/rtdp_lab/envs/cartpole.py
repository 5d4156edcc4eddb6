"""Cart-pole balancing with the classic-control benchmark constants."""
import math
from dataclasses import dataclass

from ..mdp import Env, EnvSpec


@dataclass(frozen=True)
class CartPoleParams:
    gravity: float = 9.8
    cart_mass: float = 1.0
    pole_mass: float = 0.1
    pole_half_length: float = 0.5
    force_magnitude: float = 10.0
    integration_dt: float = 0.02
    angle_threshold: float = 12 * 2 * math.pi / 360
    position_threshold: float = 2.4
    reset_spread: float = 0.05
    max_episode_steps: int = 200
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("gravity", "cart_mass", "pole_mass", "pole_half_length", "force_magnitude",
                     "integration_dt", "angle_threshold", "position_threshold"):
            if not getattr(self, name) > 0:
                raise ValueError(f"CartPoleParams.{name} must be positive")


def cartpole_dynamics(obs, action, p: CartPoleParams):
    """One semi-implicit Euler step. Returns ``(obs, reward, terminal)``."""
    x, x_dot, theta, theta_dot = obs
    force = p.force_magnitude if action == 1 else -p.force_magnitude
    total_mass = p.cart_mass + p.pole_mass
    pml = p.pole_mass * p.pole_half_length
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    temp = (force + pml * theta_dot * theta_dot * sin_t) / total_mass
    theta_acc = (p.gravity * sin_t - cos_t * temp) / (
        p.pole_half_length * (4.0 / 3.0 - p.pole_mass * cos_t * cos_t / total_mass)
    )
    x_acc = temp - pml * theta_acc * cos_t / total_mass
    dt = p.integration_dt
    x_dot = x_dot + dt * x_acc
    x = x + dt * x_dot
    theta_dot = theta_dot + dt * theta_acc
    theta = theta + dt * theta_dot
    terminal = (
        x < -p.position_threshold
        or x > p.position_threshold
        or theta < -p.angle_threshold
        or theta > p.angle_threshold
    )
    # survival reward is paid on the failing step as well
    return (x, x_dot, theta, theta_dot), 1.0, terminal


class CartPole(Env):
    def __init__(self, params: CartPoleParams | None = None):
        self.params = params or CartPoleParams()
        p = self.params
        self.spec = EnvSpec(
            name="cartpole",
            action_count=2,
            obs_dim=4,
            max_episode_steps=p.max_episode_steps,
            gamma=p.gamma,
            obs_low=(-p.position_threshold, -3.0, -p.angle_threshold, -3.5),
            obs_high=(p.position_threshold, 3.0, p.angle_threshold, 3.5),
        )

    def initial_obs(self, rng):
        s = self.params.reset_spread
        return tuple(float(v) for v in rng.uniform(-s, s, 4))

    def dynamics(self, obs, action):
        return cartpole_dynamics(obs, action, self.params)
