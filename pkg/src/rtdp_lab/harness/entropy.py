"""Policy-entropy maps over a two-dimensional state space."""
from dataclasses import dataclass

import numpy as np

from ..mdp import ContractViolation, EnvSpec
from ..net.network import NetParams, forward_batch


@dataclass(frozen=True)
class EntropyMap:
    episode: int
    resolution: int
    x: np.ndarray  # (resolution * resolution,) raw state coordinates
    y: np.ndarray
    entropy: np.ndarray  # nats


def policy_entropy(probs) -> np.ndarray:
    """Row-wise Shannon entropy in nats, with 0 log 0 = 0."""
    p = np.asarray(probs, dtype=np.float64)
    logs = np.log(np.where(p > 0, p, 1.0))
    return -(p * logs).sum(axis=-1)


def entropy_map(net_params: NetParams, env_spec: EnvSpec, grid_resolution: int = 21,
                episode_label: int = 0) -> EntropyMap:
    """Evaluate the policy head on a uniform grid spanning the env's observation box."""
    if env_spec.obs_dim != 2 or len(env_spec.obs_low) != 2:
        raise ContractViolation(f"entropy maps need a 2-D state space; {env_spec.name} has "
                                f"{env_spec.obs_dim} dimensions")
    if grid_resolution < 2:
        raise ContractViolation("grid_resolution must be >= 2")
    (x0, y0), (x1, y1) = env_spec.obs_low, env_spec.obs_high
    gx, gy = np.meshgrid(np.linspace(x0, x1, grid_resolution),
                         np.linspace(y0, y1, grid_resolution), indexing="ij")
    u = np.linspace(-1.0, 1.0, grid_resolution)  # same points in network input space
    ux, uy = np.meshgrid(u, u, indexing="ij")
    probs, _ = forward_batch(net_params, np.column_stack([ux.ravel(), uy.ravel()]))
    # roundoff can leave the uniform case a hair above log|A|
    h = np.clip(policy_entropy(probs), 0.0, np.log(env_spec.action_count))
    return EntropyMap(int(episode_label), grid_resolution, gx.ravel(), gy.ravel(), h)
