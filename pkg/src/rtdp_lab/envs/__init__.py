"""Native environments, selected by name: ``cartpole``, ``mountaincar``, ``racegrid``."""
import json
from dataclasses import fields
from importlib import resources

from ..mdp import ContractViolation
from .cartpole import CartPole, CartPoleParams, cartpole_dynamics
from .mountaincar import MountainCar, MountainCarParams, mountaincar_dynamics
from .racegrid import RaceGrid, RaceGridParams, racegrid_dynamics

ENV_NAMES = ("cartpole", "mountaincar", "racegrid")

_REGISTRY = {
    "cartpole": (CartPole, CartPoleParams),
    "mountaincar": (MountainCar, MountainCarParams),
    "racegrid": (RaceGrid, RaceGridParams),
}


def load_constants() -> dict:
    """The versioned physics/reward constants shipped with the package."""
    text = resources.files(__package__).joinpath("constants.json").read_text()
    return json.loads(text)


def make_env(name: str, overrides: dict | None = None):
    """Build an environment from the shipped constants plus optional overrides."""
    if name not in _REGISTRY:
        raise ContractViolation(f"unknown env {name!r}; choose from {', '.join(ENV_NAMES)}")
    env_cls, params_cls = _REGISTRY[name]
    values = dict(load_constants()[name])
    values.update(overrides or {})
    known = {f.name for f in fields(params_cls)}
    unknown = set(values) - known
    if unknown:
        raise ContractViolation(f"unknown {name} constants: {sorted(unknown)}")
    if "goal_center" in values:
        values["goal_center"] = tuple(values["goal_center"])
    return env_cls(params_cls(**values))


__all__ = [
    "ENV_NAMES", "CartPole", "CartPoleParams", "MountainCar", "MountainCarParams",
    "RaceGrid", "RaceGridParams", "cartpole_dynamics", "mountaincar_dynamics",
    "racegrid_dynamics", "load_constants", "make_env",
]
