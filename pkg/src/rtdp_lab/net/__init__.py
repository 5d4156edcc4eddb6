from .buffer import ReplayBuffer, buffer_push, buffer_sample
from .network import (
    LOG_EPS, NetParams, OptState, TrainingTarget, adam_step, combined_loss, forward,
    forward_batch, gradients, init_params, loss_and_gradients, policy_loss, stack_batch,
    value_loss,
)
from . import checkpoint

__all__ = [
    "LOG_EPS", "NetParams", "OptState", "ReplayBuffer", "TrainingTarget", "adam_step",
    "buffer_push", "buffer_sample", "checkpoint", "combined_loss", "forward", "forward_batch",
    "gradients", "init_params", "loss_and_gradients", "policy_loss", "stack_batch", "value_loss",
]
