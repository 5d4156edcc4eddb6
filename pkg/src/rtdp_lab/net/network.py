"""Shared-trunk policy/value MLP with hand-written backprop and ADAM."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..mdp import ContractViolation
from . import kernels

LOG_EPS = 1e-12
PARAM_NAMES = ("w1", "b1", "w2", "b2", "wp", "bp", "wv", "bv")


@dataclass
class NetParams:
    """Weights of trunk layers (w1, w2), policy head (wp) and value head (wv)."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    wp: np.ndarray
    bp: np.ndarray
    wv: np.ndarray
    bv: np.ndarray
    flat: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        # All weights live in one contiguous vector; the named fields are views.
        arrays = [np.asarray(getattr(self, n), dtype=np.float64) for n in PARAM_NAMES]
        if self.flat is None or not all(np.shares_memory(a, self.flat) for a in arrays):
            self.flat = np.concatenate([a.ravel() for a in arrays])
            pos = 0
            for name, a in zip(PARAM_NAMES, arrays):
                setattr(self, name, self.flat[pos:pos + a.size].reshape(a.shape))
                pos += a.size

    @property
    def obs_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def action_count(self) -> int:
        return self.wp.shape[1]

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    def arrays(self) -> tuple:
        return tuple(getattr(self, n) for n in PARAM_NAMES)

    def copy(self) -> "NetParams":
        return NetParams(*self.arrays())

    def zeros_like(self) -> "NetParams":
        return NetParams(*(np.zeros_like(a) for a in self.arrays()))

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.flat).all())

    def evaluate(self, obs) -> tuple:
        return forward(self, obs)


def init_params(obs_dim: int, action_count: int, rng, hidden: int = 256,
                head_scale: float = 0.0) -> NetParams:
    """He-uniform trunk, heads drawn at ``head_scale`` (0 gives a uniform policy and zero value)."""

    def dense(fan_in, fan_out, bound):
        w = rng.uniform(-bound, bound, (fan_in, fan_out)) if bound > 0 else np.zeros((fan_in, fan_out))
        return np.ascontiguousarray(w, dtype=np.float64), np.zeros(fan_out)

    w1, b1 = dense(obs_dim, hidden, math.sqrt(6.0 / obs_dim))
    w2, b2 = dense(hidden, hidden, math.sqrt(6.0 / hidden))
    wp, bp = dense(hidden, action_count, head_scale / math.sqrt(hidden))
    wv, bv = dense(hidden, 1, head_scale / math.sqrt(hidden))
    return NetParams(w1, b1, w2, b2, wp, bp, wv, bv)


def forward(params: NetParams, obs) -> tuple:
    """Policy distribution and scalar value for one observation."""
    x = np.ascontiguousarray(obs, dtype=np.float64)
    if x.shape != (params.obs_dim,):
        raise ContractViolation(f"expected obs of shape ({params.obs_dim},), got {x.shape}")
    probs, value = kernels.forward_one(x, *params.arrays())
    return probs, float(value)


def forward_batch(params: NetParams, X) -> tuple:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.obs_dim:
        raise ContractViolation(f"expected batch of shape (n, {params.obs_dim}), got {X.shape}")
    _, _, probs, values = kernels.forward_batch(X, *params.arrays())
    return probs, values


def policy_loss(predicted, target, eps: float = LOG_EPS) -> float:
    """Cross-entropy ``-sum(target * log(predicted))``, with ``predicted`` clamped at ``eps``."""
    p = np.maximum(np.asarray(predicted, dtype=np.float64), eps)
    return float(-(np.asarray(target, dtype=np.float64) * np.log(p)).sum())


def value_loss(predicted: float, target: float) -> float:
    return float((predicted - target) ** 2)


@dataclass(frozen=True)
class TrainingTarget:
    state_obs: np.ndarray
    policy_target: np.ndarray
    value_target: float

    def __post_init__(self):
        pt = np.asarray(self.policy_target, dtype=np.float64)
        if abs(pt.sum() - 1.0) > 1e-9 or (pt < 0).any():
            raise ContractViolation("policy_target must be a probability vector")
        if not math.isfinite(self.value_target):
            raise ContractViolation("value_target must be finite")


def stack_batch(batch) -> tuple:
    X = np.stack([np.asarray(t.state_obs, dtype=np.float64) for t in batch])
    P = np.stack([np.asarray(t.policy_target, dtype=np.float64) for t in batch])
    V = np.array([t.value_target for t in batch], dtype=np.float64)
    return X, P, V


def loss_and_gradients(params: NetParams, X, P, V, out: NetParams | None = None) -> tuple:
    """``(total, policy_part, value_part, grads)`` for arrays already stacked.

    Pass ``out`` (shaped like ``params``) to reuse a gradient buffer.
    """
    if len(X) == 0:
        raise ContractViolation("gradients need a nonempty batch")
    out = out if out is not None else params.zeros_like()
    total, ce, mse = kernels.loss_and_grads_into(
        np.ascontiguousarray(X, dtype=np.float64),
        np.ascontiguousarray(P, dtype=np.float64),
        np.ascontiguousarray(V, dtype=np.float64),
        LOG_EPS,
        *params.arrays(),
        *out.arrays(),
    )
    return float(total), float(ce), float(mse), out


def combined_loss(params: NetParams, batch) -> float:
    X, P, V = stack_batch(batch)
    return loss_and_gradients(params, X, P, V)[0]


def gradients(params: NetParams, batch) -> NetParams:
    """Analytic gradient of the batch-mean policy + value loss, shaped like ``params``."""
    if len(batch) == 0:
        raise ContractViolation("gradients need a nonempty batch")
    return loss_and_gradients(params, *stack_batch(batch))[3]


@dataclass
class OptState:
    m: NetParams
    v: NetParams
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: NetParams, lr: float = 1e-3, **kw) -> "OptState":
        return cls(params.zeros_like(), params.zeros_like(), 0, lr, **kw)


def adam_step(params: NetParams, grads: NetParams, opt: OptState, inplace: bool = False):
    """Bias-corrected ADAM step; returns ``(params, opt_state)``.

    With ``inplace=False`` the inputs are left untouched.
    """
    if not inplace:
        params, opt = params.copy(), OptState(opt.m.copy(), opt.v.copy(), opt.step, opt.lr,
                                              opt.beta1, opt.beta2, opt.eps)
    for name in PARAM_NAMES:
        if getattr(params, name).shape != getattr(grads, name).shape:
            raise ContractViolation(f"gradient shape mismatch for {name}")
    opt.step += 1
    kernels.adam_update(params.flat, grads.flat, opt.m.flat, opt.v.flat,
                        opt.lr, opt.beta1, opt.beta2, opt.eps, float(opt.step))
    return params, opt


__all__ = [
    "NetParams", "OptState", "TrainingTarget", "adam_step", "combined_loss", "forward",
    "forward_batch", "gradients", "init_params", "loss_and_gradients", "policy_loss",
    "stack_batch", "value_loss", "LOG_EPS",
]
