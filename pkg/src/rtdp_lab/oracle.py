"""Exact baselines: tabular Q-value iteration and exhaustive depth-limited search.

These are the two ends of the planning spectrum (full sweeps with no
function approximation, and full enumeration of futures), used as ground
truth for the search and learning code.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .mdp import ContractViolation, Env, EnvSpec, EnvState, Transition


class NonConvergence(RuntimeError):
    pass


class SearchExplosion(RuntimeError):
    pass


@dataclass(frozen=True)
class TabularMdp:
    transition_probs: np.ndarray  # (S, A, S)
    rewards: np.ndarray  # (S, A, S)
    gamma: float

    def __post_init__(self):
        p = np.asarray(self.transition_probs, dtype=np.float64)
        r = np.asarray(self.rewards, dtype=np.float64)
        if p.ndim != 3 or p.shape[0] != p.shape[2] or r.shape != p.shape:
            raise ContractViolation("transition_probs and rewards must both be (S, A, S)")
        if (p < 0).any() or np.abs(p.sum(axis=2) - 1.0).max() > 1e-12:
            raise ContractViolation("each transition_probs[s, a, :] must sum to 1")
        if not np.isfinite(r).all():
            raise ContractViolation("rewards must be finite")
        if not 0.0 <= self.gamma <= 1.0:
            raise ContractViolation("gamma must lie in [0, 1]")
        object.__setattr__(self, "transition_probs", p)
        object.__setattr__(self, "rewards", r)

    @property
    def n_states(self) -> int:
        return self.transition_probs.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition_probs.shape[1]

    def expected_rewards(self) -> np.ndarray:
        return (self.transition_probs * self.rewards).sum(axis=2)


@dataclass(frozen=True)
class QTable:
    values: np.ndarray  # (S, A)
    iterations: int = 0
    residuals: tuple = ()


def bellman_update(mdp: TabularMdp, q: np.ndarray) -> np.ndarray:
    """One synchronous sweep: Q(s,a) <- E_s'[R(s,a,s') + gamma * max_a' Q(s',a')]."""
    v = q.max(axis=1)
    return mdp.expected_rewards() + mdp.gamma * mdp.transition_probs @ v


def q_value_iteration(mdp: TabularMdp, tolerance: float = 1e-10,
                      max_iterations: int = 100_000) -> QTable:
    """Full sweeps until successive tables differ by at most ``tolerance`` (sup norm).

    The returned table's Bellman residual is then at most ``gamma * tolerance``.
    With ``gamma == 1`` this only terminates when every policy reaches an
    absorbing zero-reward state.
    """
    if not tolerance > 0:
        raise ContractViolation("tolerance must be positive")
    q = np.zeros((mdp.n_states, mdp.n_actions))
    residuals = []
    for it in range(1, max_iterations + 1):
        q_next = bellman_update(mdp, q)
        residual = float(np.abs(q_next - q).max())
        residuals.append(residual)
        q = q_next
        if residual <= tolerance:
            return QTable(q, it, tuple(residuals))
    raise NonConvergence(
        f"Q-value iteration did not reach tolerance {tolerance:g} in {max_iterations} sweeps "
        f"(last residual {residuals[-1]:.3g}, gamma={mdp.gamma})"
    )


def greedy_policy(q) -> np.ndarray:
    """Per-state argmax action; ties go to the lowest action index."""
    values = q.values if isinstance(q, QTable) else np.asarray(q, dtype=np.float64)
    if not np.isfinite(values).all():
        raise ContractViolation("Q table must be finite")
    return np.argmax(values, axis=1)


def _outcomes(model, state, action):
    """``(prob, next_state, reward, terminal)`` for every successor."""
    if isinstance(model, TabularMdp):
        probs = model.transition_probs[state, action]
        return [(float(probs[s]), s, float(model.rewards[state, action, s]), False)
                for s in np.flatnonzero(probs)]
    tr = model.step(state, action)
    return [(1.0, tr.next_state, tr.reward, tr.terminal)]


def exhaustive_search(env, state, depth: int, gamma: float, leaf_value_fn=None,
                      node_cap: int = 2_000_000) -> np.ndarray:
    """Exact depth-limited expectimax value of every root action.

    ``env`` is a deterministic ``Env`` (states are ``EnvState``) or a
    ``TabularMdp`` (states are indices, all successors enumerated).
    Non-terminal states at the horizon are valued by ``leaf_value_fn``
    (0 when omitted).
    """
    if depth < 1:
        raise ContractViolation("depth must be >= 1")
    leaf = leaf_value_fn or (lambda s: 0.0)
    n_actions = env.n_actions if isinstance(env, TabularMdp) else env.spec.action_count
    nodes = 0

    def q_values(s, d):
        nonlocal nodes
        out = np.empty(n_actions)
        for a in range(n_actions):
            total = 0.0
            for p, s2, r, terminal in _outcomes(env, s, a):
                nodes += 1
                if nodes > node_cap:
                    raise SearchExplosion(f"exhaustive search exceeded {node_cap} nodes")
                if terminal:
                    future = 0.0
                elif d == 1:
                    future = float(leaf(s2))
                else:
                    future = float(q_values(s2, d - 1).max())
                total += p * (r + gamma * future)
            out[a] = total
        return out

    return q_values(state, depth)


def unroll(env: Env, state: EnvState, depth: int) -> tuple:
    """Depth-limited tree below ``state`` as a tabular MDP with one absorbing sink.

    Returns ``(mdp, root_index)``; horizon states transition to the sink at
    zero reward, so Q-value iteration with ``gamma=1`` converges on it.
    """
    states, edges = [state], []

    def grow(i, d):
        s = states[i]
        for a in range(env.spec.action_count):
            tr = env.step(s, a)
            j = len(states)
            states.append(tr.next_state)
            edges.append((i, a, j, tr.reward))
            if not tr.terminal and d > 1:
                grow(j, d - 1)

    grow(0, depth)
    n = len(states) + 1
    sink = n - 1
    p = np.zeros((n, env.spec.action_count, n))
    r = np.zeros_like(p)
    p[:, :, sink] = 1.0
    for i, a, j, rew in edges:
        p[i, a, sink] = 0.0
        p[i, a, j] = 1.0
        r[i, a, j] = rew
    return TabularMdp(p, r, env.spec.gamma), 0


class TreeEnv(Env):
    """Deterministic finite tree: ``child[node, a]`` and ``reward[node, a]``; -1 marks a leaf edge."""

    def __init__(self, child: np.ndarray, reward: np.ndarray, gamma: float = 1.0):
        self.child = np.asarray(child, dtype=np.int64)
        self.reward = np.asarray(reward, dtype=np.float64)
        n_nodes, k = self.child.shape
        self.spec = EnvSpec("tree", k, 1, 10**9, gamma, (0.0,), (float(max(n_nodes, 1)),))

    def initial_obs(self, rng=None):
        return (0,)

    def step(self, state, action, rng=None) -> Transition:
        if state.done:
            raise ContractViolation("step called on a terminal state")
        self.check_action(action)
        node = state.obs[0]
        nxt = int(self.child[node, action])
        terminal = nxt < 0
        return Transition(EnvState((nxt,), state.steps_taken + 1, terminal),
                          float(self.reward[node, action]), terminal)


def random_tree_env(rng, depth: int, branching: int, gamma: float = 1.0,
                    reward_low: float = 0.0, reward_high: float = 1.0) -> TreeEnv:
    """Complete tree of the given depth; every edge reward drawn uniformly."""
    if depth < 1 or branching < 2:
        raise ContractViolation("need depth >= 1 and branching >= 2")
    internal = sum(branching**d for d in range(depth))
    child = np.full((internal, branching), -1, dtype=np.int64)
    nxt = 1
    for node in range(internal):
        for a in range(branching):
            if nxt < internal:
                child[node, a] = nxt
                nxt += 1
    reward = rng.uniform(reward_low, reward_high, size=(internal, branching))
    return TreeEnv(child, reward, gamma)


def load_mdp_json(source) -> TabularMdp:
    """Parse the sparse JSON MDP format.

    ``{"n_states": S, "n_actions": A, "gamma": g,
       "transitions": [{"s": 0, "a": 1, "next": 2, "p": 1.0, "r": 0.5}, ...]}``

    ``gamma`` is optional (default 1.0). Unlisted (s, a) pairs are an error.
    """
    data = json.loads(source) if isinstance(source, str) else source
    try:
        n_s, n_a = int(data["n_states"]), int(data["n_actions"])
        p = np.zeros((n_s, n_a, n_s))
        r = np.zeros((n_s, n_a, n_s))
        for t in data["transitions"]:
            s, a, s2 = int(t["s"]), int(t["a"]), int(t["next"])
            p[s, a, s2] += float(t.get("p", 1.0))
            r[s, a, s2] = float(t.get("r", 0.0))
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise ContractViolation(f"malformed MDP document: {exc}") from exc
    missing = np.argwhere(p.sum(axis=2) == 0)
    if len(missing):
        s, a = missing[0]
        raise ContractViolation(f"no transitions listed for state {s}, action {a}")
    return TabularMdp(p, r, float(data.get("gamma", 1.0)))
