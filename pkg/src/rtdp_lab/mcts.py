"""Network-guided Monte Carlo tree search producing policy and value targets.

One search builds a fresh tree from the root state and runs exactly
``n_mcts`` traces (select, expand, evaluate, back up). Leaves are valued by
the value head instead of a rollout; terminal leaves are worth 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .mdp import ContractViolation, Env, EnvState, RngStream
from .net.network import NetParams, forward

VARIANTS = ("standard_puct", "literal_eq7")
UNVISITED_RULES = ("first", "zero")


@dataclass(frozen=True)
class SearchConfig:
    """Per-search settings.

    ``unvisited`` decides how edges with no visits compete in selection:
    ``"zero"`` scores them with Q̄ = 0 inside the normal formula, ``"first"``
    gives every unvisited edge priority over visited siblings (uniform among
    themselves). With all-positive rewards ``"zero"`` never revisits the
    alternatives at small ``c``, so ``"first"`` is the default.
    """

    n_mcts: int = 16
    c: float = 1.0
    gamma: float = 1.0
    selection_variant: str = "standard_puct"
    unvisited: str = "first"

    def __post_init__(self):
        if self.n_mcts < 1:
            raise ContractViolation("n_mcts must be >= 1")
        if self.c < 0:
            raise ContractViolation("c must be >= 0")
        if self.selection_variant not in VARIANTS:
            raise ContractViolation(f"selection_variant must be one of {VARIANTS}")
        if self.unvisited not in UNVISITED_RULES:
            raise ContractViolation(f"unvisited must be one of {UNVISITED_RULES}")

    def with_c(self, c: float) -> "SearchConfig":
        return replace(self, c=c)


class SearchNode:
    __slots__ = ("state", "reward", "terminal", "prior", "n", "w", "n_total", "children")

    def __init__(self, state: EnvState, reward: float = 0.0, terminal: bool = False):
        self.state = state
        self.reward = reward  # reward collected on the edge into this node
        self.terminal = terminal
        self.prior = None
        self.n = None
        self.w = None
        self.n_total = 0
        self.children = None

    @property
    def expanded(self) -> bool:
        return self.prior is not None

    def set_priors(self, priors) -> None:
        k = len(priors)
        self.prior = [float(p) for p in priors]
        self.n = [0] * k
        self.w = [0.0] * k
        self.children = [None] * k

    def mean_q(self, a: int) -> float:
        """Q̄(s, a); NaN for an unvisited edge."""
        return self.w[a] / self.n[a] if self.n[a] else math.nan


@dataclass(frozen=True)
class SearchResult:
    root_counts: np.ndarray
    root_mean_q: np.ndarray
    policy_target: np.ndarray
    value_target: float
    traces_used: int


def uniform_evaluator(action_count: int, value: float = 0.0):
    """Evaluator with uniform priors and a constant leaf value."""
    priors = np.full(action_count, 1.0 / action_count)

    def evaluate(state: EnvState):
        return priors, value

    return evaluate


def net_evaluator(params: NetParams, env: Env):
    """Evaluate states with the network on env-normalized observations."""
    low = np.asarray(env.spec.obs_low, dtype=np.float64)
    scale = 2.0 / (np.asarray(env.spec.obs_high, dtype=np.float64) - low)

    def evaluate(state: EnvState):
        x = (np.asarray(state.obs, dtype=np.float64) - low) * scale - 1.0
        return forward(params, x)

    return evaluate


def _as_evaluator(net_params, env):
    if isinstance(net_params, NetParams):
        return net_evaluator(net_params, env)
    if callable(net_params):
        return net_params
    raise ContractViolation("net_params must be NetParams or an evaluator callable")


def _argmax_random_tie(scores, rng: RngStream) -> int:
    best = max(scores)
    ties = [i for i, s in enumerate(scores) if s == best]
    if len(ties) == 1:
        return ties[0]
    return ties[rng.choice_index(len(ties))]


def select_child(node: SearchNode, c: float, variant: str = "standard_puct",
                 rng: RngStream | None = None, unvisited: str = "zero") -> int:
    """Pick the edge to descend; exact ties are broken uniformly with ``rng``."""
    if not node.expanded:
        raise ContractViolation("select_child needs an expanded node")
    rng = rng if rng is not None else RngStream(0)
    counts, prior = node.n, node.prior
    if unvisited == "first":
        fresh = [a for a, k in enumerate(counts) if k == 0]
        if fresh:
            return fresh[0] if len(fresh) == 1 else fresh[rng.choice_index(len(fresh))]
    n_s = node.n_total
    scores = []
    if variant == "standard_puct":
        sqrt_n = math.sqrt(n_s)
        for a, k in enumerate(counts):
            q = node.w[a] / k if k else 0.0
            scores.append(q + c * prior[a] * sqrt_n / (1 + k))
    elif variant == "literal_eq7":
        for a, k in enumerate(counts):
            q = node.w[a] / k if k else 0.0
            scores.append(q + c * prior[a] * math.sqrt(k / (1 + n_s)))
    else:
        raise ContractViolation(f"unknown selection variant {variant!r}")
    return _argmax_random_tie(scores, rng)


def expand_evaluate(leaf: SearchNode, evaluator, action_count: int | None = None) -> float:
    """Attach priors to ``leaf`` and return its bootstrap value (0 when terminal)."""
    if leaf.expanded:
        raise ContractViolation("leaf is already expanded")
    if leaf.terminal:
        return 0.0
    priors, value = evaluator(leaf.state)
    if action_count is not None and len(priors) != action_count:
        raise ContractViolation("evaluator returned the wrong number of priors")
    leaf.set_priors(priors)
    return float(value)


def backup(path, leaf_value: float, gamma: float) -> None:
    """Propagate a trace's discounted payoff from the leaf back to the root.

    ``path`` is the list of ``(node, action)`` edges from root to leaf.
    """
    if not path:
        raise ContractViolation("backup needs a nonempty path")
    g = leaf_value
    for node, a in reversed(path):
        g = node.children[a].reward + gamma * g
        node.n[a] += 1
        node.w[a] += g
        node.n_total += 1


def value_target(root: SearchNode) -> float:
    """Visit-weighted mean of root Q̄ over visited actions."""
    if not root.n_total:
        raise ContractViolation("value_target needs at least one root visit")
    return sum(root.w[a] for a, k in enumerate(root.n) if k) / root.n_total


def policy_target(counts) -> np.ndarray:
    counts = np.asarray(counts, dtype=np.float64)
    return counts / counts.sum()


def run_trace(root: SearchNode, env: Env, evaluator, config: SearchConfig,
              rng: RngStream) -> None:
    node, path = root, []
    while True:
        a = select_child(node, config.c, config.selection_variant, rng, config.unvisited)
        path.append((node, a))
        child = node.children[a]
        if child is None:
            tr = env.step(node.state, a, rng)
            child = SearchNode(tr.next_state, tr.reward, tr.terminal)
            node.children[a] = child
            leaf_value = expand_evaluate(child, evaluator)
            break
        if child.terminal:
            leaf_value = 0.0
            break
        node = child
    backup(path, leaf_value, config.gamma)


def search_tree(root_state: EnvState, net_params, env: Env, config: SearchConfig,
                rng: RngStream) -> SearchNode:
    """Run the search and return the root node (for inspection)."""
    if root_state.done:
        raise ContractViolation("cannot search from a terminal state")
    evaluator = _as_evaluator(net_params, env)
    root = SearchNode(root_state)
    expand_evaluate(root, evaluator, env.spec.action_count)
    for _ in range(config.n_mcts):
        run_trace(root, env, evaluator, config, rng)
    return root


def run_search(root_state: EnvState, net_params, env: Env, config: SearchConfig,
               rng: RngStream) -> SearchResult:
    root = search_tree(root_state, net_params, env, config, rng)
    counts = np.array(root.n, dtype=np.int64)
    mean_q = np.array([root.mean_q(a) for a in range(len(counts))])
    return SearchResult(
        root_counts=counts,
        root_mean_q=mean_q,
        policy_target=policy_target(counts),
        value_target=value_target(root),
        traces_used=int(counts.sum()),
    )
