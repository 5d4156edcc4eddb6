"""Planning-budget trade-offs for search-plus-learning agents on small control tasks."""
from .agent import AgentConfig, BudgetSpec, RunRecord, greedy_rollouts, run_training
from .envs import ENV_NAMES, make_env
from .mcts import SearchConfig, run_search
from .mdp import ContractViolation, EnvSpec, EnvState, RngStream, Transition

__version__ = "0.1.0"
