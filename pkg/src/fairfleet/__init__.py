"""Desk-scale maritime fleet twin with constrained hierarchical RL training.

The package couples a deterministic port-and-route simulator with a
multi-agent PPO stack: an emission cap enforced through a dual price,
fairness-aware reward shaping, and a two-level policy hierarchy. See the
README for the experiment harness and command line usage.
"""

from .constraints import DualState, constraint_penalty, dual_update, violation_stats
from .errors import ConfigurationError, ContractError, DomainError, StateCorruptionError
from .fairness import gini, fairness_term
from .harness import ExperimentSpec, parse_config, predefined_runs, run_experiment
from .scenario import Scenario, default_scenario, load_scenario, parse_scenario
from .sim import Environment
from .trainer import RunConfig, TrainResult, train

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "ContractError",
    "DomainError",
    "DualState",
    "Environment",
    "ExperimentSpec",
    "RunConfig",
    "Scenario",
    "StateCorruptionError",
    "TrainResult",
    "__version__",
    "constraint_penalty",
    "default_scenario",
    "dual_update",
    "fairness_term",
    "gini",
    "load_scenario",
    "parse_config",
    "parse_scenario",
    "predefined_runs",
    "run_experiment",
    "train",
    "violation_stats",
]
