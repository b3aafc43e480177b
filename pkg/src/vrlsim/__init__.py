"""Value reinforcement learning: belief models, RL/utility/VRL agents and the
consistency-preserving action filter that removes the incentive to wirehead."""

from .agents import (
    ActionValueTable,
    NoCPAction,
    choose,
    cp_actions,
    eep_deviation,
    is_eep,
    v_reduced,
    v_rl,
    v_utility,
    v_vrl,
)
from .beliefs import (
    BeliefModel,
    ConsistencyReport,
    Posterior,
    UtilityBelief,
    c_marginal,
    check_consistency,
    likelihood,
    posterior,
)
from .consistency import (
    ExtractionProblem,
    InnerRewardModel,
    InsufficientRank,
    NotADistribution,
    RankDeficient,
    build_reward_model,
    check_eps_isb_bound,
    convolutional_utility,
    eps_isb,
    extract,
    extract_prior,
    extraction_problem,
    find_anchor_states,
    reward_maximising_utility,
)
from .core import (
    Delusion,
    DomainError,
    Environment,
    RewardGrid,
    State,
    UtilityFunction,
    apply_delusion,
    is_isb,
    quantize,
)
from .runner import RunReport, run
from .scenarios import Scenario, ScenarioError, build_example3, build_example4, build_toy_model, load_scenario

__all__ = [
    "ActionValueTable",
    "apply_delusion",
    "BeliefModel",
    "build_example3",
    "build_example4",
    "build_reward_model",
    "build_toy_model",
    "c_marginal",
    "check_consistency",
    "check_eps_isb_bound",
    "choose",
    "ConsistencyReport",
    "convolutional_utility",
    "cp_actions",
    "Delusion",
    "DomainError",
    "eep_deviation",
    "Environment",
    "eps_isb",
    "extract",
    "extract_prior",
    "extraction_problem",
    "ExtractionProblem",
    "find_anchor_states",
    "InnerRewardModel",
    "InsufficientRank",
    "is_eep",
    "is_isb",
    "likelihood",
    "load_scenario",
    "NoCPAction",
    "NotADistribution",
    "Posterior",
    "posterior",
    "quantize",
    "RankDeficient",
    "reward_maximising_utility",
    "RewardGrid",
    "run",
    "RunReport",
    "Scenario",
    "ScenarioError",
    "State",
    "UtilityBelief",
    "UtilityFunction",
    "v_reduced",
    "v_rl",
    "v_utility",
    "v_vrl",
]

__version__ = "0.1.0"
