"""Exact simulation of Grover-based distribution encoding, quantum counting and
class-aggregated Boltzmann action selection for Q-learning."""
from .counting import ClassCounts, CountEstimate, CountingConfig, count, count_all_classes
from .encoder import (
    EncodedState,
    TargetDistribution,
    achieved_distribution,
    encode,
    random_reachable_targets,
    sample_value,
    sample_values,
    validate_targets,
)
from .envs import GridWorld, KArmedBandit, value_iteration
from .errors import GroverDistError
from .planner import EncodingPlan, PlannerState, StepPlan, plan_encoding, plan_step
from .qlearn import (
    PolicyConfig,
    TabularQ,
    TrainingConfig,
    select_action_classical,
    select_action_quantum,
    train,
)
from .statevector import (
    MarkedSet,
    StateVector,
    apply_conditional_grover,
    apply_grover_plain,
    apply_tick,
    new_uniform,
    probabilities,
    sample,
)

__version__ = "0.1.0"
