"""Closed-loop machine teaching of reward functions to groups of learners."""
from .bec import (
    ConstraintSet,
    HalfSpaceConstraint,
    constraints_from_demo,
    constraints_from_pair,
    minimize,
    p_bec,
    spherical_area,
)
from .belief import (
    Belief,
    LikelihoodParams,
    constraint_likelihood,
    init_uniform_with_prior,
    resample,
    sample_weight,
    update,
)
from .config import COMPOSITIONS, STRATEGIES, StudyConfig, load_config
from .curriculum import (
    CurriculumError,
    CurriculumExhausted,
    KnowledgeComponent,
    default_kcs,
    sample_counterfactual_weights,
    select_demos,
    select_tests,
)
from .learner import (
    NOVICE,
    PROFICIENT,
    Learner,
    LearnerProfile,
    make_learner,
    observe_demos,
    receive_feedback,
    reset_beta_for_new_kc,
    respond_to_test,
)
from .mdp import (
    GridEnvironment,
    Policy,
    Trajectory,
    feature_expectations,
    optimal_trajectory,
    rollout,
    solve_policy,
)
from .study import SessionRecord, build_domain, run_session, run_study
from .team import TeamEvidence, common_update, joint_update, resolve_conflicts

__version__ = "0.1.0"
