"""Simulated human learners with feedback-driven learning ability."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .bec import ConstraintSet, constraints_from_pair
from .belief import (
    DEFAULT_ETA,
    DEFAULT_N_PARTICLES,
    Belief,
    LikelihoodParams,
    init_uniform_with_prior,
    sample_weight,
    update_or_reinit,
)
from .curriculum import TestEnv
from .mdp import Trajectory, optimal_trajectory
from .seeding import EventStreams

BETA_MIN, BETA_MAX = 0.51, 0.95
CONFIRMATORY, CORRECTIVE = "confirmatory", "corrective"


@dataclass(frozen=True)
class LearnerProfile:
    kind: str
    beta0_mean: float
    beta0_std: float
    delta_beta_correct_std: float
    delta_beta_incorrect_std: float

    def __post_init__(self):
        if not 0.0 < self.beta0_mean < 1.0:
            raise ValueError("beta0_mean must lie in (0, 1)")
        if min(self.beta0_std, self.delta_beta_correct_std, self.delta_beta_incorrect_std) < 0:
            raise ValueError("standard deviations must be non-negative")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


# fitted to human learners; deltas are scales of half-normal increments
NOVICE = LearnerProfile("novice", 0.703, 0.034, 0.033, 0.056)
PROFICIENT = LearnerProfile("proficient", 0.809, 0.025, 0.022, 0.052)
PROFILES = {"N": NOVICE, "P": PROFICIENT}


@dataclass(eq=False)
class Learner:
    self_belief: Belief
    beta: float
    beta0: float
    profile: LearnerProfile
    streams: EventStreams
    eta: float = DEFAULT_ETA
    point_increments: bool = False
    beta_history: list = field(default_factory=list)

    @property
    def likelihood(self) -> LikelihoodParams:
        return LikelihoodParams(self.beta)


def clamp_beta(beta: float) -> float:
    return float(min(max(beta, BETA_MIN), BETA_MAX))


def make_learner(profile: LearnerProfile, n_particles: int = DEFAULT_N_PARTICLES, seed=None,
                 eta: float = DEFAULT_ETA, point_increments: bool = False) -> Learner:
    """Draw an initial learning ability and start from the prior belief.

    With ``point_increments`` each feedback adds the profile's delta exactly
    instead of a random half-normal increment.
    """
    streams = EventStreams(seed)
    # beta0 is drawn as a z-score so learners of either profile share it
    z = streams.next("beta0").standard_normal()
    beta0 = clamp_beta(profile.beta0_mean + profile.beta0_std * z)
    belief = init_uniform_with_prior(n_particles, streams.next("prior"))
    return Learner(belief, beta0, beta0, profile, streams, eta, point_increments, [beta0])


def observe_demos(l: Learner, conveyed: ConstraintSet) -> Learner:
    if len(conveyed):
        l.self_belief = update_or_reinit(l.self_belief, conveyed, l.likelihood, l.streams.next("demo"), l.eta)
    return l


def respond_to_test(l: Learner, t: TestEnv, seed=None) -> tuple[Trajectory, bool]:
    """Answer with the trajectory that is optimal for one sampled belief particle.

    Particle i is drawn with probability p_i by inverting the weight CDF
    with particles that answer correctly placed first.  Two learners given
    the same uniform draw are then coupled: the one holding more mass on
    correct answers is correct whenever the other one is.
    """
    rng = l.streams.next("test") if seed is None else np.random.default_rng(seed)
    b = l.self_belief
    opt = None if t.tset is None else t.tset.index_of(t.optimal)
    if opt is None:
        response = optimal_trajectory(t.env, sample_weight(b, rng))
        return response, response.same_behavior(t.optimal)
    answers = t.tset.best_indices(b.particles)
    order = np.argsort(answers != opt, kind="stable")
    cdf = np.cumsum(b.weights[order])
    i = order[min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), len(b) - 1)]
    return t.tset.trajectories[answers[i]], bool(answers[i] == opt)


def feedback_constraints(t: TestEnv, response: Trajectory, correct: bool) -> ConstraintSet:
    if correct:
        return t.discriminating.with_source("feedback")
    c = constraints_from_pair(t.optimal, response, "feedback")
    extra = ConstraintSet(() if c is None else (c,))
    return extra + t.discriminating.with_source("feedback")


def receive_feedback(l: Learner, t: TestEnv, response: Trajectory, kind: str) -> Learner:
    correct = response.same_behavior(t.optimal)
    if kind not in (CONFIRMATORY, CORRECTIVE):
        raise ValueError(f"unknown feedback kind {kind!r}")
    if (kind == CONFIRMATORY) != correct:
        raise ValueError(f"{kind} feedback does not match a {'correct' if correct else 'wrong'} response")
    l.self_belief = update_or_reinit(l.self_belief, feedback_constraints(t, response, correct),
                                     l.likelihood, l.streams.next("feedback"), l.eta)
    scale = l.profile.delta_beta_correct_std if correct else l.profile.delta_beta_incorrect_std
    z = l.streams.next("delta_beta").standard_normal()
    delta = scale if l.point_increments else abs(scale * z)
    l.beta = clamp_beta(l.beta + delta)
    l.beta_history.append(l.beta)
    return l


def reset_beta_for_new_kc(l: Learner) -> Learner:
    l.beta = l.beta0
    l.beta_history.append(l.beta)
    return l


def with_profile(profile: LearnerProfile, **changes) -> LearnerProfile:
    return replace(profile, **changes)
