"""Knowledge components, demonstration selection and test selection."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import bec
from .bec import ConstraintSet, constraints_from_pair, minimize, p_bec, spherical_area
from .belief import Belief, LikelihoodParams, log_likelihood_ratio, reweight
from .mdp import (
    GridEnvironment,
    Trajectory,
    TrajectorySet,
    build_trajectory_set,
    normalize,
    optimal_trajectory,
)

log = logging.getLogger(__name__)

FACET_TOL = 1e-9
CF_REDRAWS = 10

# facet kinds, by which of (rubble, recharge) a constraint normal involves
RUBBLE_STEP = "rubble-step"
RECHARGE_STEP = "recharge-step"
RUBBLE_RECHARGE = "rubble-recharge"
STEP_ONLY = "step-only"


class CurriculumError(RuntimeError):
    """A knowledge component cannot be built for the configured weights."""


class CurriculumExhausted(RuntimeError):
    """No environment in the pool can teach or test the current component."""


def facet_kind(normal) -> str:
    r, c = abs(normal[0]) > FACET_TOL, abs(normal[1]) > FACET_TOL
    if r and c:
        return RUBBLE_RECHARGE
    if r:
        return RUBBLE_STEP
    if c:
        return RECHARGE_STEP
    return STEP_ONLY


@dataclass(frozen=True)
class KnowledgeComponent:
    id: int
    target_constraints: ConstraintSet
    description: str
    facet: str

    def conveyed_by(self, cs: ConstraintSet) -> bool:
        """Whether ``cs`` says anything about this component's trade-off."""
        return any(facet_kind(c.normal) == self.facet for c in cs)

    def tested_by(self, cs: ConstraintSet) -> bool:
        """Whether a test whose answer region is ``cs`` isolates this component.

        The first two components are tested only by environments that do
        not also hinge on the feature introduced later.
        """
        kinds = {facet_kind(c.normal) for c in cs}
        if self.facet not in kinds:
            return False
        if self.facet == RUBBLE_STEP:
            return not kinds & {RECHARGE_STEP, RUBBLE_RECHARGE}
        if self.facet == RECHARGE_STEP:
            return not kinds & {RUBBLE_STEP, RUBBLE_RECHARGE}
        return True


@dataclass(eq=False)
class Candidate:
    """A pool environment with everything the teacher precomputes for it."""

    index: int
    env: GridEnvironment
    tset: TrajectorySet
    demo_index: int
    discriminating: ConstraintSet

    @property
    def demo(self) -> Trajectory:
        return self.tset.trajectories[self.demo_index]


@dataclass(eq=False)
class DemoPlan:
    demos: list  # of (GridEnvironment, Trajectory)
    conveyed: ConstraintSet
    area: float
    env_indices: list = field(default_factory=list)
    gains: list = field(default_factory=list)
    plan_gain: float = 0.0
    fallback: bool = False

    def to_dict(self) -> dict:
        return {
            "env_indices": list(self.env_indices),
            "gains": list(self.gains),
            "plan_gain": self.plan_gain,
            "fallback": self.fallback,
            "conveyed": self.conveyed.to_list(),
            "area": self.area,
        }


@dataclass(eq=False)
class TestEnv:
    __test__ = False  # not a pytest class

    env: GridEnvironment
    optimal: Trajectory
    discriminating: ConstraintSet
    index: int = -1
    tset: TrajectorySet | None = None


# -- knowledge components -----------------------------------------------------

def _kc_envs(gamma: float):
    """Hand-built (environment, wrong weights) pairs, two bounds per component."""
    g = dict(gamma=gamma)
    corridor = dict(width=5, height=3, start=(0, 1), goal=(4, 1), blocked=[(1, 1), (2, 1), (3, 1)], **g)
    return {
        1: ("bounds on the cost of traversing rubble given the step cost", RUBBLE_STEP, [
            (GridEnvironment(5, 2, (0, 0), (4, 0), rubble=[(2, 0)], **g), (0.0, 0.0, -1.0)),
            (GridEnvironment(5, 4, (0, 0), (4, 0), rubble=[(2, 0)], blocked=[(2, 1), (2, 2)], **g),
             (-1.0, 0.0, -0.05)),
        ]),
        2: ("bounds on the reward for recharging given the step cost", RECHARGE_STEP, [
            (GridEnvironment(5, 2, (0, 0), (4, 0), charger=(2, 1), **g), (0.0, 0.0, -1.0)),
            (GridEnvironment(5, 5, (0, 0), (4, 0), charger=(2, 4), **g), (0.0, 1.0, -0.05)),
        ]),
        3: ("trade-off between crossing rubble and recharging the battery", RUBBLE_RECHARGE, [
            (GridEnvironment(rubble=[(1, 2)], charger=(2, 2), **corridor), (-1.0, 0.0, -0.1)),
            (GridEnvironment(rubble=[(1, 2), (3, 2)], charger=(2, 2), **corridor), (0.0, 1.0, -0.1)),
        ]),
    }


def default_kcs(w_star, gamma: float = 0.95) -> list[KnowledgeComponent]:
    w_star = normalize(w_star)
    kcs = []
    for kc_id, (desc, facet, pairs) in _kc_envs(gamma).items():
        targets = []
        for env, wrong in pairs:
            c = constraints_from_pair(optimal_trajectory(env, w_star),
                                      optimal_trajectory(env, normalize(wrong)), "target")
            if c is None or facet_kind(c.normal) != facet:
                raise CurriculumError(f"KC{kc_id} ({desc}) is vacuous for w* = {np.round(w_star, 4)}")
            targets.append(c)
        kcs.append(KnowledgeComponent(kc_id, ConstraintSet(targets), desc, facet))
    return kcs


def all_targets(kcs) -> ConstraintSet:
    out = ConstraintSet()
    for kc in kcs:
        out = out + kc.target_constraints
    return out


# -- environment pool -----------------------------------------------------------

def generate_env_pool(n: int = 64, seed=0, gamma: float = 0.95, horizon: int = 25,
                      min_size: int = 5, max_size: int = 7, max_rubble_density: float = 0.3,
                      charger_fraction: float = 0.5) -> list[GridEnvironment]:
    """Random delivery environments; every other one (by ratio) has a charger."""
    rng = np.random.default_rng(seed)
    n_charged = int(round(charger_fraction * n))
    envs = []
    for i in range(n):
        w, h = rng.integers(min_size, max_size + 1, size=2)
        cells = [(x, y) for x in range(w) for y in range(h)]
        while True:
            a, b = rng.choice(len(cells), size=2, replace=False)
            start, goal = cells[a], cells[b]
            if abs(start[0] - goal[0]) + abs(start[1] - goal[1]) >= max(w, h) - 1:
                break
        free = [c for c in cells if c not in (start, goal)]
        charger = None
        # spread chargers evenly through the pool
        if int((i + 1) * n_charged / n) > int(i * n_charged / n):
            charger = free.pop(int(rng.integers(len(free))))
        # a quarter of environments are rubble-free
        density = max(0.0, rng.uniform(-max_rubble_density / 3, max_rubble_density))
        k = int(round(density * len(free)))
        rubble = [free[j] for j in rng.choice(len(free), size=k, replace=False)] if k else []
        envs.append(GridEnvironment(int(w), int(h), start, goal, rubble=rubble, charger=charger,
                                    gamma=gamma, horizon=horizon))
    return envs


def normal_cone(tset: TrajectorySet, i: int, source: str = "demo") -> ConstraintSet:
    diffs = tset.features[i] - np.delete(tset.features, i, axis=0)
    return ConstraintSet.from_normals(diffs[np.any(np.abs(diffs) > bec.ZERO_TOL, axis=1)], source)


def build_candidates(envs, w_star) -> list[Candidate]:
    w_star = normalize(w_star)
    out = []
    for i, env in enumerate(envs):
        tset = build_trajectory_set(env)
        demo_index = tset.best_index(w_star)
        demo = optimal_trajectory(env, w_star)
        if not demo.same_behavior(tset.trajectories[demo_index]):
            raise RuntimeError(f"pool env {i}: planner and trajectory set disagree under w*")
        out.append(Candidate(i, env, tset, demo_index, minimize(normal_cone(tset, demo_index))))
    return out


# -- demonstrations -------------------------------------------------------------

def sample_counterfactual_weights(b: Belief, n_cf: int = 8, seed=None) -> np.ndarray:
    """Weighted draws of distinct particles, with replacement only if needed."""
    if n_cf < 1:
        raise ValueError("n_cf must be positive")
    rng = np.random.default_rng(seed)
    support = np.count_nonzero(b.weights > 0)
    replace = n_cf > support
    idx = rng.choice(len(b), size=n_cf, replace=replace, p=b.weights)
    return b.particles[idx].copy()


def conveyed_constraints(cand: Candidate, W: np.ndarray) -> ConstraintSet:
    """Demo-versus-counterfactual constraints for counterfactual weights ``W``."""
    idx = np.unique(cand.tset.best_indices(W))
    idx = idx[idx != cand.demo_index]
    diffs = cand.tset.features[cand.demo_index] - cand.tset.features[idx]
    return ConstraintSet.from_normals(diffs, "counterfactual")


def _rank(scored):
    gains = {s[0] for s in scored}
    if len(gains) < len(scored):
        for s in scored:
            s[3] = spherical_area(s[2]).fraction
    return sorted(scored, key=lambda s: (-s[0], s[3] or 0.0, s[1].index))


def _union(chosen) -> ConstraintSet:
    out = ConstraintSet()
    for s in chosen:
        out = out + s[2]
    return minimize(out)


def select_demos(kc: KnowledgeComponent, b: Belief, pool, n_demos: int = 2, n_cf: int = 8,
                 seed=None, lp: LikelihoodParams | None = None, exclude=()) -> DemoPlan:
    """Pick the environments whose demos most raise belief mass on ``kc``.

    Candidates are scored on a copy of ``b`` updated with each demo's
    counterfactual constraints; ties go to the smaller conveyed area, then
    to the lower pool index.  A plan whose combined constraints would lower
    that mass is cut to its best demo, and failing that the counterfactuals
    are redrawn.
    """
    if not pool:
        raise ValueError("empty environment pool")
    lp = lp or LikelihoodParams(0.76)
    rng = np.random.default_rng(seed)
    targets = kc.target_constraints
    before = p_bec(b, targets)

    def gain(cs):
        post = reweight(b, log_likelihood_ratio(b.particles, cs, lp.kappa))
        return round(p_bec(post, targets) - before, 12)

    fallback, used_fallback = None, False
    # a narrow belief can miss the component, or every plan can hurt; redraw a few times
    for _ in range(CF_REDRAWS):
        W = sample_counterfactual_weights(b, n_cf, rng)
        scored = []
        for cand in pool:
            if cand.index in exclude:
                continue
            cs = conveyed_constraints(cand, W)
            if kc.conveyed_by(cs):
                scored.append([gain(cs), cand, cs, None])
        if not scored:
            continue
        ranked = _rank(scored)
        chosen, conveyed = ranked[:n_demos], _union(ranked[:n_demos])
        plan_gain = gain(conveyed)
        if plan_gain < 0 and ranked[0][0] >= 0:
            chosen, conveyed, plan_gain = ranked[:1], _union(ranked[:1]), ranked[0][0]
        if plan_gain >= 0:
            break
        fallback = fallback or (chosen, conveyed, plan_gain)
    else:
        if fallback is None:
            raise CurriculumExhausted(f"no pool environment conveys KC{kc.id} from the sampled counterfactuals")
        log.info("every demo plan lowers KC%d knowledge; showing the first one drawn", kc.id)
        chosen, conveyed, plan_gain = fallback
        used_fallback = True

    return DemoPlan(
        demos=[(s[1].env, s[1].demo) for s in chosen],
        conveyed=conveyed,
        area=spherical_area(conveyed).fraction,
        env_indices=[s[1].index for s in chosen],
        gains=[s[0] for s in chosen],
        plan_gain=plan_gain,
        fallback=used_fallback,
    )


# -- tests ------------------------------------------------------------------------

def select_tests(kc: KnowledgeComponent, pool, n_tests: int = 1, exclude=(), used=None) -> list[TestEnv]:
    """Environments whose answer hinges on ``kc``, least-used first.

    ``used`` maps pool index to how often it has served as a test for this
    component; exact repeats only happen once every eligible env was used.
    """
    used = used or {}
    eligible = [c for c in pool if c.index not in exclude and kc.tested_by(c.discriminating)]
    if not eligible:
        raise CurriculumExhausted(f"no pool environment tests KC{kc.id}")
    eligible.sort(key=lambda c: (used.get(c.index, 0), c.index))
    return [TestEnv(c.env, c.demo, c.discriminating, c.index, c.tset) for c in eligible[:n_tests]]


def pool_summary(pool, kcs) -> dict:
    return {f"KC{kc.id}": sum(kc.tested_by(c.discriminating) for c in pool) for kc in kcs}

