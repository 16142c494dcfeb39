"""Closed-loop team teaching sessions and the strategy x composition study."""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bec import ConstraintSet, constraints_from_pair, p_bec
from .belief import Belief, LikelihoodParams, init_uniform_with_prior, jitter, update_or_reinit
from .config import GROUP_STRATEGIES, StudyConfig
from .curriculum import (
    Candidate,
    CurriculumExhausted,
    KnowledgeComponent,
    all_targets,
    build_candidates,
    default_kcs,
    generate_env_pool,
    select_demos,
    select_tests,
)
from .learner import (
    CONFIRMATORY,
    CORRECTIVE,
    Learner,
    feedback_constraints,
    make_learner,
    observe_demos,
    receive_feedback,
    reset_beta_for_new_kc,
    respond_to_test,
)
from .seeding import key, seed_sequence, stream
from .team import TeamEvidence, common_update, joint_update

log = logging.getLogger(__name__)

CSV_COLUMNS = ("strategy", "composition", "replicate", "n_interactions", "team_knowledge",
               "member_knowledge_1", "member_knowledge_2", "member_knowledge_3",
               "mean_demo_area", "converged")


@dataclass(eq=False)
class Domain:
    """Everything shared by all sessions of a study: w*, KCs and the env pool."""

    config: StudyConfig
    w_star: np.ndarray
    kcs: list[KnowledgeComponent]
    targets: ConstraintSet
    pool: list[Candidate]


def build_domain(config: StudyConfig) -> Domain:
    w_star = np.asarray(config.w_star) / np.linalg.norm(config.w_star)
    kcs = default_kcs(w_star, config.gamma)
    envs = generate_env_pool(config.pool_size, config.resolved_pool_seed, config.gamma, config.horizon,
                             config.pool_min_size, config.pool_max_size, config.max_rubble_density,
                             config.charger_fraction)
    return Domain(config, w_star, kcs, all_targets(kcs), build_candidates(envs, w_star))


# -- seeding --------------------------------------------------------------------

def learner_seed(master_seed: int, replicate: int, member: int) -> np.random.SeedSequence:
    # shared across strategies and compositions: paired comparisons see the same draws
    return seed_sequence(master_seed, "learner", replicate, member)


def teacher_seed(master_seed: int, strat: str, replicate: int, *more) -> np.random.SeedSequence:
    return seed_sequence(master_seed, "teacher", strat, replicate, *more)


# -- session state ----------------------------------------------------------------

@dataclass(eq=False)
class SessionState:
    learners: list[Learner]
    teacher_beliefs: list[Belief]
    common_belief: Belief
    joint_belief: Belief
    seed: np.random.SeedSequence
    kc_index: int = 0
    period_count: int = 0
    test_usage: dict = field(default_factory=dict)

    @property
    def team_size(self) -> int:
        return len(self.learners)

    def rng(self, purpose: str) -> np.random.Generator:
        """The teacher's generator for ``purpose`` in the current period."""
        return stream(self.seed, purpose, self.period_count)


def new_session_state(learners: list[Learner], config: StudyConfig, seed=None) -> SessionState:
    seed = seed_sequence(seed)
    # the teacher starts from the same prior it assumes every learner holds
    prior = init_uniform_with_prior(config.n_particles, stream(seed, "prior"))
    return SessionState(
        learners=learners,
        teacher_beliefs=[prior.copy() for _ in learners],
        common_belief=prior.copy(),
        joint_belief=prior.copy(),
        seed=seed,
    )


def strategy_belief(st: SessionState, strat: str, targets: ConstraintSet) -> Belief:
    if strat == "common":
        return st.common_belief
    if strat == "joint":
        return st.joint_belief
    if strat not in ("individual_low", "individual_high"):
        raise ValueError(f"strategy {strat!r} has no belief of its own")
    knowledge = [p_bec(b, targets) for b in st.teacher_beliefs]
    pick = np.argmin(knowledge) if strat == "individual_low" else np.argmax(knowledge)
    return st.teacher_beliefs[int(pick)]


def knowledge_metrics(st: SessionState, targets: ConstraintSet) -> tuple[list[float], float]:
    per_member = [p_bec(l.self_belief, targets) for l in st.learners]
    return per_member, float(np.mean(per_member))


def _teacher_test_evidence(tests, responses) -> list[ConstraintSet]:
    """What the teacher infers from each member's answers."""
    per_member = []
    for member_responses in responses:
        cs = ConstraintSet()
        for t, (resp, correct) in zip(tests, member_responses):
            if correct:
                cs = cs + t.discriminating.with_source("test_response")
            else:
                # the learner revealed a preference for their own answer
                c = constraints_from_pair(resp, t.optimal, "test_response")
                if c is not None:
                    cs = cs + ConstraintSet((c,))
        per_member.append(cs)
    return per_member


def _update_team(st: SessionState, per_member: list[ConstraintSet], lp: LikelihoodParams,
                 config: StudyConfig, rng, noise: float = 0.0) -> None:
    ev = TeamEvidence(tuple(per_member))
    st.common_belief = common_update(st.common_belief, ev, lp, rng, config.eta)
    st.joint_belief = joint_update(st.joint_belief, ev, lp, rng, config.eta)
    if noise > 0:
        for name in ("common_belief", "joint_belief"):
            b = getattr(st, name)
            setattr(st, name, Belief(jitter(b.particles, noise, rng), b.weights))


def run_interaction_period(st: SessionState, strat: str, domain: Domain) -> dict:
    """Demos, tests and feedback for the current knowledge component."""
    config = domain.config
    kc = domain.kcs[st.kc_index]
    teacher_lp = LikelihoodParams(config.teacher_mass)
    response_lp = LikelihoodParams(config.response_mass or config.teacher_mass)
    sampling_belief = strategy_belief(st, strat, domain.targets)

    plan = select_demos(kc, sampling_belief, domain.pool, config.n_demos, config.n_cf,
                        st.rng("counterfactuals"), teacher_lp)
    for l in st.learners:
        observe_demos(l, plan.conveyed)
    rng = st.rng("demo_update")
    st.teacher_beliefs = [update_or_reinit(b, plan.conveyed, teacher_lp, rng, config.eta)
                          for b in st.teacher_beliefs]
    # demos are common to everyone, so team beliefs take them once
    st.common_belief = update_or_reinit(st.common_belief, plan.conveyed, teacher_lp, rng, config.eta)
    st.joint_belief = update_or_reinit(st.joint_belief, plan.conveyed, teacher_lp, rng, config.eta)

    usage = st.test_usage.setdefault(kc.id, {})
    tests = select_tests(kc, domain.pool, config.n_tests, exclude=set(plan.env_indices), used=usage)
    for t in tests:
        usage[t.index] = usage.get(t.index, 0) + 1
    responses = [[respond_to_test(l, t) for t in tests] for l in st.learners]

    evidence = _teacher_test_evidence(tests, responses)
    rng = st.rng("response_update")
    for i, cs in enumerate(evidence):
        b = update_or_reinit(st.teacher_beliefs[i], cs, response_lp, rng, config.eta)
        st.teacher_beliefs[i] = Belief(jitter(b.particles, config.nu, rng), b.weights)
    _update_team(st, evidence, response_lp, config, rng, noise=config.nu)

    feedback = []
    for l, member_responses in zip(st.learners, responses):
        cs = ConstraintSet()
        for t, (resp, correct) in zip(tests, member_responses):
            receive_feedback(l, t, resp, CONFIRMATORY if correct else CORRECTIVE)
            cs = cs + feedback_constraints(t, resp, correct)
        feedback.append(cs)
    if config.teacher_models_feedback:
        # the teacher expects everyone to learn from the feedback it gave
        rng = st.rng("feedback_update")
        st.teacher_beliefs = [update_or_reinit(b, cs, teacher_lp, rng, config.eta)
                              for b, cs in zip(st.teacher_beliefs, feedback)]
        _update_team(st, feedback, teacher_lp, config, rng)

    st.period_count += 1
    all_correct = all(correct for member in responses for _, correct in member)
    outcome = {
        "period": st.period_count,
        "kc": kc.id,
        "demos": plan.to_dict(),
        "tests": [t.index for t in tests],
        "correct": [[bool(c) for _, c in member] for member in responses],
        "beta": [l.beta for l in st.learners],
        "advanced": all_correct,
    }
    if all_correct:
        st.kc_index += 1
        for l in st.learners:
            reset_beta_for_new_kc(l)
    return outcome


@dataclass
class SessionRecord:
    strategy: str
    composition: str
    replicate: int
    seed: int
    n_interactions: int
    per_member_knowledge: list
    team_knowledge: float
    mean_demo_area: float
    converged: bool
    periods: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    aborted: str | None = None

    @property
    def session_id(self) -> str:
        return f"{self.strategy}_{self.composition}_{self.replicate:03d}"

    def csv_row(self) -> list:
        members = list(self.per_member_knowledge) + [""] * (3 - len(self.per_member_knowledge))
        return [self.strategy, self.composition, self.replicate, self.n_interactions,
                repr(self.team_knowledge), *[m if m == "" else repr(m) for m in members[:3]],
                repr(self.mean_demo_area), int(self.converged)]

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "composition": self.composition,
            "replicate": self.replicate,
            "seed": self.seed,
            "n_interactions": self.n_interactions,
            "per_member_knowledge": self.per_member_knowledge,
            "team_knowledge": self.team_knowledge,
            "mean_demo_area": self.mean_demo_area,
            "converged": self.converged,
            "aborted": self.aborted,
            "periods": self.periods,
            "snapshots": self.snapshots,
        }


def _run_until_done(st: SessionState, strat: str, domain: Domain, snapshots: bool):
    periods, shots, aborted = [], [], None
    while st.kc_index < len(domain.kcs) and st.period_count < domain.config.period_cap:
        try:
            periods.append(run_interaction_period(st, strat, domain))
        except CurriculumExhausted as exc:
            aborted = str(exc)
            log.warning("session aborted: %s", exc)
            break
        if snapshots:
            shots.append({"period": st.period_count,
                          "knowledge": knowledge_metrics(st, domain.targets)[0],
                          "learners": [l.self_belief.to_dict() for l in st.learners]})
    return periods, shots, aborted


def run_solo_session(learner: Learner, domain: Domain, seed, snapshots: bool = False):
    """Teach one learner alone; the individual strategy on a team of one."""
    st = new_session_state([learner], domain.config, seed)
    periods, shots, aborted = _run_until_done(st, "individual_low", domain, snapshots)
    return st, periods, shots, aborted


def run_session(strat: str, comp: str, replicate: int, domain: Domain, snapshots: bool = False,
                learner_factory=None) -> SessionRecord:
    """One team taught until every KC is learned or the period cap is hit.

    The baseline teaches each member alone, one after another, and sums
    their interaction counts.
    """
    config = domain.config
    master = config.master_seed
    factory = learner_factory or (lambda kind, member: make_learner(
        config.profiles[kind], config.n_particles, learner_seed(master, replicate, member),
        config.eta, config.point_increments))
    learners = [factory(kind, i) for i, kind in enumerate(comp)]
    seed = key(f"{master}|{strat}|{comp}|{replicate}")

    if strat == "baseline":
        total, areas, periods, shots, knowledge, done, aborted = 0, [], [], [], [], True, None
        for i, l in enumerate(learners):
            st, p, s, a = run_solo_session(l, domain, teacher_seed(master, strat, replicate, i), snapshots)
            for rec in p:
                rec["member"] = i
            total += st.period_count
            periods += p
            shots += s
            areas += [rec["demos"]["area"] for rec in p]
            knowledge.append(p_bec(l.self_belief, domain.targets))
            done = done and st.kc_index == len(domain.kcs)
            aborted = aborted or a
        return SessionRecord(strat, comp, replicate, seed, total, knowledge, float(np.mean(knowledge)),
                             float(np.mean(areas)) if areas else float("nan"), done, periods, shots, aborted)

    if strat not in GROUP_STRATEGIES:
        raise ValueError(f"unknown strategy {strat!r}")
    st = new_session_state(learners, config, teacher_seed(master, strat, replicate))
    periods, shots, aborted = _run_until_done(st, strat, domain, snapshots)
    per_member, team = knowledge_metrics(st, domain.targets)
    areas = [rec["demos"]["area"] for rec in periods]
    return SessionRecord(strat, comp, replicate, seed, st.period_count, per_member, team,
                         float(np.mean(areas)) if areas else float("nan"),
                         st.kc_index == len(domain.kcs), periods, shots, aborted)


# -- study ------------------------------------------------------------------------

_WORKER_DOMAIN: Domain | None = None


def _init_worker(domain: Domain):
    global _WORKER_DOMAIN
    _WORKER_DOMAIN = domain


def _run_cell(args):
    strat, comp, rep, snapshots = args
    return run_session(strat, comp, rep, _WORKER_DOMAIN, snapshots)


def study_cells(config: StudyConfig):
    return [(s, c, r) for s in config.strategies for c in config.compositions for r in range(config.replicates)]


def run_study(config: StudyConfig, out_dir=None, parallel: int = 1, domain: Domain | None = None,
              snapshots: bool = False) -> list[SessionRecord]:
    """Run every (strategy, composition, replicate) cell in a fixed order.

    With ``out_dir`` set, rows are appended to ``study.csv`` as sessions
    finish (in cell order) and full traces go to ``sessions/<id>.json``.
    """
    domain = domain or build_domain(config)
    cells = [(*cell, snapshots) for cell in study_cells(config)]
    writer = _StudyWriter(out_dir) if out_dir is not None else None
    records = []
    try:
        if parallel > 1:
            with ProcessPoolExecutor(parallel, initializer=_init_worker, initargs=(domain,)) as ex:
                for rec in ex.map(_run_cell, cells, chunksize=1):
                    records.append(rec)
                    if writer:
                        writer.write(rec)
        else:
            for strat, comp, rep, snap in cells:
                rec = run_session(strat, comp, rep, domain, snap)
                records.append(rec)
                if writer:
                    writer.write(rec)
    finally:
        if writer:
            writer.close()
    return records


class _StudyWriter:
    def __init__(self, out_dir):
        self.root = Path(out_dir)
        (self.root / "sessions").mkdir(parents=True, exist_ok=True)
        self._fh = open(self.root / "study.csv", "w", newline="")
        self._csv = csv.writer(self._fh, lineterminator="\n")
        self._csv.writerow(CSV_COLUMNS)
        self._fh.flush()

    def write(self, rec: SessionRecord):
        self._csv.writerow(rec.csv_row())
        self._fh.flush()
        # serialize first so a failure never leaves a truncated trace
        text = json.dumps(rec.to_dict())
        (self.root / "sessions" / f"{rec.session_id}.json").write_text(text)

    def close(self):
        self._fh.close()


def read_study_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
