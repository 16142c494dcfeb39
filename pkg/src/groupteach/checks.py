"""Deterministic invariant checks behind ``groupteach validate``."""
from __future__ import annotations

import json
import time
from dataclasses import replace

import numpy as np

from . import oracles
from .bec import ConstraintSet, HalfSpaceConstraint, constraints_from_demo, minimize, p_bec, sphere_points
from .belief import (
    Belief,
    LikelihoodParams,
    init_uniform_with_prior,
    log_likelihood_ratio,
    update,
)
from .config import StudyConfig
from .curriculum import all_targets, default_kcs
from .learner import CONFIRMATORY, CORRECTIVE, NOVICE, make_learner, receive_feedback
from .mdp import ACTIONS, GridEnvironment, feature_expectations, normalize, optimal_trajectory, rollout, solve_policy
from .team import TeamEvidence, common_update, joint_update

SMALL_ENVS = (
    GridEnvironment(3, 3, (0, 0), (2, 2), rubble=[(1, 1), (1, 0)]),
    GridEnvironment(3, 3, (0, 0), (2, 0), rubble=[(1, 0)], charger=(1, 2)),
    GridEnvironment(4, 2, (0, 0), (3, 0), rubble=[(1, 0), (2, 0)], charger=(2, 1)),
)
W_STAR = normalize((-3.0, 3.5, -1.0))


def _weights(seed: int, k: int) -> np.ndarray:
    return oracles.uniform_sphere(k, np.random.default_rng(seed))


def check_planner() -> str:
    worst = 0.0
    for i, env in enumerate(SMALL_ENVS):
        F = np.array([f for f, _, _ in oracles.enumerate_trajectories(env)])
        for w in [W_STAR, *_weights(i, 4)]:
            worst = max(worst, abs((F @ w).max() - w @ optimal_trajectory(env, w).features))
    assert worst <= 1e-9, f"planner misses the enumerated optimum by {worst:.3g}"
    return f"max gap {worst:.1e}"


def check_feature_expectations() -> str:
    env = SMALL_ENVS[1]
    pol = solve_policy(env, W_STAR)
    worst = 0.0
    for s in range(env.n_states):
        state = env.state_of(s)
        if env.is_goal(state):
            continue
        for a, name in enumerate(ACTIONS):
            ref = oracles.truncated_features(env, lambda st: ACTIONS[pol(env.state_index(st))], state, name)
            worst = max(worst, np.max(np.abs(feature_expectations(env, pol, state, a) - ref)))
    assert worst <= 1e-9, f"feature expectations off by {worst:.3g}"
    return f"max gap {worst:.1e}"


def check_demo_constraints() -> str:
    n = 0
    for env in SMALL_ENVS:
        for w in [W_STAR, *_weights(7, 3)]:
            pol = solve_policy(env, w)
            cs = constraints_from_demo(env, rollout(env, pol), pol)
            assert np.all(cs.normals @ w >= -1e-9), "a demo constraint excludes its own weights"
            n += len(cs)
    return f"{n} constraints admit their generating weights"


def check_likelihood_mass() -> str:
    rng = np.random.default_rng(0)
    pts = oracles.uniform_sphere(200_000, rng)
    out = []
    for m in (0.6, 0.75, 0.9):
        lp = LikelihoodParams(m)
        c = HalfSpaceConstraint(tuple(rng.normal(size=3)))
        dens = lp.uniform_density * np.exp(log_likelihood_ratio(pts, ConstraintSet((c,)), lp.kappa))
        total = 4 * np.pi * dens.mean()
        assert abs(total - 1.0) < 0.02, f"mass {m}: integral {total:.4f}"
        out.append(f"{total:.4f}")
    return "integrals " + ", ".join(out)


def check_update_consistency() -> str:
    b = init_uniform_with_prior(500, 3)
    c = ConstraintSet((HalfSpaceConstraint((1.0, -0.5, 0.2)),))
    before = p_bec(b, c)
    post = [p_bec(update(b, c, LikelihoodParams(m), resample_degenerate=False), c) for m in (0.6, 0.8, 0.95)]
    assert before < post[0] < post[1] < post[2], f"p_bec {before:.3f} -> {post}"
    return "p_bec " + " < ".join(f"{v:.3f}" for v in [before, *post])


def check_team_degenerate() -> str:
    b = init_uniform_with_prior(300, 4)
    cs = ConstraintSet((HalfSpaceConstraint((0.3, 1.0, -0.2)), HalfSpaceConstraint((-1.0, 0.1, 0.4))))
    lp = LikelihoodParams(0.76)
    ref = update(b, cs, lp, resample_degenerate=False)
    ev = TeamEvidence((cs,))
    for f in (common_update, joint_update):
        got = f(b, ev, lp, resample_degenerate=False)
        assert np.array_equal(got.weights, ref.weights), f"{f.__name__} differs for a one-member team"
    return "common = joint = individual for m = 1"


def check_minimize() -> str:
    rng = np.random.default_rng(5)
    cs = ConstraintSet.from_normals(rng.normal(size=(8, 3)) + [0, 0, -2])
    small = minimize(cs)
    pts = sphere_points(50_000, seed=1)
    assert np.array_equal(cs.satisfied_by(pts), small.satisfied_by(pts)), "minimize changed the region"
    return f"{len(cs)} -> {len(small)} constraints, region unchanged"


def check_p_bec() -> str:
    rng = np.random.default_rng(6)
    b = Belief(oracles.uniform_sphere(200, rng), rng.dirichlet(np.ones(200)))
    cs = ConstraintSet.from_normals(rng.normal(size=(3, 3)))
    got, ref = p_bec(b, cs), oracles.brute_p_bec(b.particles, b.weights, cs.normals)
    assert abs(got - ref) <= 1e-12, f"{got} != {ref}"
    return f"p_bec {got:.4f} matches"


def check_beta_arithmetic() -> str:
    from .curriculum import TestEnv

    env = GridEnvironment(3, 1, (0, 0), (2, 0), rubble=[(1, 0)])
    opt = optimal_trajectory(env, W_STAR)
    t = TestEnv(env, opt, ConstraintSet((HalfSpaceConstraint((0.0, 0.0, 1.0)),)))
    fixed = replace(NOVICE, beta0_std=0.0)
    l = receive_feedback(make_learner(fixed, 50, 0, point_increments=True), t, opt, CONFIRMATORY)
    assert l.beta == 0.736, l.beta
    # a rubble-loving learner shuttles over the rubble cell instead
    wrong = optimal_trajectory(env, normalize((1.0, 0.0, -0.1)))
    assert not wrong.same_behavior(opt)
    l = receive_feedback(make_learner(fixed, 50, 0, point_increments=True), t, wrong, CORRECTIVE)
    assert l.beta == 0.759, l.beta
    return "0.703 -> 0.736 / 0.759"


def check_kc_areas() -> str:
    from .bec import spherical_area

    kcs = default_kcs(W_STAR)
    areas, acc = [], ConstraintSet()
    for kc in kcs:
        assert np.all(kc.target_constraints.normals @ W_STAR >= 0), f"KC{kc.id} excludes w*"
        acc = acc + kc.target_constraints
        areas.append(spherical_area(acc).fraction)
    assert areas[0] > areas[1] > areas[2] > 0, areas
    return "cumulative areas " + " > ".join(f"{a:.4f}" for a in areas)


def check_session_determinism() -> str:
    from .study import build_domain, run_session

    cfg = StudyConfig(n_particles=150, period_cap=4)
    domain = build_domain(cfg)
    a = run_session("joint", "NNP", 0, domain)
    b = run_session("joint", "NNP", 0, build_domain(cfg))
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict()), "same seed gave different sessions"
    assert abs(a.team_knowledge - np.mean(a.per_member_knowledge)) < 1e-15
    assert 0.0 <= min(a.per_member_knowledge) and max(a.per_member_knowledge) <= 1.0
    targets = all_targets(domain.kcs)
    assert len(targets) == 6
    return f"{a.n_interactions} periods, identical traces"


CHECKS = (
    ("planner matches exhaustive enumeration", check_planner),
    ("feature expectations match a truncated rollout", check_feature_expectations),
    ("demo constraints admit the generating weights", check_demo_constraints),
    ("likelihood integrates to one", check_likelihood_mass),
    ("updates raise p_bec, more so with higher mass", check_update_consistency),
    ("one-member team updates equal individual updates", check_team_degenerate),
    ("minimize keeps the constraint region", check_minimize),
    ("p_bec matches a brute-force sum", check_p_bec),
    ("beta feedback arithmetic", check_beta_arithmetic),
    ("knowledge-component areas shrink", check_kc_areas),
    ("sessions are deterministic", check_session_determinism),
)


def run_checks(echo=print) -> bool:
    ok = True
    for name, fn in CHECKS:
        t = time.perf_counter()
        try:
            detail, passed = fn(), True
        except AssertionError as exc:
            detail, passed = str(exc) or "assertion failed", False
        ok &= passed
        echo(f"{'PASS' if passed else 'FAIL'}  {name}  ({detail}; {time.perf_counter() - t:.1f}s)")
    return ok
