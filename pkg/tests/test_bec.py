import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from groupteach import oracles
from groupteach.bec import (
    ConstraintSet,
    HalfSpaceConstraint,
    constraints_from_demo,
    constraints_from_pair,
    minimize,
    p_bec,
    spherical_area,
)
from groupteach.belief import Belief, init_uniform_with_prior
from groupteach.mdp import ACTIONS, GridEnvironment, optimal_trajectory, rollout, solve_policy

from .conftest import W_STAR, random_env, unit_vectors

seeds = st.integers(0, 2**31 - 1)


def test_one_step_demo_gives_one_distinct_constraint():
    env = GridEnvironment(2, 1, (0, 0), (1, 0))
    pol = solve_policy(env, W_STAR)
    cs = constraints_from_demo(env, rollout(env, pol), pol)
    # every other action bumps into a wall and costs one extra step
    assert len(cs) == len(ACTIONS) - 1
    assert len(minimize(cs)) == 1
    assert minimize(cs)[0].vector @ np.array([0, 0, -1.0]) > 0


@given(seeds)
def test_demo_constraints_admit_generating_weights(seed):
    rng = np.random.default_rng(seed)
    env = random_env(rng)
    w = unit_vectors(rng, 1)[0]
    pol = solve_policy(env, w)
    cs = constraints_from_demo(env, rollout(env, pol), pol)
    assert np.all(cs.normals @ w >= -1e-9)


def test_rubble_free_demo_contains_step_cost_weights():
    env = GridEnvironment(4, 3, (0, 0), (3, 2))
    w = np.array([0.0, 0.0, -1.0])
    pol = solve_policy(env, w)
    cs = constraints_from_demo(env, rollout(env, pol), pol)
    assert cs.satisfied_by(w)[0]


def test_pair_constraint_for_rubble_detour():
    env = GridEnvironment(3, 2, (0, 0), (2, 0), rubble=[(1, 0)], gamma=1.0)
    opt = optimal_trajectory(env, W_STAR)
    alt = optimal_trajectory(env, (0.0, 0.0, -1.0))
    np.testing.assert_allclose(opt.features, [0, 0, 4])
    np.testing.assert_allclose(alt.features, [1, 0, 2])
    c = constraints_from_pair(opt, alt)
    np.testing.assert_allclose(c.normal, [-1, 0, 2])
    assert c.satisfied_by(W_STAR)
    assert constraints_from_pair(opt, opt) is None


@given(seeds)
def test_pair_antisymmetry(seed):
    rng = np.random.default_rng(seed)
    env = random_env(rng)
    a = optimal_trajectory(env, unit_vectors(rng, 1)[0])
    b = optimal_trajectory(env, unit_vectors(rng, 1)[0])
    ab, ba = constraints_from_pair(a, b), constraints_from_pair(b, a)
    if ab is None:
        assert ba is None
    else:
        np.testing.assert_array_equal(ab.vector, -ba.vector)


def test_minimize_drops_scaled_duplicate():
    c = (0.3, -1.0, 0.2)
    out = minimize(ConstraintSet.from_normals([c, tuple(2 * np.array(c))]))
    assert len(out) == 1
    np.testing.assert_allclose(out[0].normal, c)
    assert len(minimize(ConstraintSet())) == 0


@given(seeds)
def test_minimize_keeps_region(seed):
    rng = np.random.default_rng(seed)
    cs = ConstraintSet.from_normals(rng.normal(size=(int(rng.integers(2, 9)), 3)) + [0, 0, -1.5])
    small = minimize(cs)
    assert len(small) <= len(cs)
    # fresh i.i.d. points, not the lattice minimize uses internally
    pts = unit_vectors(rng, 100_000)
    mismatch = np.mean(cs.satisfied_by(pts) != small.satisfied_by(pts))
    assert mismatch <= 1e-3


def test_area_values():
    assert spherical_area(ConstraintSet()) == (1.0, 0.0)
    one = spherical_area(ConstraintSet.from_normals([(0.2, 0.5, -1.0)]), seed=1)
    assert abs(one.fraction - 0.5) <= 3 * max(one.stderr, 1e-3)
    two = spherical_area(ConstraintSet.from_normals([(1, 0, 0), (0, 1, 0)]), seed=2)
    assert abs(two.fraction - 0.25) <= 3 * two.stderr
    with pytest.raises(ValueError):
        spherical_area(ConstraintSet.from_normals([(1, 0, 0)]), n_samples=100)


@given(seeds)
def test_area_is_scale_invariant_and_monotone(seed):
    rng = np.random.default_rng(seed)
    N = rng.normal(size=(3, 3))
    a = spherical_area(ConstraintSet.from_normals(N[:2])).fraction
    assert spherical_area(ConstraintSet.from_normals(N[:2] * rng.uniform(0.1, 10))).fraction == a
    assert spherical_area(ConstraintSet.from_normals(N)).fraction <= a


def test_p_bec_examples():
    b = Belief(np.array([[0, 0, -1.0], [0.6, 0, -0.8]]), np.array([0.5, 0.5]))
    assert p_bec(b, ConstraintSet.from_normals([(0, 0, -1)])) == 1.0
    uni = init_uniform_with_prior(4000, 0)
    assert p_bec(uni, ConstraintSet.from_normals([(1, 0, 0)])) == pytest.approx(0.5, abs=0.05)


@given(seeds)
def test_p_bec_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    b = Belief(unit_vectors(rng, 300), rng.dirichlet(np.ones(300)))
    cs = ConstraintSet.from_normals(rng.normal(size=(int(rng.integers(1, 5)), 3)))
    assert p_bec(b, cs) == pytest.approx(oracles.brute_p_bec(b.particles, b.weights, cs.normals), abs=1e-12)
    assert p_bec(b, minimize(cs)) == pytest.approx(p_bec(b, cs), abs=0.02)


def test_constraint_validation_and_round_trip():
    with pytest.raises(ValueError):
        HalfSpaceConstraint((0.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        HalfSpaceConstraint((1.0, 0.0, 0.0), "guess")
    cs = ConstraintSet.from_normals([(1, 2, 3), (-1, 0, 0.5)], "feedback")
    assert ConstraintSet.from_list(cs.to_list()) == cs
    assert (-cs[0]).normal == (-1.0, -2.0, -3.0)
