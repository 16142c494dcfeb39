import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from groupteach.bec import ConstraintSet, p_bec, sphere_points
from groupteach.belief import Belief, LikelihoodParams, constraint_likelihood, init_uniform_with_prior, update
from groupteach.team import (
    TeamEvidence,
    common_update,
    joint_factor,
    joint_update,
    resolve_conflicts,
)

from .conftest import unit_vectors

seeds = st.integers(0, 2**31 - 1)
LP = LikelihoodParams(0.76)
C = ConstraintSet.from_normals([(0.6, -0.2, 0.3)])
NEG_C = ConstraintSet.from_normals([(-0.6, 0.2, -0.3)])


def _uniform(n=4000, seed=0):
    return Belief(unit_vectors(np.random.default_rng(seed), n), np.full(n, 1.0 / n))


def test_one_member_equals_individual_update():
    b = init_uniform_with_prior(300, 1)
    cs = ConstraintSet.from_normals([(1, 0, 0), (0.2, 1, 0.1), (0.5, 0.5, 0.9)])
    ref = update(b, cs, LikelihoodParams(0.95), np.random.default_rng(2))
    for f in (common_update, joint_update):
        got = f(b, TeamEvidence((cs,)), LikelihoodParams(0.95), np.random.default_rng(2))
        np.testing.assert_array_equal(got.weights, ref.weights)
        np.testing.assert_array_equal(got.particles, ref.particles)


def test_identical_members_compound_in_common_belief():
    b = init_uniform_with_prior(300, 1)
    twice = update(b, C + C, LP, resample_degenerate=False)
    got = common_update(b, TeamEvidence((C, C)), LP, resample_degenerate=False)
    np.testing.assert_allclose(got.weights, twice.weights, atol=1e-15)
    single = update(b, C, LP, resample_degenerate=False)
    assert p_bec(got, C) > p_bec(single, C)


def test_opposing_members_common_belief():
    b = _uniform()
    hi = p_bec(update(b, C, LP, resample_degenerate=False), C)
    lo = p_bec(update(b, NEG_C, LP, resample_degenerate=False), C)
    both = common_update(b, TeamEvidence((C, NEG_C)), LP, resolve=False, resample_degenerate=False)
    assert lo < p_bec(both, C) < hi
    resolved = common_update(b, TeamEvidence((C, NEG_C)), LP, resample_degenerate=False)
    assert lo <= p_bec(resolved, C) <= hi


def test_opposing_members_joint_belief_is_reflection_symmetric():
    b = _uniform()
    ev = TeamEvidence((C, NEG_C))
    u = C.unit_normals[0]
    reflected = b.particles - 2 * np.outer(b.particles @ u, u)
    np.testing.assert_allclose(joint_factor(b.particles, ev, LP), joint_factor(reflected, ev, LP), atol=1e-12)
    out = joint_update(b, ev, LP, resample_degenerate=False)
    assert p_bec(out, C) == pytest.approx(0.5, abs=0.03)


@given(seeds)
def test_joint_factor_is_max_of_member_products(seed):
    rng = np.random.default_rng(seed)
    pts = unit_vectors(rng, 200)
    members = tuple(ConstraintSet.from_normals(rng.normal(size=(int(rng.integers(1, 4)), 3)))
                    for _ in range(int(rng.integers(1, 4))))
    products = [np.prod([constraint_likelihood(pts, c, LP) for c in cs], axis=0) / LP.uniform_density ** len(cs)
                for cs in members]
    ref = np.log(np.max(products, axis=0))
    np.testing.assert_allclose(joint_factor(pts, TeamEvidence(members), LP), ref, atol=1e-9)


@given(seeds)
def test_joint_factor_bounds(seed):
    rng = np.random.default_rng(seed)
    pts = unit_vectors(rng, 300)
    members = tuple(ConstraintSet.from_normals(rng.normal(size=(2, 3))) for _ in range(3))
    jf = joint_factor(pts, TeamEvidence(members), LP)
    assert np.all(jf <= 0.0)
    for cs in members:
        assert np.all(jf >= joint_factor(pts, TeamEvidence((cs,)), LP))
        # anywhere inside one member's region the joint factor is at its top
        assert np.all(jf[cs.satisfied_by(pts)] == 0.0)


def test_resolve_keeps_agreeing_evidence():
    ev = TeamEvidence((C, C, ConstraintSet()))
    assert resolve_conflicts(ev) == ev


def test_resolve_drops_minority():
    out = resolve_conflicts(TeamEvidence((C, C, NEG_C)))
    assert out.members == (0, 1)


def test_resolve_tie_keeps_lower_index():
    out = resolve_conflicts(TeamEvidence((C, NEG_C)))
    assert out.members == (0,)


def test_resolve_drops_self_contradiction(caplog):
    bad = C + NEG_C + ConstraintSet.from_normals([(0, 0, 1.0)])
    with caplog.at_level(logging.WARNING):
        out = resolve_conflicts(TeamEvidence((C, bad)))
    assert out.members == (0,)
    assert "self-contradictory" in caplog.text


@given(seeds)
def test_resolved_evidence_is_consistent(seed):
    rng = np.random.default_rng(seed)
    members = tuple(ConstraintSet.from_normals(rng.normal(size=(int(rng.integers(1, 4)), 3)))
                    for _ in range(3))
    out = resolve_conflicts(TeamEvidence(members))
    assert len(out) >= 1
    assert out.pooled().satisfied_by(sphere_points()).any()


def test_empty_evidence_leaves_belief():
    b = init_uniform_with_prior(50, 0)
    assert common_update(b, TeamEvidence(()), LP) is b
    assert joint_update(b, TeamEvidence((ConstraintSet(),)), LP) is b
