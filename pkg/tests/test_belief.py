import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from groupteach.bec import ConstraintSet, HalfSpaceConstraint, p_bec
from groupteach.belief import (
    Belief,
    DegenerateUpdateError,
    LikelihoodParams,
    concentration_for_mass,
    constraint_likelihood,
    init_uniform_with_prior,
    jitter,
    resample,
    reweight,
    sample_weight,
    update,
    update_or_reinit,
)

from .conftest import unit_vectors

seeds = st.integers(0, 2**31 - 1)
masses = st.floats(0.55, 0.97)


def _angle(a, b):
    return np.arccos(np.clip(np.sum(a * b, axis=-1), -1.0, 1.0))


def test_prior_shape():
    b = init_uniform_with_prior(2000, 0)
    assert np.all(b.particles[:, 2] < 0)
    np.testing.assert_allclose(np.linalg.norm(b.particles, axis=1), 1.0)
    assert np.all(b.weights == 1 / 2000)
    assert np.all(np.abs(b.particles[:, :2].mean(axis=0)) <= 4 / np.sqrt(2000))
    with pytest.raises(ValueError):
        init_uniform_with_prior(1)


@pytest.mark.parametrize("m", [0.6, 0.76, 0.9])
def test_concentration_solves_normalization(m):
    k = concentration_for_mass(m)
    assert -np.expm1(-k) / k == pytest.approx((1 - m) / m, rel=1e-10)


def test_concentration_grows_with_mass():
    ks = [concentration_for_mass(m) for m in (0.55, 0.7, 0.8, 0.9, 0.95)]
    assert all(a < b for a, b in zip(ks, ks[1:]))
    for m in (0.5, 1.0, 0.3):
        with pytest.raises(ValueError):
            LikelihoodParams(m)


def test_likelihood_shape():
    c = HalfSpaceConstraint((0.0, 0.0, 1.0))
    lp = LikelihoodParams(0.8)
    eps = 1e-9
    above = constraint_likelihood(np.array([np.sqrt(1 - eps**2), 0, eps]), c, lp)
    below = constraint_likelihood(np.array([np.sqrt(1 - eps**2), 0, -eps]), c, lp)
    assert above == pytest.approx(below, rel=1e-6)
    zs = np.linspace(-1, 0, 11)
    pts = np.column_stack([np.sqrt(1 - zs**2), np.zeros_like(zs), zs])
    dens = constraint_likelihood(pts, c, lp)
    assert np.all(np.diff(dens) > 0)
    assert dens[0] == constraint_likelihood(np.array([0, 0, -1.0]), c, lp)
    with pytest.raises(ValueError):
        constraint_likelihood(np.array([1.0, 1.0, 0.0]), c, lp)


@pytest.mark.parametrize("m", [0.6, 0.75, 0.9])
def test_likelihood_integrates_to_one(m):
    rng = np.random.default_rng(1)
    pts = unit_vectors(rng, 200_000)
    c = HalfSpaceConstraint(tuple(rng.normal(size=3)))
    assert 4 * np.pi * constraint_likelihood(pts, c, LikelihoodParams(m)).mean() == pytest.approx(1.0, abs=0.02)


def test_empty_update_is_identity():
    b = init_uniform_with_prior(100, 0)
    out = update(b, ConstraintSet(), LikelihoodParams(0.8))
    np.testing.assert_array_equal(out.weights, b.weights)
    np.testing.assert_array_equal(out.particles, b.particles)


def test_update_raises_p_bec_more_with_higher_mass():
    b = init_uniform_with_prior(500, 3)
    cs = ConstraintSet.from_normals([(1.0, -0.5, 0.2)])
    vals = [p_bec(update(b, cs, LikelihoodParams(m), resample_degenerate=False), cs) for m in (0.6, 0.8, 0.95)]
    assert p_bec(b, cs) < vals[0] < vals[1] < vals[2]


def test_sequential_equals_batch():
    b = init_uniform_with_prior(300, 4)
    c = ConstraintSet.from_normals([(0.2, 1.0, -0.3)])
    lp = LikelihoodParams(0.7)
    seq = update(update(b, c, lp, resample_degenerate=False), c, lp, resample_degenerate=False)
    batch = update(b, c + c, lp, resample_degenerate=False)
    np.testing.assert_allclose(seq.weights, batch.weights, atol=1e-15)


@given(seeds, masses)
def test_update_properties(seed, m):
    rng = np.random.default_rng(seed)
    b = Belief(unit_vectors(rng, 200), rng.dirichlet(np.ones(200)))
    cs = ConstraintSet.from_normals(rng.normal(size=(int(rng.integers(1, 4)), 3)))
    out = update(b, cs, LikelihoodParams(m), rng)
    assert out.weights.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(np.linalg.norm(out.particles, axis=1), 1.0)
    # Bayes on a fixed particle set: posterior ratio equals likelihood ratio
    post = update(b, cs, LikelihoodParams(m), resample_degenerate=False)
    lik = np.prod([constraint_likelihood(b.particles, c, LikelihoodParams(m)) for c in cs], axis=0)
    ref = b.weights * lik / np.sum(b.weights * lik)
    np.testing.assert_allclose(post.weights, ref, rtol=1e-9, atol=1e-300)


def test_update_is_deterministic_per_seed():
    b = init_uniform_with_prior(300, 4)
    cs = ConstraintSet.from_normals([(1, 0, 0), (0, 1, 0), (0.5, 0.5, 0.3)])
    a = update(b, cs, LikelihoodParams(0.95), np.random.default_rng(7))
    c = update(b, cs, LikelihoodParams(0.95), np.random.default_rng(7))
    np.testing.assert_array_equal(a.particles, c.particles)


def test_resample_keeps_balanced_belief():
    b = init_uniform_with_prior(100, 0)
    assert resample(b, 0.02, 0) is b


def test_resample_collapsed_belief_stays_near_survivor():
    eta = 0.02
    b = init_uniform_with_prior(500, 0)
    w = np.zeros(500)
    w[17] = 1.0
    out = resample(Belief(b.particles, w), eta, 1)
    ang = _angle(out.particles, b.particles[17])
    assert np.all(ang <= 5 * eta)
    assert np.quantile(ang, 0.95) <= 3 * eta
    assert np.all(out.weights == 1 / 500)


def test_resample_preserves_mean_direction():
    eta, n = 0.02, 500
    rng = np.random.default_rng(2)
    center = np.array([0.3, -0.4, -0.866])
    center /= np.linalg.norm(center)
    for trial in range(100):
        pts = jitter(np.tile(center, (n, 1)), 1e-5, rng)
        b = Belief(pts, rng.dirichlet(np.full(n, 0.1)))
        assert b.ess < n / 2
        out = resample(b, eta, rng)
        assert _angle(out.mean_direction(), b.mean_direction()) <= 5 * eta / np.sqrt(n) + 1e-4


def test_degenerate_update_raises_and_reinit_recovers():
    b = Belief(np.array([[0, 0, -1.0], [0, 0.6, -0.8]]), np.array([1.0, 0.0]))
    with pytest.raises(DegenerateUpdateError):
        reweight(b, np.array([-np.inf, 0.0]))
    cs = ConstraintSet.from_normals([(0, 0, 1.0)])
    out = update_or_reinit(b, cs, LikelihoodParams(0.9), np.random.default_rng(0))
    assert np.isclose(out.weights.sum(), 1.0)


def test_sample_weight_single_particle():
    b = Belief(np.array([[0.0, 0.6, -0.8]]), np.array([1.0]))
    np.testing.assert_array_equal(sample_weight(b, 0), [0.0, 0.6, -0.8])


def test_sample_weight_frequencies():
    rng = np.random.default_rng(3)
    b = Belief(unit_vectors(rng, 10), rng.dirichlet(np.ones(10)))
    counts = np.zeros(10)
    draw = np.random.default_rng(4)
    for _ in range(10_000):
        x = sample_weight(b, draw)
        counts[np.argmin(np.linalg.norm(b.particles - x, axis=1))] += 1
    assert stats.chisquare(counts, 10_000 * b.weights).pvalue > 0.01


def test_belief_round_trip():
    b = init_uniform_with_prior(20, 5)
    c = Belief.from_dict(b.to_dict())
    np.testing.assert_array_equal(c.particles, b.particles)
    np.testing.assert_array_equal(c.weights, b.weights)
