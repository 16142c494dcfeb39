"""Particle-filter beliefs over unit reward-weight vectors.

Each constraint contributes a likelihood that is uniform on its consistent
hemisphere and decays like a von Mises-Fisher density on the other side.
With consistent mass ``m`` the density is ``m / 2pi`` on the consistent
side and ``m / 2pi * exp(kappa * c.x)`` below the plane; continuity at the
boundary and total mass one then force ``(1 - exp(-kappa)) / kappa =
(1 - m) / m``, so ``kappa`` follows from ``m``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .bec import ConstraintSet, HalfSpaceConstraint

log = logging.getLogger(__name__)

DEFAULT_N_PARTICLES = 500
DEFAULT_ETA = 0.02
DEFAULT_NU = 0.01
DENSITY_FLOOR = 1e-12


class DegenerateUpdateError(RuntimeError):
    """Raised when every particle weight vanishes after an update."""


@dataclass(eq=False)
class Belief:
    particles: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.particles = np.asarray(self.particles, dtype=float).reshape(-1, 3)
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(self.particles) != len(self.weights):
            raise ValueError("particles and weights differ in length")

    def __len__(self):
        return len(self.weights)

    @property
    def ess(self) -> float:
        return float(self.weights.sum() ** 2 / np.sum(self.weights**2))

    def copy(self) -> Belief:
        return Belief(self.particles.copy(), self.weights.copy())

    def mean_direction(self) -> np.ndarray:
        m = self.weights @ self.particles
        return m / np.linalg.norm(m)

    def to_dict(self) -> dict:
        return {"particles": self.particles.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, d) -> Belief:
        return cls(np.array(d["particles"]), np.array(d["weights"]))


@dataclass(frozen=True)
class LikelihoodParams:
    consistent_mass: float

    def __post_init__(self):
        # continuity plus a decaying inconsistent side needs m > 1/2
        if not 0.5 < self.consistent_mass < 1.0:
            raise ValueError("consistent_mass must lie in (0.5, 1)")

    @cached_property
    def kappa(self) -> float:
        return concentration_for_mass(self.consistent_mass)

    @property
    def uniform_density(self) -> float:
        return self.consistent_mass / (2.0 * np.pi)


def concentration_for_mass(m: float) -> float:
    """Solve ``(1 - exp(-k)) / k = (1 - m) / m`` for the decay rate ``k``."""
    target = (1.0 - m) / m
    return float(brentq(lambda k: -np.expm1(-k) / k - target, 1e-12, 1e6, xtol=1e-14, rtol=1e-15))


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def constraint_likelihood(x, c: HalfSpaceConstraint, lp: LikelihoodParams):
    """Density of unit vector(s) ``x`` given that constraint ``c`` was shown.

    ``x`` may be one vector or an (n, 3) array, giving a float or an array.
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(np.linalg.norm(x, axis=-1) - 1.0) > 1e-6):
        raise ValueError("x must be a unit vector")
    s = x @ _unit(c.vector)
    dens = lp.uniform_density * np.exp(lp.kappa * np.minimum(s, 0.0))
    return float(dens) if x.ndim == 1 else dens


def log_likelihood_ratio(particles: np.ndarray, cs: ConstraintSet, kappa: float) -> np.ndarray:
    """Summed log of each constraint's density relative to its uniform level."""
    if len(cs) == 0:
        return np.zeros(len(particles))
    s = particles @ cs.unit_normals.T
    return kappa * np.minimum(s, 0.0).sum(axis=1)


def init_uniform_with_prior(n: int = DEFAULT_N_PARTICLES, seed=None) -> Belief:
    """Uniform particles on the hemisphere where the step weight is negative."""
    if n < 2:
        raise ValueError("need at least two particles")
    rng = np.random.default_rng(seed)
    pts = np.empty((0, 3))
    while len(pts) < n:
        g = rng.normal(size=(n, 3))
        g = g[np.abs(g[:, 2]) > 0.0]
        g[:, 2] = -np.abs(g[:, 2])
        pts = np.vstack([pts, _unit(g)])
    return Belief(pts[:n], np.full(n, 1.0 / n))


def reweight(b: Belief, log_factor: np.ndarray) -> Belief:
    with np.errstate(divide="ignore"):
        logw = np.log(b.weights) + log_factor
    if not np.any(np.isfinite(logw)):
        raise DegenerateUpdateError("all particle weights vanished")
    w = np.exp(logw - logsumexp(logw))
    return Belief(b.particles.copy(), w / w.sum())


def update(b: Belief, cs: ConstraintSet, lp: LikelihoodParams, rng=None,
           eta: float = DEFAULT_ETA, resample_degenerate: bool = True) -> Belief:
    """Multiply weights by each constraint's likelihood, then maybe resample."""
    if len(cs) == 0:
        return b.copy()
    out = reweight(b, log_likelihood_ratio(b.particles, cs, lp.kappa))
    return resample(out, eta, rng) if resample_degenerate else out


def update_or_reinit(b: Belief, cs: ConstraintSet, lp: LikelihoodParams, rng,
                     eta: float = DEFAULT_ETA) -> Belief:
    """``update`` that restarts from the prior instead of failing."""
    try:
        return update(b, cs, lp, rng, eta)
    except DegenerateUpdateError:
        log.warning("degenerate update; reinitializing belief from the prior")
        fresh = init_uniform_with_prior(len(b), rng)
        floor = np.log(DENSITY_FLOOR / lp.uniform_density)
        factor = np.maximum(log_likelihood_ratio(fresh.particles, cs, lp.kappa), floor * max(len(cs), 1))
        return resample(reweight(fresh, factor), eta, rng)


def systematic_indices(weights: np.ndarray, rng) -> np.ndarray:
    n = len(weights)
    positions = (rng.random() + np.arange(n)) / n
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    return np.searchsorted(cum, positions, side="left")


def jitter(particles: np.ndarray, sigma: float, rng) -> np.ndarray:
    if sigma <= 0:
        return particles.copy()
    return _unit(particles + rng.normal(scale=sigma, size=particles.shape))


def resample(b: Belief, eta: float = DEFAULT_ETA, rng=None) -> Belief:
    """Systematic resampling with Gaussian jitter once ESS drops below n/2."""
    n = len(b)
    if b.ess >= n / 2:
        return b
    rng = np.random.default_rng(rng)
    idx = systematic_indices(b.weights, rng)
    return Belief(jitter(b.particles[idx], eta, rng), np.full(n, 1.0 / n))


def sample_weight(b: Belief, seed=None) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return b.particles[rng.choice(len(b), p=b.weights)].copy()
