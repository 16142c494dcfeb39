"""Half-space constraints on reward weights and their regions on the sphere."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .mdp import ACTIONS, GridEnvironment, Policy, Trajectory, feature_expectations

SOURCES = ("demo", "counterfactual", "test_response", "feedback", "target")
ZERO_TOL = 1e-10
DEFAULT_SAMPLES = 100_000


@dataclass(frozen=True)
class HalfSpaceConstraint:
    """The closed half-space ``normal . w >= 0``."""

    normal: tuple[float, float, float]
    source: str = "demo"

    def __post_init__(self):
        n = tuple(float(v) for v in self.normal)
        if len(n) != 3:
            raise ValueError("constraint normals are 3-vectors")
        if not any(n):
            raise ValueError("constraint normal must be non-zero")
        if self.source not in SOURCES:
            raise ValueError(f"unknown constraint source {self.source!r}")
        object.__setattr__(self, "normal", n)

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.normal)

    def satisfied_by(self, w) -> bool:
        return bool(self.vector @ np.asarray(w) >= 0.0)

    def __neg__(self) -> HalfSpaceConstraint:
        return HalfSpaceConstraint(tuple(-v for v in self.normal), self.source)

    def to_dict(self) -> dict:
        return {"normal": list(self.normal), "source": self.source}

    @classmethod
    def from_dict(cls, d) -> HalfSpaceConstraint:
        return cls(tuple(d["normal"]), d.get("source", "demo"))


@dataclass(frozen=True)
class ConstraintSet:
    constraints: tuple[HalfSpaceConstraint, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))

    def __len__(self):
        return len(self.constraints)

    def __iter__(self):
        return iter(self.constraints)

    def __getitem__(self, i):
        return self.constraints[i]

    def __add__(self, other: ConstraintSet) -> ConstraintSet:
        return ConstraintSet(self.constraints + tuple(other))

    @property
    def normals(self) -> np.ndarray:
        if not self.constraints:
            return np.zeros((0, 3))
        return np.array([c.normal for c in self.constraints])

    @property
    def unit_normals(self) -> np.ndarray:
        N = self.normals
        return N / np.linalg.norm(N, axis=1, keepdims=True) if len(N) else N

    def satisfied_by(self, W) -> np.ndarray:
        """Boolean mask over rows of ``W`` lying inside every half-space."""
        W = np.atleast_2d(W)
        if not self.constraints:
            return np.ones(len(W), dtype=bool)
        return np.all(W @ self.normals.T >= 0.0, axis=1)

    def with_source(self, source: str) -> ConstraintSet:
        return ConstraintSet(HalfSpaceConstraint(c.normal, source) for c in self.constraints)

    def to_list(self) -> list:
        return [c.to_dict() for c in self.constraints]

    @classmethod
    def from_list(cls, items) -> ConstraintSet:
        return cls(HalfSpaceConstraint.from_dict(d) for d in items)

    @classmethod
    def from_normals(cls, normals, source: str = "demo") -> ConstraintSet:
        return cls(HalfSpaceConstraint(tuple(n), source) for n in np.atleast_2d(normals) if len(n))


def constraints_from_pair(optimal: Trajectory, alternative: Trajectory,
                          source: str = "counterfactual") -> HalfSpaceConstraint | None:
    """Constraint saying ``optimal`` is preferred to ``alternative``.

    Returns None when both trajectories accrue the same features, since the
    comparison then says nothing about the weights.
    """
    diff = optimal.features - alternative.features
    if np.all(np.abs(diff) <= ZERO_TOL):
        return None
    return HalfSpaceConstraint(tuple(diff), source)


def constraints_from_demo(env: GridEnvironment, demo: Trajectory, pol: Policy) -> ConstraintSet:
    """One constraint per visited (s, a) and alternative action b != a."""
    out = []
    for s, a, _ in demo.steps:
        mu_a = feature_expectations(env, pol, s, a)
        for b in range(len(ACTIONS)):
            if b == a:
                continue
            diff = mu_a - feature_expectations(env, pol, s, b)
            if np.any(np.abs(diff) > ZERO_TOL):
                out.append(HalfSpaceConstraint(tuple(diff), "demo"))
    return ConstraintSet(out)


@lru_cache(maxsize=8)
def _fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    phi = np.pi * (1.0 + 5**0.5) * i
    pts = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    pts.setflags(write=False)
    return pts


def sphere_points(n: int = DEFAULT_SAMPLES, seed=None) -> np.ndarray:
    """Points covering the unit sphere evenly.

    With ``seed=None`` this is a fixed Fibonacci lattice, shared by every
    caller so that areas are comparable; otherwise i.i.d. uniform draws.
    """
    if seed is None:
        return _fibonacci_sphere(int(n))
    g = np.random.default_rng(seed).normal(size=(int(n), 3))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _dedupe(cs: ConstraintSet) -> list[HalfSpaceConstraint]:
    kept, units = [], []
    for c, u in zip(cs, cs.unit_normals):
        if any(np.max(np.abs(u - v)) <= 1e-9 for v in units):
            continue
        kept.append(c)
        units.append(u)
    return kept


def minimize(cs: ConstraintSet, n_samples: int = DEFAULT_SAMPLES, points=None) -> ConstraintSet:
    """Drop duplicate and redundant constraints.

    A constraint is redundant when no sample point violates it while
    satisfying every other constraint still kept.  Removal is sequential, so
    the sampled intersection never changes.
    """
    kept = _dedupe(cs)
    if len(kept) <= 1:
        return ConstraintSet(kept)
    pts = sphere_points(n_samples) if points is None else points
    viol = (np.array([c.normal for c in kept]) @ pts.T) < 0.0
    n_viol = viol.sum(axis=0)
    alive = np.ones(len(kept), dtype=bool)
    for i in range(len(kept)):
        if not np.any(viol[i] & (n_viol == 1)):
            alive[i] = False
            n_viol -= viol[i]
    return ConstraintSet(c for c, a in zip(kept, alive) if a)


class AreaEstimate(NamedTuple):
    fraction: float
    stderr: float


def spherical_area(cs: ConstraintSet, n_samples: int = DEFAULT_SAMPLES, seed=None) -> AreaEstimate:
    """Fraction of the unit sphere satisfying every constraint."""
    if n_samples < 10_000:
        raise ValueError("n_samples must be at least 1e4")
    if len(cs) == 0:
        return AreaEstimate(1.0, 0.0)
    p = float(np.mean(cs.satisfied_by(sphere_points(n_samples, seed))))
    return AreaEstimate(p, float(np.sqrt(p * (1.0 - p) / n_samples)))


def region_is_empty(cs: ConstraintSet, n_samples: int = DEFAULT_SAMPLES) -> bool:
    return len(cs) > 0 and not np.any(cs.satisfied_by(sphere_points(n_samples)))


def p_bec(belief, cs: ConstraintSet) -> float:
    """Belief mass on particles inside every constraint (boundary included)."""
    inside = cs.satisfied_by(belief.particles)
    # summation error can push a full mass a hair above one
    return min(1.0, float(np.sum(belief.weights[inside])))
